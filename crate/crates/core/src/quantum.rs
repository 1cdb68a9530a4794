//! Dense complex linear algebra for the small bipartite spaces used here.
//!
//! Basis ordering is fixed crate-wide. Alice's polarization qubit is
//! `{H, V}`. Bob's time-bin system is either the qubit `{E, L}` or the
//! three-level space `{∅, E, L}` where `∅` means no photon arrived. A
//! composite index is `a * dim_b + b`, i.e. Alice's factor is leftmost in
//! every Kronecker product.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Build a complex matrix from real row-major entries.
pub fn real_matrix(dim: usize, rows: &[f64]) -> CMatrix {
    assert_eq!(rows.len(), dim * dim);
    CMatrix::from_fn(dim, dim, |i, j| c(rows[i * dim + j], 0.0))
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// A Hermitian operator on a `dim_a × dim_b` space. Single-system operators
/// use `dim_b = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim_a: usize,
    dim_b: usize,
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(dim_a: usize, dim_b: usize, matrix: CMatrix) -> Result<Self> {
        let dim = dim_a * dim_b;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NonHermitian { deviation: dev });
        }
        Ok(Self {
            dim_a,
            dim_b,
            matrix,
        })
    }

    /// Operator on a single system.
    pub fn single(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(n, 1, matrix)
    }

    /// Skips the Hermiticity check; callers construct `matrix` Hermitian by
    /// construction (sums, Kronecker products, partial transposes).
    pub(crate) fn from_parts(dim_a: usize, dim_b: usize, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), dim_a * dim_b);
        Self {
            dim_a,
            dim_b,
            matrix,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(dim, 1, CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim_a: usize, dim_b: usize) -> Self {
        let n = dim_a * dim_b;
        Self::from_parts(dim_a, dim_b, CMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// Reinterpret the bipartite split without touching the entries.
    pub fn with_dims(mut self, dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a * dim_b != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim_a * dim_b,
            });
        }
        self.dim_a = dim_a;
        self.dim_b = dim_b;
        Ok(self)
    }

    /// Kronecker product `self ⊗ other` with `self` as the leftmost factor.
    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_parts(self.dim(), other.dim(), self.matrix.kronecker(&other.matrix))
    }

    /// Transpose of the first (Alice) factor.
    pub fn partial_transpose(&self) -> HermitianOperator {
        Self::from_parts(
            self.dim_a,
            self.dim_b,
            partial_transpose_matrix(&self.matrix, self.dim_a, self.dim_b),
        )
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scale(&self, k: f64) -> HermitianOperator {
        Self::from_parts(self.dim_a, self.dim_b, self.matrix.map(|z| z * k))
    }

    pub fn add(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_parts(self.dim_a, self.dim_b, &self.matrix + &other.matrix)
    }

    pub fn sub(&self, other: &HermitianOperator) -> HermitianOperator {
        Self::from_parts(self.dim_a, self.dim_b, &self.matrix - &other.matrix)
    }

    /// `Re Tr(self · other)`; both operands Hermitian so the trace is real.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        trace_product(&self.matrix, &other.matrix)
    }

    pub fn eig(&self) -> Result<Eigen> {
        eig_hermitian(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values[0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> OperatorJson {
        let n = self.dim();
        OperatorJson {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            re: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].im).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &OperatorJson) -> Result<Self> {
        let n = json.dim_a * json.dim_b;
        let shape_ok = json.re.len() == n
            && json.im.len() == n
            && json.re.iter().chain(json.im.iter()).all(|row| row.len() == n);
        if !shape_ok {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: json.re.len(),
            });
        }
        let m = CMatrix::from_fn(n, n, |i, j| c(json.re[i][j], json.im[i][j]));
        Self::new(json.dim_a, json.dim_b, m)
    }
}

/// Serialized operator: `{dim_a, dim_b, re: [[..]], im: [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim_a: usize,
    pub dim_b: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn partial_transpose_matrix(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    let n = dim_a * dim_b;
    CMatrix::from_fn(n, n, |row, col| {
        let (a, b) = (row / dim_b, row % dim_b);
        let (a2, b2) = (col / dim_b, col % dim_b);
        m[(a2 * dim_b + b, a * dim_b + b2)]
    })
}

/// A validated density operator on a `dim_a × dim_b` space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    /// Checks Hermiticity (1e-12), unit trace (1e-10) and positivity
    /// (minimum eigenvalue ≥ -1e-9).
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let im_tr = op.matrix.trace().im;
        if im_tr.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace has imaginary part {im_tr}")));
        }
        let min = op.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(Self(op))
    }

    pub fn from_matrix(dim_a: usize, dim_b: usize, m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(dim_a, dim_b, m)?)
    }

    /// `|psi><psi|` for a (not necessarily normalized) state vector.
    pub fn pure(dim_a: usize, dim_b: usize, psi: &[Complex64]) -> Result<Self> {
        let n = dim_a * dim_b;
        if psi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: psi.len(),
            });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let m = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Ok(Self(HermitianOperator::from_parts(dim_a, dim_b, m)))
    }

    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let n = dim_a * dim_b;
        let m = CMatrix::identity(n, n).map(|z| z / n as f64);
        Self(HermitianOperator::from_parts(dim_a, dim_b, m))
    }

    /// Convex combination `sum w_k rho_k`; weights must be nonnegative and
    /// sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let (da, db) = first.1.dims();
        let n = da * db;
        let mut m = CMatrix::zeros(n, n);
        for (w, rho) in parts {
            if *w < 0.0 {
                return Err(Error::InvalidState(format!("negative weight {w}")));
            }
            if rho.dims() != (da, db) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: rho.dim(),
                });
            }
            m += rho.matrix().map(|z| z * *w);
        }
        Self::from_matrix(da, db, m)
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
        Self(a.0.tensor(&b.0))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.0.matrix, &self.0.matrix)
    }

    pub fn partial_transpose(&self) -> HermitianOperator {
        self.0.partial_transpose()
    }

    /// `Tr(rho · obs)`. The imaginary residue must be below 1e-10.
    pub fn expectation(&self, obs: &HermitianOperator) -> Result<f64> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: obs.dim(),
            });
        }
        let z = (&self.0.matrix * &obs.matrix).trace();
        if z.im.abs() > 1e-10 {
            return Err(Error::NonHermitian { deviation: z.im.abs() });
        }
        Ok(z.re)
    }

    /// Reduced state of Alice (trace over Bob).
    pub fn alice_marginal(&self) -> CMatrix {
        let (da, db) = self.dims();
        CMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| self.0.matrix[(a * db + b, a2 * db + b)]).sum()
        })
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending, the
/// k-th column of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// `V diag(f(lambda)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            let w = f(self.values[k]);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for i in 0..n {
                let vi = v[i] * w;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies
/// the classic real Jacobi rotation that zeroes it.
pub fn eig_hermitian(m: &CMatrix) -> Result<Eigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * scale.max(1.0) {
        return Err(Error::NonHermitian { deviation: dev });
    }

    // Symmetrize so that tiny input asymmetries do not leak into the result.
    let mut a = CMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let mut v = CMatrix::identity(n, n);
    let frob2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let stop = (f64::EPSILON * f64::EPSILON) * frob2;

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let mag = b.norm();
                if mag <= f64::MIN_POSITIVE || mag * mag <= stop * 1e-4 {
                    continue;
                }
                let phase = b / mag;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // J = [[cs, sn], [-sn e^{-i phi}, cs e^{-i phi}]] on (p, q).
                let em = phase.conj();
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * cs - akq * em * sn;
                    a[(k, q)] = akp * sn + akq * em * cs;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = apk * cs - aqk * phase * sn;
                    a[(q, k)] = apk * sn + aqk * phase * cs;
                }
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * cs - vkq * em * sn;
                    v[(k, q)] = vkp * sn + vkq * em * cs;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(Eigen { values, vectors })
}

/// Pauli matrices.
pub fn pauli_x() -> CMatrix {
    real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&g + g.adjoint()).map(|z| z * 0.5)
    }

    fn random_state(n_a: usize, n_b: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let n = n_a * n_b;
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        DensityMatrix::from_matrix(n_a, n_b, m.map(|z| z / tr)).unwrap()
    }

    fn op(dim_a: usize, dim_b: usize, m: CMatrix) -> HermitianOperator {
        HermitianOperator::new(dim_a, dim_b, m).unwrap()
    }

    #[test]
    fn tensor_of_identities() {
        let i6 = HermitianOperator::identity(2).tensor(&HermitianOperator::identity(3));
        assert_eq!(i6.dims(), (2, 3));
        assert_eq!(i6.matrix(), &CMatrix::identity(6, 6));
    }

    #[test]
    fn tensor_single_entry() {
        let mh = op(2, 1, real_matrix(2, &[1.0, 0.0, 0.0, 0.0]));
        let me = op(3, 1, real_matrix(3, &[0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0]));
        let k = mh.tensor(&me);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == 1 && j == 1 { 0.25 } else { 0.0 };
                assert_eq!(k.get(i, j), c(expected, 0.0));
            }
        }
    }

    #[test]
    fn mixed_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_hermitian(2, &mut rng);
            let b = random_hermitian(3, &mut rng);
            let cc = random_hermitian(2, &mut rng);
            let d = random_hermitian(3, &mut rng);
            let lhs = a.kronecker(&b) * cc.kronecker(&d);
            let rhs = (&a * &cc).kronecker(&(&b * &d));
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h = op(2, 3, random_hermitian(6, &mut rng));
            let pt = h.partial_transpose();
            assert!((pt.trace() - h.trace()).abs() < 1e-12);
            assert!(hermitian_deviation(pt.matrix()) < 1e-12);
            assert_eq!(pt.partial_transpose(), h);
        }
    }

    #[test]
    fn partial_transpose_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ra = random_state(2, 1, &mut rng);
        let rb = random_state(3, 1, &mut rng);
        let prod = DensityMatrix::product(&ra, &rb).operator().clone().with_dims(2, 3).unwrap();
        let expected = ra.matrix().transpose().kronecker(rb.matrix());
        let pt = prod.partial_transpose();
        assert!(max_abs(&(pt.matrix() - expected)) < 1e-15);
        assert!(pt.min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn bell_state_partial_transpose() {
        // (|HE> + |VL>)/sqrt 2 in {H,V} x {0,E,L}: indices 1 and 5.
        let mut psi = vec![c(0.0, 0.0); 6];
        psi[1] = c(1.0, 0.0);
        psi[5] = c(1.0, 0.0);
        let rho = DensityMatrix::pure(2, 3, &psi).unwrap();
        let ev = rho.partial_transpose().eig().unwrap();
        assert!((ev.values[0] + 0.5).abs() < 1e-12);
        assert!((rho.partial_transpose().trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_diagonal_and_pauli() {
        let d = real_matrix(3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(eig_hermitian(&d).unwrap().values, vec![-1.0, 2.0, 3.0]);
        let ev = eig_hermitian(&pauli_x()).unwrap().values;
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        let ev = eig_hermitian(&pauli_y()).unwrap().values;
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_reconstruction_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let h = random_hermitian(6, &mut rng);
            let e = eig_hermitian(&h).unwrap();
            let sum: f64 = e.values.iter().sum();
            assert!((sum - h.trace().re).abs() < 1e-10);
            let rec = e.reconstruct_with(|x| x);
            let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let err = (&rec - &h).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * norm);
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!(max_abs(&(gram - CMatrix::identity(6, 6))) < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_matches_library_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let h = random_hermitian(6, &mut rng);
            let ours = eig_hermitian(&h).unwrap().values;
            let mut theirs: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            theirs.sort_by(f64::total_cmp);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eig_psd_inputs_have_nonnegative_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rho = random_state(2, 3, &mut rng);
            assert!(rho.operator().min_eigenvalue().unwrap() >= -1e-10);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = real_matrix(2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NonHermitian { .. })));
        assert!(HermitianOperator::single(m).is_err());
    }

    #[test]
    fn pure_state_partial_transpose_spectrum() {
        // For a pure state with Schmidt coefficients s_i the partial transpose
        // has eigenvalues s_i^2 and ±s_i s_j (i < j), padded with zeros.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let psi: Vec<Complex64> = (0..6)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
            // Schmidt coefficients from the singular values of the 2x3 coefficient matrix.
            let coeff = nalgebra::DMatrix::from_fn(2, 3, |a, b| psi[a * 3 + b]);
            let sv = coeff.svd(false, false).singular_values;
            let (s0, s1) = (sv[0], sv[1]);
            let mut expected = vec![s0 * s0, s1 * s1, s0 * s1, -s0 * s1, 0.0, 0.0];
            expected.sort_by(f64::total_cmp);

            let rho = DensityMatrix::pure(2, 3, &psi).unwrap();
            let got = rho.partial_transpose().eig().unwrap().values;
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-10, "{got:?} vs {expected:?}");
            }
        }
    }

    #[test]
    fn expectation_values() {
        let mixed = DensityMatrix::maximally_mixed(2, 3);
        let i6 = HermitianOperator::identity(6).with_dims(2, 3).unwrap();
        assert!((mixed.expectation(&i6).unwrap() - 1.0).abs() < 1e-15);

        let mut psi = vec![c(0.0, 0.0); 6];
        psi[1] = c(1.0, 0.0);
        let he = DensityMatrix::pure(2, 3, &psi).unwrap();
        let mh = op(2, 1, real_matrix(2, &[1.0, 0.0, 0.0, 0.0]));
        let me = op(3, 1, real_matrix(3, &[0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0]));
        assert!((he.expectation(&mh.tensor(&me)).unwrap() - 0.25).abs() < 1e-15);

        assert!(matches!(
            he.expectation(&HermitianOperator::identity(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expectation_is_linear_in_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let r1 = random_state(2, 3, &mut rng);
            let r2 = random_state(2, 3, &mut rng);
            let w: f64 = rng.random_range(0.0..1.0);
            let obs = op(2, 3, random_hermitian(6, &mut rng));
            let mix = DensityMatrix::mixture(&[(w, &r1), (1.0 - w, &r2)]).unwrap();
            let lhs = mix.expectation(&obs).unwrap();
            let rhs = w * r1.expectation(&obs).unwrap() + (1.0 - w) * r2.expectation(&obs).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = real_matrix(2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(DensityMatrix::from_matrix(2, 1, bad_trace).is_err());
        let negative = real_matrix(2, &[1.5, 0.0, 0.0, -0.5]);
        assert!(DensityMatrix::from_matrix(2, 1, negative).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = op(2, 3, random_hermitian(6, &mut rng));
        let text = serde_json::to_string(&h.to_json()).unwrap();
        let back: OperatorJson = serde_json::from_str(&text).unwrap();
        assert_eq!(HermitianOperator::from_json(&back).unwrap(), h);
        assert!(text.contains("\"dim_a\":2") && text.contains("\"dim_b\":3"));
    }
}
