//! Entanglement verification from the measured visibilities.
//!
//! The question is whether some PPT state on `2 × 3` reproduces the
//! visibilities. For this dimension PPT is equivalent to separability, so an
//! infeasible program certifies entanglement.
//!
//! The program is posed as `max t` subject to `ρ ⪰ tI`, `ρ^Γ ⪰ tI` on the
//! affine set fixed by the visibility constraints and the normalization. It is solved
//! by a log-det barrier method; each centring step yields a primal point
//! (a lower bound on `t*`) and a dual point `Z_i = μ X_i⁻¹` that gives an
//! upper bound. Verdicts are issued only when one of these bounds clears the
//! tolerance.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::measurement::{alice_povm, bob_povm, AnalyzerEfficiencies};
use crate::quantum::{c, eig_hermitian, partial_transpose_matrix, trace_product, CMatrix, DensityMatrix, HermitianOperator};
use crate::{Error, Result};

const DIM_A: usize = 2;
const DIM_B: usize = 3;
const DIM: usize = DIM_A * DIM_B;
/// Composite indices with Bob in the vacuum state.
const VACUUM: [usize; 2] = [0, 3];
const QUBIT: [usize; 4] = [1, 2, 4, 5];

/// Probability that Bob's photon arrives, fixed by default so that `I/6` is
/// admissible.
pub const DEFAULT_ARRIVAL: f64 = 2.0 / 3.0;

/// Homogeneous visibility constraints `Tr(ρ C_k) = 0` plus normalization.
///
/// The visibility constraints are homogeneous, so on their own they are met
/// by any state in which Bob receives nothing. The vacuum population is
/// therefore pinned to `1 - arrival`. Because every measurement operator is
/// block diagonal in Bob's photon number, the verdict does not depend on the
/// value chosen in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub v_z: f64,
    pub v_xy: f64,
    pub efficiencies: AnalyzerEfficiencies,
    pub arrival: f64,
    pub operators: Vec<(String, HermitianOperator)>,
    /// Index blocks of the matrices searched over; one block of all six
    /// indices for the unrestricted problem.
    pub blocks: Vec<Vec<usize>>,
    /// Rank of the linear system including the two normalization rows.
    pub rank: usize,
    pub warnings: Vec<String>,
}

impl ConstraintSet {
    pub fn is_restricted(&self) -> bool {
        self.blocks.len() > 1
    }

    /// Largest violation among `Tr(ρ C_k) = 0`, `Tr ρ = 1` and the vacuum
    /// population.
    pub fn residual(&self, rho: &CMatrix) -> f64 {
        let vacuum: f64 = VACUUM.iter().map(|&i| rho[(i, i)].re).sum();
        let mut r = (rho.trace().re - 1.0).abs().max((vacuum - (1.0 - self.arrival)).abs());
        for (_, op) in &self.operators {
            r = r.max(trace_product(rho, op.matrix()).abs());
        }
        r
    }
}

/// Build the three visibility constraints with `V_{+z} = V_{-z} = v_z`.
pub fn build_constraints(v_z: f64, v_xy: f64, eff: AnalyzerEfficiencies) -> Result<ConstraintSet> {
    build_constraints_with_arrival(v_z, v_xy, eff, DEFAULT_ARRIVAL)
}

pub fn build_constraints_with_arrival(
    v_z: f64,
    v_xy: f64,
    eff: AnalyzerEfficiencies,
    arrival: f64,
) -> Result<ConstraintSet> {
    for (name, v) in [("v_z", v_z), ("v_xy", v_xy)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::param(name, v, "visibility must lie in [-1, 1]"));
        }
    }
    if !(arrival > 0.0 && arrival < 1.0) {
        return Err(Error::param("arrival", arrival, "must lie strictly between 0 and 1"));
    }
    let eff = AnalyzerEfficiencies::new(eff.eta_l, eff.eta_s)?;
    let a = alice_povm();
    let b = bob_povm(eff)?;
    let diff_sum = |plus: &HermitianOperator, minus: &HermitianOperator, v: f64, bob: &HermitianOperator| {
        plus.scale(1.0 - v).sub(&minus.scale(1.0 + v)).tensor(bob)
    };
    let operators = vec![
        ("+z".to_string(), diff_sum(&a.h, &a.v, v_z, &b.early)),
        ("-z".to_string(), diff_sum(&a.v, &a.h, v_z, &b.late)),
        ("xy".to_string(), diff_sum(&a.d, &a.a, v_xy, &b.middle)),
    ];
    finish(v_z, v_xy, eff, arrival, operators, vec![(0..DIM).collect()])
}

/// Restrict the search to matrices that are block diagonal in Bob's photon
/// number (vacuum block ⊕ qubit block).
pub fn block_diagonal_restriction(c: &ConstraintSet) -> Result<ConstraintSet> {
    for (name, op) in &c.operators {
        for &i in &VACUUM {
            for &j in &QUBIT {
                if op.get(i, j).norm() > 0.0 || op.get(j, i).norm() > 0.0 {
                    return Err(Error::StructureViolation(format!(
                        "constraint {name} couples vacuum index {i} and qubit index {j}"
                    )));
                }
            }
        }
    }
    finish(
        c.v_z,
        c.v_xy,
        c.efficiencies,
        c.arrival,
        c.operators.clone(),
        vec![VACUUM.to_vec(), QUBIT.to_vec()],
    )
}

fn finish(
    v_z: f64,
    v_xy: f64,
    efficiencies: AnalyzerEfficiencies,
    arrival: f64,
    operators: Vec<(String, HermitianOperator)>,
    blocks: Vec<Vec<usize>>,
) -> Result<ConstraintSet> {
    let mut set = ConstraintSet {
        v_z,
        v_xy,
        efficiencies,
        arrival,
        operators,
        blocks,
        rank: 0,
        warnings: Vec::new(),
    };
    let space = AffineSpace::new(&set)?;
    set.rank = space.rank;
    let full = set.operators.len() + 2;
    if space.rank < full {
        set.warnings.push(format!(
            "constraints are linearly dependent (rank {} of {full})",
            space.rank
        ));
    }
    Ok(set)
}

/// Orthonormal (Hilbert–Schmidt) basis of Hermitian matrices supported on
/// the given index blocks.
fn hermitian_basis(blocks: &[Vec<usize>]) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::new();
    for block in blocks {
        for (p, &i) in block.iter().enumerate() {
            let mut m = CMatrix::zeros(DIM, DIM);
            m[(i, i)] = c(1.0, 0.0);
            basis.push(m);
            for &j in &block[p + 1..] {
                let mut re = CMatrix::zeros(DIM, DIM);
                re[(i, j)] = c(s, 0.0);
                re[(j, i)] = c(s, 0.0);
                basis.push(re);
                let mut im = CMatrix::zeros(DIM, DIM);
                im[(i, j)] = c(0.0, -s);
                im[(j, i)] = c(0.0, s);
                basis.push(im);
            }
        }
    }
    basis
}

/// `ρ(y) = ρ0 + Σ y_i D_i` for all Hermitian `ρ` on the blocks satisfying the
/// constraints.
struct AffineSpace {
    basis: Vec<CMatrix>,
    x0: DVector<f64>,
    /// Orthonormal null-space basis of the constraint rows, one column per
    /// direction.
    null: DMatrix<f64>,
    rank: usize,
    rho0: CMatrix,
    dirs: Vec<CMatrix>,
    dirs_pt: Vec<CMatrix>,
}

impl AffineSpace {
    fn new(set: &ConstraintSet) -> Result<Self> {
        let basis = hermitian_basis(&set.blocks);
        let d = basis.len();
        // Rows: visibility constraints, trace, vacuum population.
        let m = set.operators.len() + 2;
        let mut a = DMatrix::<f64>::zeros(m, d);
        for (k, (_, op)) in set.operators.iter().enumerate() {
            for (j, g) in basis.iter().enumerate() {
                a[(k, j)] = trace_product(op.matrix(), g);
            }
        }
        for (j, g) in basis.iter().enumerate() {
            a[(m - 2, j)] = g.trace().re;
            a[(m - 1, j)] = VACUUM.iter().map(|&i| g[(i, i)].re).sum();
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 2] = 1.0;
        b[m - 1] = 1.0 - set.arrival;

        let gram = a.transpose() * &a;
        let eig = SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
        let mut null_cols = Vec::new();
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev.abs() <= 1e-12 * scale {
                null_cols.push(eig.eigenvectors.column(k).into_owned());
            }
        }
        let rank = d - null_cols.len();
        let null = if null_cols.is_empty() {
            DMatrix::<f64>::zeros(d, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        let pinv = a
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::StructureViolation(e.to_string()))?;
        let x0 = &pinv * &b;
        if (&a * &x0 - &b).amax() > 1e-9 {
            return Err(Error::StructureViolation("visibility constraints are inconsistent".into()));
        }
        let rho0 = combine(&basis, x0.as_slice());
        let dirs: Vec<CMatrix> = (0..null.ncols())
            .map(|k| combine(&basis, null.column(k).as_slice()))
            .collect();
        let dirs_pt = dirs.iter().map(|m| partial_transpose_matrix(m, DIM_A, DIM_B)).collect();
        Ok(Self {
            basis,
            x0,
            null,
            rank,
            rho0,
            dirs,
            dirs_pt,
        })
    }

    fn dim(&self) -> usize {
        self.dirs.len()
    }

    fn rho(&self, y: &[f64]) -> CMatrix {
        let mut m = self.rho0.clone();
        for (yi, d) in y.iter().zip(&self.dirs) {
            m += d.map(|z| z * *yi);
        }
        m
    }

    fn coords(&self, m: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|g| trace_product(m, g)))
    }

    /// Orthogonal projection onto the affine set, in matrix form.
    fn project(&self, m: &CMatrix) -> CMatrix {
        let x = self.coords(m);
        let dx = &x - &self.x0;
        let p = &self.x0 + &self.null * (self.null.transpose() * dx);
        combine(&self.basis, p.as_slice())
    }
}

fn combine(basis: &[CMatrix], x: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(DIM, DIM);
    for (g, xi) in basis.iter().zip(x) {
        if *xi != 0.0 {
            m += g.map(|z| z * *xi);
        }
    }
    m
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Newton steps across all barrier stages.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// Largest constraint violation of the witness.
    pub constraint: f64,
    pub min_eig_rho: f64,
    pub min_eig_pt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub verdict: Verdict,
    /// Best primal value of `t`, a lower bound on `t*`.
    pub margin: f64,
    /// Certified upper bound on `t*`.
    pub upper_bound: f64,
    pub iterations: usize,
    /// Final barrier weight.
    pub mu: f64,
    /// Primal point achieving `margin`; for a feasible verdict this is a
    /// PPT state reproducing the visibilities.
    #[serde(skip)]
    pub witness: HermitianOperator,
    pub residuals: Residuals,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }

    /// Witness in the operator JSON schema.
    pub fn witness_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.witness.to_json())?)
    }
}

struct Barrier<'a> {
    space: &'a AffineSpace,
    mu: f64,
}

struct Point {
    y: Vec<f64>,
    t: f64,
}

struct Eval {
    value: f64,
    x1_inv: CMatrix,
    x2_inv: CMatrix,
}

fn chol_inverse_logdet(m: CMatrix) -> Option<(CMatrix, f64)> {
    let chol = m.cholesky()?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some((chol.inverse(), logdet))
}

fn shifted(m: &CMatrix, t: f64) -> CMatrix {
    let mut out = m.clone();
    for i in 0..DIM {
        out[(i, i)] -= c(t, 0.0);
    }
    out
}

fn hermitize(m: &mut CMatrix) {
    let h = (&*m + m.adjoint()).map(|z| z * 0.5);
    *m = h;
}

impl Barrier<'_> {
    fn eval(&self, p: &Point) -> Option<Eval> {
        let mut rho = self.space.rho(&p.y);
        hermitize(&mut rho);
        let pt = partial_transpose_matrix(&rho, DIM_A, DIM_B);
        let (x1_inv, l1) = chol_inverse_logdet(shifted(&rho, p.t))?;
        let (x2_inv, l2) = chol_inverse_logdet(shifted(&pt, p.t))?;
        Some(Eval {
            value: p.t + self.mu * (l1 + l2),
            x1_inv,
            x2_inv,
        })
    }

    /// Gradient and negated Hessian in `(y, t)`.
    fn derivatives(&self, e: &Eval) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.space.dim();
        let neg_id = CMatrix::identity(DIM, DIM).map(|z| -z);
        let mut p1: Vec<CMatrix> = self.space.dirs.iter().map(|d| &e.x1_inv * d).collect();
        let mut p2: Vec<CMatrix> = self.space.dirs_pt.iter().map(|d| &e.x2_inv * d).collect();
        p1.push(&e.x1_inv * &neg_id);
        p2.push(&e.x2_inv * &neg_id);
        let mut g = DVector::<f64>::zeros(n + 1);
        let mut h = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            g[i] = self.mu * (p1[i].trace().re + p2[i].trace().re);
            for j in 0..=i {
                let v = self.mu * (trace_product(&p1[i], &p1[j]) + trace_product(&p2[i], &p2[j]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        g[n] += 1.0;
        (g, h)
    }
}

/// Newton direction for `max f`: solve `(-∇²f) Δ = ∇f` with Jacobi scaling.
fn newton_step(g: &DVector<f64>, neg_h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / neg_h[(i, i)].abs().max(1e-300).sqrt()).collect();
    let mut hs = neg_h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= scale[i] * scale[j];
        }
    }
    let gs = DVector::from_iterator(n, (0..n).map(|i| g[i] * scale[i]));
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut m = hs.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&gs);
            return Some(DVector::from_iterator(n, (0..n).map(|i| d[i] * scale[i])));
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

/// Upper bound on `t*` from the dual point `Z_1 = μ X_1⁻¹`, `Z_2 = μ X_2⁻¹`.
///
/// For feasible `(ρ, t)`, `Tr Z_1 (ρ - t) + Tr Z_2 (ρ^Γ - t) ≥ 0`. The part of
/// `W = Z_1 + Z_2^Γ` that does not vanish on the constraint directions is
/// moved into whichever `Z_i` can absorb it while staying PSD; then
/// `Tr(Wρ)` is the same for every feasible `ρ` and bounds `t`.
fn dual_bound(space: &AffineSpace, mu: f64, e: &Eval) -> Option<f64> {
    let z1 = e.x1_inv.map(|z| z * mu);
    let z2 = e.x2_inv.map(|z| z * mu);
    let w = &z1 + partial_transpose_matrix(&z2, DIM_A, DIM_B);
    let wx = space.coords(&w);
    let r = &space.null * (space.null.transpose() * &wx);
    let fixed = &wx - &r;
    let value = fixed.dot(&space.x0);
    let r_mat = combine(&space.basis, r.as_slice());
    let r_norm = r_mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let r_trace = r_mat.trace().re;
    let mut best: Option<f64> = None;
    for (z, shift_trace) in [(&z1, r_trace), (&z2, r_trace)] {
        let min = eig_hermitian(z).ok()?.values[0];
        if min >= r_norm {
            let den = z1.trace().re + z2.trace().re - shift_trace;
            if den > 0.0 {
                let bound = value / den;
                best = Some(best.map_or(bound, |b: f64| b.min(bound)));
            }
        }
    }
    best
}

fn min_eig(m: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.values[0])
}

/// Decide feasibility of the PPT program for the given constraints.
pub fn sdp_feasible(c: &ConstraintSet, opts: SolverOptions) -> Result<FeasibilityReport> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::param("tol", opts.tol, "must be positive"));
    }
    let space = AffineSpace::new(c)?;
    let n = space.dim();
    let rho0 = {
        let mut r = space.rho0.clone();
        hermitize(&mut r);
        r
    };
    let start = min_eig(&rho0)?.min(min_eig(&partial_transpose_matrix(&rho0, DIM_A, DIM_B))?);
    let mut p = Point {
        y: vec![0.0; n],
        t: start - 1.0,
    };
    let mut barrier = Barrier { space: &space, mu: 1.0 };
    let mut iterations = 0;
    let mut upper = f64::INFINITY;
    let mut verdict = None;

    while iterations < opts.max_iter {
        // Centre for the current mu.
        let mut centred = false;
        while iterations < opts.max_iter {
            let e = barrier
                .eval(&p)
                .ok_or_else(|| Error::StructureViolation("iterate left the barrier domain".into()))?;
            let (g, neg_h) = barrier.derivatives(&e);
            let step = match newton_step(&g, &neg_h) {
                Some(s) => s,
                None => break,
            };
            iterations += 1;
            let decrement = g.dot(&step) / barrier.mu;
            if decrement < 1e-18 {
                centred = true;
                break;
            }
            let mut s = 1.0;
            let slope = g.dot(&step);
            let mut accepted = false;
            for _ in 0..60 {
                let q = Point {
                    y: p.y.iter().enumerate().map(|(i, v)| v + s * step[i]).collect(),
                    t: p.t + s * step[n],
                };
                if let Some(eq) = barrier.eval(&q) {
                    if eq.value >= e.value + 0.25 * s * slope {
                        p = q;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                // No ascent possible in floating point: as centred as it gets.
                centred = true;
                break;
            }
            if decrement < 1e-10 {
                centred = true;
                break;
            }
        }
        if !centred {
            break;
        }
        let e = barrier
            .eval(&p)
            .ok_or_else(|| Error::StructureViolation("iterate left the barrier domain".into()))?;
        if let Some(b) = dual_bound(&space, barrier.mu, &e) {
            upper = upper.min(b);
        }
        let gap = upper - p.t;
        if p.t >= -opts.tol && gap <= 1e-6f64.max(opts.tol) {
            verdict = Some(Verdict::Feasible);
        } else if upper < -opts.tol && gap <= 1e-6f64.max(opts.tol) {
            verdict = Some(Verdict::Infeasible);
        }
        if verdict.is_some() {
            break;
        }
        if barrier.mu < 1e-16 {
            break;
        }
        barrier.mu *= 0.2;
    }

    let mut rho = space.rho(&p.y);
    hermitize(&mut rho);
    let residuals = Residuals {
        constraint: c.residual(&rho),
        min_eig_rho: min_eig(&rho)?,
        min_eig_pt: min_eig(&partial_transpose_matrix(&rho, DIM_A, DIM_B))?,
    };
    match verdict {
        Some(verdict) => Ok(FeasibilityReport {
            verdict,
            margin: p.t,
            upper_bound: upper,
            iterations,
            mu: barrier.mu,
            witness: HermitianOperator::new(DIM_A, DIM_B, rho)?,
            residuals,
        }),
        None => Err(Error::NonConvergence {
            iterations,
            margin: p.t,
            gap: upper - p.t,
        }),
    }
}

/// `true` iff the partial transpose has an eigenvalue below `-1e-10`.
pub fn ppt_oracle(rho: &DensityMatrix) -> Result<bool> {
    Ok(rho.partial_transpose().min_eigenvalue()? < -1e-10)
}

/// Outcome of cyclic projections onto the PSD cone, the PPT-image cone and
/// the affine set.
#[derive(Debug, Clone)]
pub struct ProjectionReport {
    /// Final iterate (on the affine set).
    pub point: CMatrix,
    /// Largest negative eigenvalue magnitude of the final iterate and of its
    /// partial transpose.
    pub violation: f64,
    pub iterations: usize,
}

fn psd_part(m: &CMatrix) -> Result<CMatrix> {
    Ok(eig_hermitian(m)?.reconstruct_with(|v| v.max(0.0)))
}

/// Independent feasibility check by alternating projections. Converges to a
/// point of the intersection when it is non-empty; otherwise the violation
/// stays bounded away from zero.
pub fn alternating_projections(c: &ConstraintSet, iterations: usize) -> Result<ProjectionReport> {
    let space = AffineSpace::new(c)?;
    let mut x = space.rho0.clone();
    for _ in 0..iterations {
        x = psd_part(&x)?;
        let pt = partial_transpose_matrix(&x, DIM_A, DIM_B);
        x = partial_transpose_matrix(&psd_part(&pt)?, DIM_A, DIM_B);
        x = space.project(&x);
        hermitize(&mut x);
    }
    let violation = (-min_eig(&x)?).max(-min_eig(&partial_transpose_matrix(&x, DIM_A, DIM_B))?).max(0.0);
    Ok(ProjectionReport {
        point: x,
        violation,
        iterations,
    })
}

/// Options for [`boundary_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub solver: SolverOptions,
    /// Bisection resolution on `v_xy`.
    pub resolution: f64,
    /// Search over block-diagonal states only.
    pub restricted: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            resolution: 1e-3,
            restricted: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub v_z: f64,
    /// Smallest infeasible `v_xy` to within the resolution; `None` when even
    /// `v_xy = 1` is feasible.
    pub threshold: Option<f64>,
    /// Upper bound on `t*` at the threshold (negative).
    pub margin: f64,
    /// Newton steps summed over the bisection.
    pub iterations: usize,
}

fn check_point(v_z: f64, v_xy: f64, eff: AnalyzerEfficiencies, opts: &ScanOptions) -> Result<FeasibilityReport> {
    let set = build_constraints(v_z, v_xy, eff)?;
    let set = if opts.restricted {
        block_diagonal_restriction(&set)?
    } else {
        set
    };
    sdp_feasible(&set, opts.solver)
}

fn threshold_at(v_z: f64, eff: AnalyzerEfficiencies, opts: &ScanOptions) -> Result<BoundaryPoint> {
    let mut iterations = 0;
    let top = check_point(v_z, 1.0, eff, opts)?;
    iterations += top.iterations;
    if top.is_feasible() {
        return Ok(BoundaryPoint {
            v_z,
            threshold: None,
            margin: top.margin,
            iterations,
        });
    }
    let bottom = check_point(v_z, 0.0, eff, opts)?;
    iterations += bottom.iterations;
    if !bottom.is_feasible() {
        return Ok(BoundaryPoint {
            v_z,
            threshold: Some(0.0),
            margin: bottom.upper_bound,
            iterations,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut margin = top.upper_bound;
    while hi - lo > opts.resolution {
        let mid = 0.5 * (lo + hi);
        let r = check_point(v_z, mid, eff, opts)?;
        iterations += r.iterations;
        if r.is_feasible() {
            lo = mid;
        } else {
            hi = mid;
            margin = r.upper_bound;
        }
    }
    Ok(BoundaryPoint {
        v_z,
        threshold: Some(hi),
        margin,
        iterations,
    })
}

/// Classical boundary: for each `v_z`, the smallest `v_xy` that certifies
/// entanglement. Grid points run in parallel.
pub fn boundary_scan(v_z_grid: &[f64], eff: AnalyzerEfficiencies, opts: ScanOptions) -> Result<Vec<BoundaryPoint>> {
    for &v in v_z_grid {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param("v_z", v, "grid values must lie in [0, 1]"));
        }
    }
    if opts.resolution.is_nan() || opts.resolution <= 0.0 {
        return Err(Error::param("resolution", opts.resolution, "must be positive"));
    }
    v_z_grid.par_iter().map(|&v| threshold_at(v, eff, &opts)).collect()
}

/// Columns `v_z,v_xy_threshold,margin,iterations`; a missing threshold is
/// written as `nan`.
pub fn write_boundary_csv<W: Write>(points: &[BoundaryPoint], mut out: W) -> Result<()> {
    writeln!(out, "v_z,v_xy_threshold,margin,iterations")?;
    for p in points {
        let th = p.threshold.map_or("nan".to_string(), |v| v.to_string());
        writeln!(out, "{},{},{:e},{}", p.v_z, th, p.margin, p.iterations)?;
    }
    Ok(())
}

/// `|Φ⟩ = (|HE⟩ + |VL⟩)/√2` mixed with white noise: `p |Φ⟩⟨Φ| + (1-p) I/4`.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", p, "mixing weight must lie in [0, 1]"));
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); 4];
    psi[0] = c(1.0, 0.0);
    psi[3] = c(1.0, 0.0);
    let phi = DensityMatrix::pure(2, 2, &psi)?;
    DensityMatrix::mixture(&[(p, &phi), (1.0 - p, &DensityMatrix::maximally_mixed(2, 2))])
}
