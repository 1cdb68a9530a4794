//! Hybrid polarization/time-bin states, the depolarization channel and the
//! entanglement visibilities.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::measurement::{alice_povm, alice_projectors_xy, BobPovm};
use crate::quantum::{c, pauli_x, pauli_y, pauli_z, CMatrix, DensityMatrix, HermitianOperator};
use crate::{Error, Result};

/// Transmission of the polarizer that erases the which-path polarization in
/// the converter.
pub const CONVERTER_POLARIZER_THROUGHPUT: f64 = 0.5;
/// Total transmission of the polarization to time-bin converter, including
/// fibre coupling.
pub const CONVERTER_TOTAL_TRANSMISSION: f64 = 0.24;

/// `(|H>|E> + |V>|L>)/√2` in the basis `{H,V} ⊗ {E,L}`.
///
/// The converter relabeling ([`pol_to_timebin_map`]) sends `H ↦ L`, which
/// would pair `H` with `L` instead; all states here use the `H–E` pairing.
pub fn hybrid_bell_state() -> DensityMatrix {
    let mut psi = vec![c(0.0, 0.0); 4];
    psi[0] = c(1.0, 0.0);
    psi[3] = c(1.0, 0.0);
    DensityMatrix::pure(2, 2, &psi).expect("valid state")
}

/// `<A ⊗ B>` for single-qubit matrices `a`, `b` on a 2×2 state.
pub fn correlation(rho: &DensityMatrix, a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let obs = HermitianOperator::single(a.clone())?.tensor(&HermitianOperator::single(b.clone())?);
    rho.expectation(&obs)
}

/// Extend Bob's qubit by a "no photon" level. The photon arrives with
/// probability `arrival`; otherwise Alice keeps her reduced state and Bob
/// holds `|∅>`.
pub fn embed_2x3(rho22: &DensityMatrix, arrival: f64) -> Result<DensityMatrix> {
    if rho22.dims() != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho22.dim(),
        });
    }
    if !(0.0..=1.0).contains(&arrival) {
        return Err(Error::param("arrival", arrival, "probability must lie in [0, 1]"));
    }
    let src = rho22.matrix();
    let alice = rho22.alice_marginal();
    let mut m = CMatrix::zeros(6, 6);
    for a in 0..2 {
        for a2 in 0..2 {
            m[(a * 3, a2 * 3)] = alice[(a, a2)] * (1.0 - arrival);
            for b in 0..2 {
                for b2 in 0..2 {
                    m[(a * 3 + b + 1, a2 * 3 + b2 + 1)] = src[(a * 2 + b, a2 * 2 + b2)] * arrival;
                }
            }
        }
    }
    DensityMatrix::from_matrix(2, 3, m)
}

/// Bring a 2×2 state into the 2×3 space (photon always arrives); 2×3 states
/// pass through.
pub fn as_2x3(rho: &DensityMatrix) -> Result<DensityMatrix> {
    match rho.dims() {
        (2, 3) => Ok(rho.clone()),
        (2, 2) => embed_2x3(rho, 1.0),
        (a, b) => Err(Error::DimensionMismatch {
            expected: 6,
            found: a * b,
        }),
    }
}

/// A time-bin qubit produced by the converter, with its deterministic
/// throughput.
#[derive(Debug, Clone)]
pub struct ConvertedQubit {
    /// State in the `{E, L}` basis.
    pub state: DensityMatrix,
    pub throughput: f64,
}

/// Converter map `|H> ↦ |L>`, `|V> ↦ |E>` on a single polarization qubit,
/// at the cost of the 50 % polarizer loss.
pub fn pol_to_timebin_map(pol: &DensityMatrix) -> Result<ConvertedQubit> {
    if pol.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: pol.dim(),
        });
    }
    // {H, V} -> {E, L} with H -> L (index 1) and V -> E (index 0).
    let swap = pauli_x();
    let m = &swap * pol.matrix() * &swap;
    Ok(ConvertedQubit {
        state: DensityMatrix::from_matrix(2, 1, m)?,
        throughput: CONVERTER_POLARIZER_THROUGHPUT,
    })
}

/// Pauli-channel probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizationParams {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl DepolarizationParams {
    pub fn new(p_x: f64, p_y: f64, p_z: f64) -> Result<Self> {
        for (name, p) in [("p_x", p_x), ("p_y", p_y), ("p_z", p_z)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, p, "probability must lie in [0, 1]"));
            }
        }
        let total = p_x + p_y + p_z;
        if total > 1.0 + 1e-15 {
            return Err(Error::param("p_x + p_y + p_z", total, "must not exceed 1"));
        }
        Ok(Self { p_x, p_y, p_z })
    }

    /// `p_x = p_y = p_xy`.
    pub fn unbiased(p_xy: f64, p_z: f64) -> Result<Self> {
        Self::new(p_xy, p_xy, p_z)
    }

    /// Unbiased parameters that reproduce the given visibilities under
    /// `V_z = 1 - 4 p_xy`, `V_xy = 1 - 2 (p_xy + p_z)`.
    pub fn from_visibilities(v: VisibilityPair) -> Result<Self> {
        let p_xy = (1.0 - v.v_z) / 4.0;
        let p_z = (1.0 - v.v_xy) / 2.0 - p_xy;
        Self::unbiased(p_xy, p_z)
    }

    pub fn total(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }

    /// Predicted `(V_z, V_xy)` for the hybrid state.
    pub fn predicted_visibilities(&self) -> VisibilityPair {
        VisibilityPair {
            v_z: 1.0 - 2.0 * (self.p_x + self.p_y),
            v_xy: 1.0 - 2.0 * (self.p_y + self.p_z),
        }
    }
}

/// Which qubit the channel acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelTarget {
    #[default]
    TimeBin,
    Polarization,
}

/// `(1 - Σp) ρ + Σ_j p_j (1 ⊗ σ_j) ρ (1 ⊗ σ_j)` on a 2×2 state.
pub fn depolarize(rho: &DensityMatrix, p: DepolarizationParams) -> Result<DensityMatrix> {
    depolarize_on(rho, p, ChannelTarget::TimeBin)
}

pub fn depolarize_on(
    rho: &DensityMatrix,
    p: DepolarizationParams,
    target: ChannelTarget,
) -> Result<DensityMatrix> {
    let p = DepolarizationParams::new(p.p_x, p.p_y, p.p_z)?;
    if rho.dims() != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let id = CMatrix::identity(2, 2);
    let lift = |s: CMatrix| match target {
        ChannelTarget::TimeBin => id.kronecker(&s),
        ChannelTarget::Polarization => s.kronecker(&id),
    };
    let src = rho.matrix();
    let mut out = src.map(|z| z * (1.0 - p.total()));
    for (pj, s) in [(p.p_x, pauli_x()), (p.p_y, pauli_y()), (p.p_z, pauli_z())] {
        if pj == 0.0 {
            continue;
        }
        let k = lift(s);
        out += (&k * src * &k).map(|z| z * pj);
    }
    DensityMatrix::from_matrix(2, 2, out)
}

/// Entanglement visibilities in the computational (`v_z`) and superposition
/// (`v_xy`) bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPair {
    pub v_z: f64,
    pub v_xy: f64,
}

impl VisibilityPair {
    pub fn new(v_z: f64, v_xy: f64) -> Result<Self> {
        for (name, v) in [("v_z", v_z), ("v_xy", v_xy)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::param(name, v, "visibility must lie in [-1, 1]"));
            }
        }
        Ok(Self { v_z, v_xy })
    }

    /// Values measured with the multimode analyzer.
    pub fn measured() -> Self {
        Self {
            v_z: 0.952,
            v_xy: 0.804,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZVisibility {
    /// Conditioned on Bob's early bin.
    pub v_plus: f64,
    /// Conditioned on Bob's late bin.
    pub v_minus: f64,
    pub v_z: f64,
}

fn coincidence(rho: &DensityMatrix, alice: &HermitianOperator, bob: &HermitianOperator) -> Result<f64> {
    rho.expectation(&alice.tensor(bob))
}

fn contrast(same: f64, other: f64, what: &'static str) -> Result<f64> {
    let den = same + other;
    if den <= 1e-300 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok((same - other) / den)
}

/// `V_{+z} = (N_HE - N_VE)/(N_HE + N_VE)`, `V_{-z} = (N_VL - N_HL)/(N_VL + N_HL)`
/// and their mean, from expected coincidence rates.
pub fn visibility_z(rho: &DensityMatrix, bob: &BobPovm) -> Result<ZVisibility> {
    let rho = as_2x3(rho)?;
    let alice = alice_povm();
    let n_he = coincidence(&rho, &alice.h, &bob.early)?;
    let n_ve = coincidence(&rho, &alice.v, &bob.early)?;
    let n_vl = coincidence(&rho, &alice.v, &bob.late)?;
    let n_hl = coincidence(&rho, &alice.h, &bob.late)?;
    let v_plus = contrast(n_he, n_ve, "V_+z (no early-bin coincidences)")?;
    let v_minus = contrast(n_vl, n_hl, "V_-z (no late-bin coincidences)")?;
    Ok(ZVisibility {
        v_plus,
        v_minus,
        v_z: 0.5 * (v_plus + v_minus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XyVisibility {
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_xy: f64,
    /// Phase of the fringe maximum of the `+` branch.
    pub fitted_phase: f64,
    /// Largest fit residual over both branches.
    pub max_residual: f64,
}

/// Scan Alice's phase `φ'` over `phase_grid` with Bob in the middle bin and
/// fit `A + B cos(φ' - φ0)` to the coincidence rates of each Alice output.
pub fn visibility_xy(rho: &DensityMatrix, bob: &BobPovm, phase_grid: &[f64]) -> Result<XyVisibility> {
    check_phase_grid(phase_grid)?;
    let rho = as_2x3(rho)?;
    let mut plus = Vec::with_capacity(phase_grid.len());
    let mut minus = Vec::with_capacity(phase_grid.len());
    for &phi in phase_grid {
        let (p, m) = alice_projectors_xy(phi);
        plus.push(coincidence(&rho, &p, &bob.middle)?);
        minus.push(coincidence(&rho, &m, &bob.middle)?);
    }
    let fp = fit_sinusoid(phase_grid, &plus)?;
    let fm = fit_sinusoid(phase_grid, &minus)?;
    let (v_plus, v_minus) = (fp.visibility(), fm.visibility());
    Ok(XyVisibility {
        v_plus,
        v_minus,
        v_xy: 0.5 * (v_plus + v_minus),
        fitted_phase: fp.phase,
        max_residual: fp.max_residual.max(fm.max_residual),
    })
}

/// Uniform grid of `n` phases on `[0, 2π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

fn check_phase_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 8 {
        return Err(Error::FitDegenerate(format!(
            "phase grid has {} points, need at least 8",
            grid.len()
        )));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // A uniform grid of n points with spacing h covers n·h of phase.
    let n = grid.len() as f64;
    let coverage = (hi - lo) * n / (n - 1.0);
    if coverage < 2.0 * PI * (1.0 - 1e-9) {
        return Err(Error::FitDegenerate(format!(
            "phase grid covers {coverage} rad, need 2π"
        )));
    }
    Ok(())
}

/// Result of the linear least-squares fit `y = A + B cos(x - φ0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub max_residual: f64,
}

impl SinusoidFit {
    pub fn visibility(&self) -> f64 {
        self.amplitude / self.offset
    }
}

/// Least squares on the regressors `(1, cos x, sin x)`; the model is linear
/// in them, so the fit is closed-form.
pub fn fit_sinusoid(x: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::FitDegenerate("need at least three samples".into()));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = Vector3::new(1.0, xi.cos(), xi.sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let sol = ata
        .cholesky()
        .ok_or_else(|| Error::FitDegenerate("singular design matrix".into()))?
        .solve(&aty);
    let (a, bc, bs) = (sol[0], sol[1], sol[2]);
    if a <= 0.0 {
        return Err(Error::FitDegenerate(format!("non-positive offset {a}")));
    }
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - (a + bc * xi.cos() + bs * xi.sin())).abs())
        .fold(0.0, f64::max);
    Ok(SinusoidFit {
        offset: a,
        amplitude: bc.hypot(bs),
        phase: bs.atan2(bc),
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{bob_povm, AnalyzerEfficiencies};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_state() -> DensityMatrix {
        depolarize(&hybrid_bell_state(), DepolarizationParams::unbiased(0.012, 0.086).unwrap()).unwrap()
    }

    fn ideal_bob() -> BobPovm {
        bob_povm(AnalyzerEfficiencies::ideal()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = CMatrix::from_fn(4, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        DensityMatrix::from_matrix(2, 2, m.map(|z| z / tr)).unwrap()
    }

    #[test]
    fn hybrid_state_basics() {
        let rho = hybrid_bell_state();
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        assert!((correlation(&rho, &pauli_z(), &pauli_z()).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&rho, &pauli_x(), &pauli_x()).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&rho, &pauli_y(), &pauli_y()).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn embedding() {
        let rho = hybrid_bell_state();
        let full = embed_2x3(&rho, 1.0).unwrap();
        for a in 0..2 {
            assert_eq!(full.matrix()[(a * 3, a * 3)], c(0.0, 0.0));
        }
        let none = embed_2x3(&rho, 0.0).unwrap();
        assert!((none.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((none.matrix()[(3, 3)].re - 0.5).abs() < 1e-15);
        let alice = none.alice_marginal();
        assert!((alice - rho.alice_marginal()).iter().all(|z| z.norm() < 1e-15));

        let half = embed_2x3(&rho, 0.5).unwrap();
        assert!((half.trace() - 1.0).abs() < 1e-15);
        let vac = half.matrix()[(0, 0)].re + half.matrix()[(3, 3)].re;
        assert!((vac - 0.5).abs() < 1e-15);
        assert!(embed_2x3(&rho, 1.5).is_err());
    }

    #[test]
    fn converter_map() {
        let h = DensityMatrix::from_matrix(2, 1, crate::quantum::real_matrix(2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let out = pol_to_timebin_map(&h).unwrap();
        // |L><L| is index 1 in {E, L}.
        assert_eq!(out.state.matrix()[(1, 1)], c(1.0, 0.0));
        assert_eq!(out.throughput, 0.5);

        let v = DensityMatrix::from_matrix(2, 1, crate::quantum::real_matrix(2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(pol_to_timebin_map(&v).unwrap().state.matrix()[(0, 0)], c(1.0, 0.0));

        let d = DensityMatrix::pure(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let out = pol_to_timebin_map(&d).unwrap();
        assert!((out.state.matrix() - d.matrix()).iter().all(|z| z.norm() < 1e-15));
        assert_eq!(CONVERTER_TOTAL_TRANSMISSION, 0.24);
    }

    #[test]
    fn converter_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = CMatrix::from_fn(2, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m = &g * g.adjoint();
            let tr = m.trace().re;
            let rho = DensityMatrix::from_matrix(2, 1, m.map(|z| z / tr)).unwrap();
            let out = pol_to_timebin_map(&rho).unwrap().state;
            assert!((out.purity() - rho.purity()).abs() < 1e-15);
            let (a, b) = (rho.operator().eig().unwrap().values, out.operator().eig().unwrap().values);
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_channel() {
        let rho = hybrid_bell_state();
        let out = depolarize(&rho, DepolarizationParams::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn measured_visibilities_from_noise_model() {
        let rho = example_state();
        let vz = correlation(&rho, &pauli_z(), &pauli_z()).unwrap();
        let vxy = correlation(&rho, &pauli_x(), &pauli_x()).unwrap();
        assert!((vz - 0.952).abs() < 1e-12);
        assert!((vxy - 0.804).abs() < 1e-12);
        let back = DepolarizationParams::from_visibilities(VisibilityPair::measured()).unwrap();
        assert!((back.p_x - 0.012).abs() < 1e-15 && (back.p_z - 0.086).abs() < 1e-15);
    }

    #[test]
    fn correlation_scaling_all_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cases = vec![(0.25, 0.25, 0.25)];
        for _ in 0..20 {
            let a: f64 = rng.random_range(0.0..0.33);
            let b: f64 = rng.random_range(0.0..0.33);
            let d: f64 = rng.random_range(0.0..0.33);
            cases.push((a, b, d));
        }
        let rho = hybrid_bell_state();
        for (px, py, pz) in cases {
            let p = DepolarizationParams::new(px, py, pz).unwrap();
            let out = depolarize(&rho, p).unwrap();
            let sum = px + py + pz;
            for (k, s, pk) in [(0, pauli_x(), px), (1, pauli_y(), py), (2, pauli_z(), pz)] {
                let before = correlation(&rho, &s, &s).unwrap();
                let after = correlation(&out, &s, &s).unwrap();
                let factor = 1.0 - 2.0 * (sum - pk);
                assert!((after - factor * before).abs() < 1e-12, "axis {k}");
            }
        }
    }

    #[test]
    fn channel_is_trace_and_positivity_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..100 {
            let rho = random_state(&mut rng);
            let (px, py) = (rng.random_range(0.0..0.33), rng.random_range(0.0..0.33));
            let pz = rng.random_range(0.0..0.33);
            let target = if i % 2 == 0 { ChannelTarget::TimeBin } else { ChannelTarget::Polarization };
            let out = depolarize_on(&rho, DepolarizationParams::new(px, py, pz).unwrap(), target).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-12);
            assert!(out.operator().min_eigenvalue().unwrap() >= -1e-12);
        }
    }

    #[test]
    fn invalid_probabilities() {
        assert!(DepolarizationParams::new(0.5, 0.4, 0.3).is_err());
        assert!(DepolarizationParams::new(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn z_visibility() {
        let bob = ideal_bob();
        assert!((visibility_z(&hybrid_bell_state(), &bob).unwrap().v_z - 1.0).abs() < 1e-15);
        let v = visibility_z(&example_state(), &bob).unwrap();
        assert!((v.v_z - 0.952).abs() < 1e-9);
        let mixed = DensityMatrix::maximally_mixed(2, 3);
        let v = visibility_z(&mixed, &bob).unwrap();
        assert_eq!((v.v_plus, v.v_minus, v.v_z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn z_visibility_zero_coincidences() {
        let bob = bob_povm(AnalyzerEfficiencies::new(0.0, 0.0).unwrap()).unwrap();
        assert!(matches!(
            visibility_z(&hybrid_bell_state(), &bob),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn xy_visibility() {
        let bob = ideal_bob();
        let grid = phase_grid(16);
        let v = visibility_xy(&hybrid_bell_state(), &bob, &grid).unwrap();
        assert!((v.v_xy - 1.0).abs() < 1e-12);
        assert!(v.max_residual <= 1e-10);
        let v = visibility_xy(&example_state(), &bob, &grid).unwrap();
        assert!((v.v_xy - 0.804).abs() < 1e-6);
        assert!(matches!(
            visibility_xy(&example_state(), &bob, &phase_grid(4)),
            Err(Error::FitDegenerate(_))
        ));
        let half: Vec<f64> = (0..16).map(|k| PI * k as f64 / 16.0).collect();
        assert!(visibility_xy(&example_state(), &bob, &half).is_err());
    }

    #[test]
    fn xy_visibility_ignores_grid_offset() {
        let bob = ideal_bob();
        let grid = phase_grid(24);
        let base = visibility_xy(&example_state(), &bob, &grid).unwrap();
        for offset in [0.3, 1.7, -2.2] {
            let shifted: Vec<f64> = grid.iter().map(|g| g + offset).collect();
            let v = visibility_xy(&example_state(), &bob, &shifted).unwrap();
            assert!((v.v_plus - base.v_plus).abs() < 1e-10);
            assert!((v.v_minus - base.v_minus).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_visibilities_under_unbiased_channel() {
        let bob = ideal_bob();
        let grid = phase_grid(32);
        for &(pxy, pz) in &[(0.0, 0.0), (0.012, 0.086), (0.05, 0.1), (0.2, 0.3)] {
            let p = DepolarizationParams::unbiased(pxy, pz).unwrap();
            let rho = depolarize(&hybrid_bell_state(), p).unwrap();
            let vz = visibility_z(&rho, &bob).unwrap().v_z;
            let vxy = visibility_xy(&rho, &bob, &grid).unwrap().v_xy;
            assert!((vz - (1.0 - 4.0 * pxy)).abs() < 1e-12);
            assert!((vxy - (1.0 - 2.0 * (pxy + pz))).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_fit_recovers_parameters() {
        let x = phase_grid(12);
        let y: Vec<f64> = x.iter().map(|t| 2.0 + 0.7 * (t - 0.4).cos()).collect();
        let f = fit_sinusoid(&x, &y).unwrap();
        assert!((f.offset - 2.0).abs() < 1e-12);
        assert!((f.amplitude - 0.7).abs() < 1e-12);
        assert!((f.phase - 0.4).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!(fit_sinusoid(&x, &neg).is_err());
    }
}
