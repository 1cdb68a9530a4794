//! Scenario sweeps built from the lower-level modules: visibility and
//! expectation value against angle of incidence, and the long-term
//! stability series.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{combined_expectation, DriftModel};
use crate::geometry::InterferometerGeometry;
use crate::states::VisibilityPair;
use crate::waveoptics::{
    analyzer_beam, fringe_visibility, make_speckle, propagate, shift_and_tilt, GridSpec, ScalarField,
};
use crate::{Error, Result};

/// Peak photon-collection efficiency at normal incidence.
pub const PEAK_COLLECTION: f64 = 0.87;

/// Angle at which the collection efficiency reaches zero (0.24°).
pub const COLLECTION_CUTOFF: f64 = 0.24 * PI / 180.0;

/// Input beam for a wave-optics sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// Gaussian matched to the geometry's beam width.
    Gaussian,
    /// Seeded Hermite-Gauss superposition with `n + m < mode_count`.
    Speckle { mode_count: usize, seed: u64 },
}

impl FieldSpec {
    pub fn build(&self, geom: &InterferometerGeometry, spec: &GridSpec) -> Result<ScalarField> {
        match *self {
            FieldSpec::Gaussian => analyzer_beam(geom, spec),
            FieldSpec::Speckle { mode_count, seed } => {
                make_speckle(mode_count, seed, spec.n, spec.extent, spec.wavelength)
            }
        }
    }
}

/// `n` evenly spaced angles from `-max` to `max` inclusive.
pub fn symmetric_range(max: f64, n: usize) -> Result<Vec<f64>> {
    if !(max.is_finite() && max >= 0.0) {
        return Err(Error::param("alpha_max", max, "must be finite and non-negative"));
    }
    if n < 2 {
        return Err(Error::param("points", n as f64, "need at least 2"));
    }
    let step = 2.0 * max / (n - 1) as f64;
    Ok((0..n).map(|k| -max + step * k as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub alpha: f64,
    pub visibility: f64,
    /// Closed-form visibility at the same angle (relay-free law or `V0`).
    pub ray_model: f64,
}

/// Fringe visibility of a propagated field against angle of incidence.
pub fn aoi_sweep(
    geom: &InterferometerGeometry,
    field: FieldSpec,
    alphas: &[f64],
    relay: bool,
    grid: &GridSpec,
) -> Result<Vec<VisibilityPoint>> {
    geom.validate()?;
    let input = field.build(geom, grid)?;
    // The long-arm propagation does not depend on the angle; do it once.
    let long_base = if relay { None } else { Some(propagate(&input, geom.delta_l0)?) };
    alphas
        .par_iter()
        .map(|&alpha| {
            let short = shift_and_tilt(&input, 0.0, alpha)?;
            let (visibility, ray_model) = match &long_base {
                None => (fringe_visibility(&short, &short, geom.v0)?, geom.v0),
                Some(base) => {
                    let long = shift_and_tilt(base, geom.lateral_offset(alpha)?, alpha)?;
                    (fringe_visibility(&short, &long, geom.v0)?, geom.visibility(alpha)?)
                }
            };
            Ok(VisibilityPoint {
                alpha,
                visibility,
                ray_model,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationPoint {
    pub alpha: f64,
    /// Analyzer phase relative to the set point.
    pub phase: f64,
    pub expectation: f64,
}

/// `E(α)` for a superposition-basis joint projection with entanglement
/// visibility `v_xy`, analyzer set to `phase0` at normal incidence.
///
/// Without relay the analyzer phase follows the path difference and the
/// fringe contrast falls with the relay-free envelope normalized to 1 at
/// normal incidence. With relay both are frozen.
pub fn expectation_vs_aoi(
    geom: &InterferometerGeometry,
    v_xy: f64,
    alphas: &[f64],
    relay: bool,
    phase0: f64,
) -> Result<Vec<ExpectationPoint>> {
    geom.validate()?;
    if !(0.0..=1.0).contains(&v_xy) {
        return Err(Error::param("v_xy", v_xy, "must lie in [0, 1]"));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let (phase, envelope) = if relay {
                (0.0, 1.0)
            } else {
                (geom.phase_shift(alpha)?, geom.overlap_envelope(alpha)?)
            };
            Ok(ExpectationPoint {
                alpha,
                phase,
                expectation: envelope * v_xy * (phase0 + phase).cos(),
            })
        })
        .collect()
}

pub fn mean_expectation(curve: &[ExpectationPoint]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    curve.iter().map(|p| p.expectation).sum::<f64>() / curve.len() as f64
}

/// AOI producing a π phase shift as quoted for the experiment.
pub const REPORTED_ANGLE_PER_PI: f64 = 349e-9;

/// Phase response of the relay-free analyzer around `alpha0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSensitivity {
    pub alpha0: f64,
    /// `d(path difference)/dα` from the closed form.
    pub slope: f64,
    /// Same slope from a central difference of the phase.
    pub slope_numeric: f64,
    /// Angle change for a π shift, from `slope_numeric`.
    pub angle_per_pi: f64,
    /// Relative deviation of `angle_per_pi` from [`REPORTED_ANGLE_PER_PI`].
    pub deviation_from_reported: f64,
    /// `|Δφ(1.75 µrad)| / |Δφ(349 nrad)|`.
    pub five_pi_ratio: f64,
}

pub fn phase_sensitivity(geom: &InterferometerGeometry, alpha0: f64) -> Result<PhaseSensitivity> {
    geom.validate()?;
    let shift = |a: f64| -> Result<f64> { Ok(geom.phase_shift(alpha0 + a)? - geom.phase_shift(alpha0)?) };
    let h = 1e-8;
    let dphi = (shift(h)? - shift(-h)?) / (2.0 * h);
    let slope_numeric = dphi * geom.wavelength / (2.0 * PI);
    let angle_per_pi = PI / dphi.abs();
    let long = shift(1.75e-6)?.abs();
    let short = shift(REPORTED_ANGLE_PER_PI)?.abs();
    if short == 0.0 {
        return Err(Error::ZeroDenominator("phase shift over 349 nrad"));
    }
    Ok(PhaseSensitivity {
        alpha0,
        slope: geom.path_difference_slope(alpha0)?,
        slope_numeric,
        angle_per_pi,
        deviation_from_reported: angle_per_pi / REPORTED_ANGLE_PER_PI - 1.0,
        five_pi_ratio: long / short,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementPoint {
    pub alpha: f64,
    pub v_z: f64,
    pub v_xy: f64,
}

/// Entanglement visibilities against angle. The early/late basis does not
/// interfere and is unaffected; the superposition basis inherits the
/// analyzer's normalized fringe envelope unless the relay is present.
pub fn entanglement_visibility_vs_aoi(
    geom: &InterferometerGeometry,
    v: VisibilityPair,
    alphas: &[f64],
    relay: bool,
) -> Result<Vec<EntanglementPoint>> {
    alphas
        .iter()
        .map(|&alpha| {
            let envelope = if relay { 1.0 } else { geom.overlap_envelope(alpha)? };
            Ok(EntanglementPoint {
                alpha,
                v_z: v.v_z,
                v_xy: v.v_xy * envelope,
            })
        })
        .collect()
}

/// Photon-collection efficiency against angle: a raised cosine from
/// [`PEAK_COLLECTION`] down to zero at `±alpha_max`, zero beyond. This is a
/// surrogate shape; it scales rates only.
pub fn collection_efficiency(alpha: f64, alpha_max: f64) -> Result<f64> {
    if !(alpha_max.is_finite() && alpha_max > 0.0) {
        return Err(Error::param("alpha_max", alpha_max, "must be positive"));
    }
    if !alpha.is_finite() {
        return Err(Error::AngleDomain { alpha });
    }
    if alpha.abs() >= alpha_max {
        return Ok(0.0);
    }
    Ok(PEAK_COLLECTION * 0.5 * (1.0 + (PI * alpha / alpha_max).cos()))
}

/// Count statistics for [`stability_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityNoise {
    Noiseless,
    /// Poisson counts at `rate` coincidences/s, split evenly between the
    /// two polarization settings.
    Poisson { rate: f64, seed: u64 },
}

/// Default coincidence rate for the long-term stability run (1/s).
pub const STABILITY_RATE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub t: f64,
    pub phase: f64,
    pub e1: f64,
    pub e2: f64,
    pub combined: f64,
}

/// Expectation values for the polarization settings `φ'` and `φ' + π/2`
/// against a drifting analyzer, one point per bucket centre.
pub fn stability_series(
    v_xy: f64,
    drift: DriftModel,
    duration: f64,
    bucket: f64,
    noise: StabilityNoise,
) -> Result<Vec<StabilityPoint>> {
    if !(0.0..=1.0).contains(&v_xy) {
        return Err(Error::param("v_xy", v_xy, "must lie in [0, 1]"));
    }
    for (name, v) in [("duration", duration), ("bucket", bucket)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, v, "must be positive"));
        }
    }
    let mut sampler = match noise {
        StabilityNoise::Noiseless => None,
        StabilityNoise::Poisson { rate, seed } => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::param("rate", rate, "must be positive"));
            }
            Some((0.5 * rate * bucket, ChaCha8Rng::seed_from_u64(seed)))
        }
    };
    let n = (duration / bucket).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = (k as f64 + 0.5) * bucket;
        let phase = drift.phase(t);
        let (mut e1, mut e2) = (v_xy * phase.cos(), v_xy * phase.sin());
        if let Some((mean, rng)) = sampler.as_mut() {
            e1 = sampled_expectation(e1, *mean, rng)?;
            e2 = sampled_expectation(e2, *mean, rng)?;
        }
        out.push(StabilityPoint {
            t,
            phase,
            e1,
            e2,
            combined: combined_expectation(e1, e2),
        });
    }
    Ok(out)
}

fn sampled_expectation(e: f64, total: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut draw = |m: f64| -> Result<f64> {
        if m <= 0.0 {
            return Ok(0.0);
        }
        Ok(Poisson::new(m)
            .map_err(|_| Error::param("poisson mean", m, "invalid"))?
            .sample(rng))
    };
    let plus = draw(0.5 * total * (1.0 + e))?;
    let minus = draw(0.5 * total * (1.0 - e))?;
    if plus + minus == 0.0 {
        return Err(Error::ZeroDenominator("stability bucket with no counts"));
    }
    Ok((plus - minus) / (plus + minus))
}

/// Write any of the curve types as CSV with the given header row.
pub fn write_rows<W: Write, T>(
    mut out: W,
    header: &str,
    rows: &[T],
    fields: impl Fn(&T) -> Vec<f64>,
) -> Result<()> {
    writeln!(out, "{header}")?;
    for row in rows {
        let cells: Vec<String> = fields(row).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> InterferometerGeometry {
        InterferometerGeometry::reference()
    }

    #[test]
    fn gaussian_sweep_follows_closed_form() {
        let g = geom();
        let grid = GridSpec::for_geometry(&g);
        let alphas = [0.0, 0.5e-3, 1.0e-3, 1.5e-3, 2.0e-3];
        let curve = aoi_sweep(&g, FieldSpec::Gaussian, &alphas, false, &grid).unwrap();
        for p in &curve {
            assert!((p.visibility - p.ray_model).abs() < 1e-2, "{p:?}");
        }
        let flat = aoi_sweep(&g, FieldSpec::Gaussian, &alphas, true, &grid).unwrap();
        assert!(flat.iter().all(|p| (p.visibility - g.v0).abs() < 1e-3));
    }

    #[test]
    fn speckle_with_relay_is_flat_for_any_seed() {
        let g = geom();
        let grid = GridSpec::new(256, 16.0 * g.sigma, g.wavelength).unwrap();
        let alphas = symmetric_range(4.0e-3, 5).unwrap();
        for seed in [1, 9] {
            let field = FieldSpec::Speckle { mode_count: 6, seed };
            let curve = aoi_sweep(&g, field, &alphas, true, &grid).unwrap();
            assert!(curve.iter().all(|p| (p.visibility - g.v0).abs() < 2e-2));
        }
    }

    #[test]
    fn relay_expectation_is_constant() {
        let g = geom();
        let alphas = symmetric_range(0.2_f64.to_radians(), 101).unwrap();
        let curve = expectation_vs_aoi(&g, 0.80, &alphas, true, 0.3).unwrap();
        let e0 = 0.80 * 0.3_f64.cos();
        assert!(curve.iter().all(|p| (p.expectation - e0).abs() < 1e-12));
    }

    #[test]
    fn free_expectation_averages_out() {
        let g = geom();
        // About 120 phase periods, sampled well above the fringe frequency.
        let span = 120.0 * 2.0 * g.angle_per_pi(0.0).unwrap();
        let alphas = symmetric_range(0.5 * span, 20_001).unwrap();
        let curve = expectation_vs_aoi(&g, 0.80, &alphas, false, 0.0).unwrap();
        assert!(mean_expectation(&curve).abs() < 0.02);
        assert!(curve.iter().all(|p| p.expectation.abs() <= 0.80 + 1e-12));
        let swing = curve.iter().map(|p| p.expectation).fold(f64::MIN, f64::max)
            - curve.iter().map(|p| p.expectation).fold(f64::MAX, f64::min);
        assert!(swing > 1.5);
    }

    #[test]
    fn phase_sensitivity_at_normal_incidence() {
        let p = phase_sensitivity(&geom(), 0.0).unwrap();
        assert!((p.slope + 1.2).abs() < 1e-12);
        assert!((p.slope_numeric + 1.2).abs() < 1e-6);
        assert!((p.angle_per_pi - 323.33333e-9).abs() < 1e-12);
        assert!((p.deviation_from_reported + 0.0735).abs() < 1e-3);
        assert!((p.five_pi_ratio - 5.014310841193722).abs() < 1e-6);
    }

    #[test]
    fn entanglement_visibility_levels() {
        let g = geom();
        let alphas = [0.0, 1.7e-3];
        let v = VisibilityPair::measured();
        let flat = entanglement_visibility_vs_aoi(&g, v, &alphas, true).unwrap();
        assert!(flat.iter().all(|p| p.v_z == 0.952 && p.v_xy == 0.804));
        let free = entanglement_visibility_vs_aoi(&g, v, &alphas, false).unwrap();
        assert!((free[1].v_xy - 0.804 * 0.7917420941576627).abs() < 1e-9);
    }

    #[test]
    fn collection_falloff() {
        assert_eq!(collection_efficiency(0.0, COLLECTION_CUTOFF).unwrap(), PEAK_COLLECTION);
        let half = collection_efficiency(0.5 * COLLECTION_CUTOFF, COLLECTION_CUTOFF).unwrap();
        assert!((half - 0.5 * PEAK_COLLECTION).abs() < 1e-12);
        assert_eq!(collection_efficiency(COLLECTION_CUTOFF, COLLECTION_CUTOFF).unwrap(), 0.0);
        assert!(collection_efficiency(0.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_combined_is_visibility() {
        let drift = DriftModel::Sinusoidal {
            phase0: 1.1,
            amplitude: 2.0,
            period: 700.0,
        };
        let s = stability_series(0.804, drift, 1800.0, 180.0, StabilityNoise::Noiseless).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|p| (p.combined - 0.804).abs() < 1e-15));
    }

    #[test]
    fn poisson_stability_run() {
        let drift = DriftModel::Linear {
            phase0: 0.2,
            rate: 0.5 * PI / 1800.0,
        };
        for seed in 0..20 {
            let noise = StabilityNoise::Poisson {
                rate: STABILITY_RATE,
                seed,
            };
            let s = stability_series(0.804, drift, 1800.0, 180.0, noise).unwrap();
            assert!(s.iter().all(|p| (p.combined - 0.804).abs() < 0.05 && p.combined > 0.65));
        }
        let noise = StabilityNoise::Poisson { rate: 100.0, seed: 4 };
        let a = stability_series(0.804, drift, 1800.0, 180.0, noise).unwrap();
        let b = stability_series(0.804, drift, 1800.0, 180.0, noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let drift = DriftModel::Constant { phase: 0.0 };
        assert!(stability_series(1.2, drift, 10.0, 1.0, StabilityNoise::Noiseless).is_err());
        assert!(stability_series(0.8, drift, 10.0, 0.0, StabilityNoise::Noiseless).is_err());
        assert!(symmetric_range(1.0, 1).is_err());
        assert!(expectation_vs_aoi(&geom(), -0.1, &[0.0], true, 0.0).is_err());
    }
}
