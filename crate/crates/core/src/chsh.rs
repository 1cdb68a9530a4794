//! CHSH estimation from coincidence counts, including the drifting-phase
//! scan used when the analyzer phase cannot be set actively.
//!
//! The analyzer has a single output, so only the `+` outcome of the
//! superposition measurement is observed. A drifting phase sweeps that
//! outcome through the fringe; the middle-bin counts at a second time `t2`
//! stand in for the missing `−` outcome at `t1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measurement::{alice_projectors_xy, alice_projectors_xz, bob_povm_with_phase, AnalyzerEfficiencies};
use crate::quantum::{pauli_x, pauli_y, pauli_z, CMatrix, DensityMatrix, HermitianOperator};
use crate::states::{as_2x3, correlation, VisibilityPair};
use crate::{Error, Result};

/// Coincidences of one setting pair `(A_i, B_j)`, indexed by the signs of
/// Alice's and Bob's outcomes. Expected (non-integer) counts are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

impl Counts {
    pub fn new(pp: f64, mm: f64, pm: f64, mp: f64) -> Result<Self> {
        for (name, v) in [("N++", pp), ("N--", mm), ("N+-", pm), ("N-+", mp)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, v, "counts must be non-negative"));
            }
        }
        Ok(Self { pp, mm, pm, mp })
    }

    pub fn total(&self) -> f64 {
        self.pp + self.mm + self.pm + self.mp
    }

    /// `(N++ + N-- - N+- - N-+) / (N++ + N-- + N+- + N-+)`.
    pub fn expectation(&self) -> Result<f64> {
        let den = self.total();
        if den <= 0.0 {
            return Err(Error::ZeroDenominator("expectation value (no coincidences)"));
        }
        Ok((self.pp + self.mm - self.pm - self.mp) / den)
    }
}

/// Counts for the four setting pairs; `cells[i][j]` belongs to `(A_{i+1}, B_{j+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CountTable {
    pub cells: [[Counts; 2]; 2],
}

/// `E(A_i, B_j)` for 1-based setting indices.
pub fn expectation_from_counts(table: &CountTable, i: usize, j: usize) -> Result<f64> {
    if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
        return Err(Error::Usage(format!("setting index ({i}, {j}) out of range 1..=2")));
    }
    table.cells[i - 1][j - 1].expectation()
}

/// `|E11 - E12 + E21 + E22|`.
pub fn chsh_s(e11: f64, e12: f64, e21: f64, e22: f64) -> f64 {
    (e11 - e12 + e21 + e22).abs()
}

/// `√2 (V_z + V_xy)`.
pub fn s_theo(v: VisibilityPair) -> f64 {
    SQRT_2 * (v.v_z + v.v_xy)
}

/// `√(e1² + e2²)`, the drift-insensitive magnitude of two quadrature
/// expectation values.
pub fn combined_expectation(e1: f64, e2: f64) -> f64 {
    e1.hypot(e2)
}

/// Bob's superposition observable `σ_φ = cos φ σ_x + sin φ σ_y`.
pub fn sigma_phi(phi: f64) -> CMatrix {
    let (s, c) = phi.sin_cos();
    pauli_x().map(|z| z * c) + pauli_y().map(|z| z * s)
}

/// Alice's observables `σ_{z±x} = (σ_z ± σ_x)/√2`.
pub fn alice_observables() -> [CMatrix; 2] {
    let (z, x) = (pauli_z(), pauli_x());
    [
        (&z + &x).map(|v| v * FRAC_1_SQRT_2),
        (&z - &x).map(|v| v * FRAC_1_SQRT_2),
    ]
}

/// Phase of Bob's second setting that gives `S = √2 (V_z + V_xy)` for the
/// hybrid state: `σ_φ` at `φ = π`, i.e. `-σ_x`.
pub const B2_PHASE: f64 = PI;

/// `[E11, E12, E21, E22]` of a 2×2 state with `A_{1,2} = σ_{z±x}`,
/// `B_1 = σ_z`, `B_2 = σ_φ(b2_phase)`.
pub fn model_expectations(rho: &DensityMatrix, b2_phase: f64) -> Result<[f64; 4]> {
    let [a1, a2] = alice_observables();
    let (b1, b2) = (pauli_z(), sigma_phi(b2_phase));
    Ok([
        correlation(rho, &a1, &b1)?,
        correlation(rho, &a1, &b2)?,
        correlation(rho, &a2, &b1)?,
        correlation(rho, &a2, &b2)?,
    ])
}

/// Analyzer phase as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    Constant { phase: f64 },
    /// `phase0 + rate t`.
    Linear { phase0: f64, rate: f64 },
    /// `phase0 + amplitude sin(2π t / period)`.
    Sinusoidal { phase0: f64, amplitude: f64, period: f64 },
}

impl DriftModel {
    pub fn phase(&self, t: f64) -> f64 {
        match *self {
            DriftModel::Constant { phase } => phase,
            DriftModel::Linear { phase0, rate } => phase0 + rate * t,
            DriftModel::Sinusoidal {
                phase0,
                amplitude,
                period,
            } => phase0 + amplitude * (2.0 * PI * t / period).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            DriftModel::Constant { phase } => phase.is_finite(),
            DriftModel::Linear { phase0, rate } => phase0.is_finite() && rate.is_finite(),
            DriftModel::Sinusoidal {
                phase0,
                amplitude,
                period,
            } => {
                if period.is_nan() || period <= 0.0 {
                    return Err(Error::param("period", period, "must be positive"));
                }
                phase0.is_finite() && amplitude.is_finite() && period.is_finite()
            }
        };
        if !finite {
            return Err(Error::Usage("drift parameters must be finite".into()));
        }
        Ok(())
    }

    fn with_offset(self, offset: f64) -> Self {
        match self {
            DriftModel::Constant { phase } => DriftModel::Constant { phase: phase + offset },
            DriftModel::Linear { phase0, rate } => DriftModel::Linear {
                phase0: phase0 + offset,
                rate,
            },
            DriftModel::Sinusoidal {
                phase0,
                amplitude,
                period,
            } => DriftModel::Sinusoidal {
                phase0: phase0 + offset,
                amplitude,
                period,
            },
        }
    }
}

/// Alice's measurement during a scan; `+` goes to detector D1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceSetting {
    /// Bloch direction `cos θ ẑ + sin θ x̂`.
    Xz { theta: f64 },
    /// Equator direction at azimuth `phi`; `phi = 0` is D/A.
    Xy { phi: f64 },
}

impl AliceSetting {
    pub const A1: AliceSetting = AliceSetting::Xz { theta: PI / 4.0 };
    pub const A2: AliceSetting = AliceSetting::Xz { theta: -PI / 4.0 };

    fn projectors(&self) -> (HermitianOperator, HermitianOperator) {
        match *self {
            AliceSetting::Xz { theta } => alice_projectors_xz(theta),
            AliceSetting::Xy { phi } => alice_projectors_xy(phi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Expected counts.
    Noiseless,
    Poisson,
}

/// Parameters of one drifting-phase scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftScanConfig {
    /// Phase-averaged total coincidence rate over all six traces (1/s).
    pub rate: f64,
    /// Bucket width (s).
    pub bucket: f64,
    /// Scan length (s).
    pub duration: f64,
    pub drift: DriftModel,
    pub alice: AliceSetting,
    pub efficiencies: AnalyzerEfficiencies,
    pub noise: NoiseMode,
    /// Add a uniformly random offset, drawn from the seed, to the drift phase.
    pub random_start_phase: bool,
}

impl DriftScanConfig {
    /// One fringe period over a 4 s scan at 1000 coincidences/s in 0.5 s
    /// buckets, with Poisson noise and an unknown starting phase.
    pub fn experiment(alice: AliceSetting) -> Self {
        let duration = 4.0;
        Self {
            rate: 1000.0,
            bucket: 0.5,
            duration,
            drift: DriftModel::Linear {
                phase0: 0.0,
                rate: 2.0 * PI / duration,
            },
            alice,
            efficiencies: AnalyzerEfficiencies::default(),
            noise: NoiseMode::Poisson,
            random_start_phase: true,
        }
    }

    /// Noiseless linear drift of one period whose bucket centres fall on
    /// multiples of `2π / buckets`, so the fringe extrema are sampled.
    pub fn aligned_noiseless(alice: AliceSetting, buckets: usize) -> Self {
        let bucket = 0.5;
        let duration = bucket * buckets as f64;
        let rate = 2.0 * PI / duration;
        Self {
            rate: 1000.0,
            bucket,
            duration,
            drift: DriftModel::Linear {
                phase0: -0.5 * bucket * rate,
                rate,
            },
            alice,
            efficiencies: AnalyzerEfficiencies::default(),
            noise: NoiseMode::Noiseless,
            random_start_phase: false,
        }
    }

    pub fn bucket_count(&self) -> usize {
        (self.duration / self.bucket).round().max(1.0) as usize
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("rate", self.rate), ("bucket", self.bucket), ("duration", self.duration)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, v, "must be positive"));
            }
        }
        AnalyzerEfficiencies::new(self.efficiencies.eta_l, self.efficiencies.eta_s)?;
        self.drift.validate()
    }
}

/// Bob's temporal bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBin {
    Early = 0,
    Late = 1,
    Middle = 2,
}

/// Coincidence counts per bucket for Alice's two detectors and Bob's three
/// bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTrace {
    /// Bucket centres (s).
    pub times: Vec<f64>,
    /// Analyzer phase at the bucket centres.
    pub phases: Vec<f64>,
    /// `counts[detector][bin][bucket]`, detector 0 = D1 (`+`).
    pub counts: [[Vec<f64>; 3]; 2],
}

impl DriftTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, detector: usize, bin: TimeBin) -> &[f64] {
        &self.counts[detector][bin as usize]
    }

    /// `E(A, σ_z)` from early/late counts pooled over the whole trace;
    /// early is Bob's `+`.
    pub fn z_expectation(&self) -> Result<f64> {
        let sum = |d: usize, b: TimeBin| self.series(d, b).iter().sum::<f64>();
        Counts::new(
            sum(0, TimeBin::Early),
            sum(1, TimeBin::Late),
            sum(0, TimeBin::Late),
            sum(1, TimeBin::Early),
        )?
        .expectation()
    }

    /// Columns `t_s,phase_rad,d1_early,d1_late,d1_middle,d2_early,d2_late,d2_middle`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,phase_rad,d1_early,d1_late,d1_middle,d2_early,d2_late,d2_middle")?;
        for k in 0..self.len() {
            write!(out, "{},{}", self.times[k], self.phases[k])?;
            for d in 0..2 {
                for b in 0..3 {
                    write!(out, ",{}", self.counts[d][b][k])?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Simulate one scan. `seed` drives the Poisson draws and the optional
/// random start phase; noiseless scans without a random start ignore it.
pub fn simulate_drift_scan(rho: &DensityMatrix, cfg: &DriftScanConfig, seed: u64) -> Result<DriftTrace> {
    cfg.validate()?;
    let rho = as_2x3(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift = if cfg.random_start_phase {
        cfg.drift.with_offset(rng.random_range(0.0..2.0 * PI))
    } else {
        cfg.drift
    };
    let (plus, minus) = cfg.alice.projectors();
    let alice = [plus, minus];
    let alice_id = HermitianOperator::identity(2);

    // Normalization: the phase average of M_X is its diagonal part.
    let base = bob_povm_with_phase(cfg.efficiencies, 0.0)?;
    let mut avg_middle = base.middle.matrix().clone();
    avg_middle[(1, 2)] = num_complex::Complex64::new(0.0, 0.0);
    avg_middle[(2, 1)] = num_complex::Complex64::new(0.0, 0.0);
    let detected = base
        .early
        .add(&base.late)
        .add(&HermitianOperator::single(avg_middle)?);
    let p_ref = rho.expectation(&alice_id.tensor(&detected))?;
    if p_ref <= 0.0 {
        return Err(Error::ZeroDenominator("coincidence rate normalization"));
    }
    let scale = cfg.rate * cfg.bucket / p_ref;

    let n = cfg.bucket_count();
    let times: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * cfg.bucket).collect();
    let phases: Vec<f64> = times.iter().map(|&t| drift.phase(t)).collect();
    let mut counts: [[Vec<f64>; 3]; 2] = Default::default();
    for &phi in &phases {
        let bob = bob_povm_with_phase(cfg.efficiencies, phi)?;
        let bins = [&bob.early, &bob.late, &bob.middle];
        for (d, a) in alice.iter().enumerate() {
            for (b, m) in bins.iter().enumerate() {
                let mean = (scale * rho.expectation(&a.tensor(m))?).max(0.0);
                let value = match cfg.noise {
                    NoiseMode::Noiseless => mean,
                    NoiseMode::Poisson if mean > 0.0 => Poisson::new(mean)
                        .map_err(|_| Error::param("poisson mean", mean, "invalid"))?
                        .sample(&mut rng),
                    NoiseMode::Poisson => 0.0,
                };
                counts[d][b].push(value);
            }
        }
    }
    Ok(DriftTrace { times, phases, counts })
}

/// Expectation values for every `(t1, t2)` pair of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSurface {
    pub times: Vec<f64>,
    /// Row-major `E(t1, t2)`; `None` where no middle-bin counts exist.
    pub values: Vec<Option<f64>>,
    /// `(t1, t2)` bucket indices of the largest `|E|`.
    pub argmax: (usize, usize),
    /// Signed value at `argmax`.
    pub max_value: f64,
}

impl ExpectationSurface {
    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.n() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.max_value.abs()
    }

    /// Columns `t1_s,t2_s,E,defined`; undefined cells carry `E = 0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t1_s,t2_s,E,defined")?;
        for (i, t1) in self.times.iter().enumerate() {
            for (j, t2) in self.times.iter().enumerate() {
                match self.get(i, j) {
                    Some(e) => writeln!(out, "{t1},{t2},{e},1")?,
                    None => writeln!(out, "{t1},{t2},0,0")?,
                }
            }
        }
        Ok(())
    }
}

/// Middle-bin expectation surface. At `(t1, t2)` Bob's `+` outcome is the
/// middle bin at `t1` and his `−` outcome the middle bin at `t2`:
/// `E = (D1(t1) + D2(t2) - D1(t2) - D2(t1)) / (sum)`.
pub fn max_expectation_surface(trace: &DriftTrace) -> Result<ExpectationSurface> {
    if trace.is_empty() {
        return Err(Error::Usage("empty drift trace".into()));
    }
    let n = trace.len();
    let d1 = trace.series(0, TimeBin::Middle);
    let d2 = trace.series(1, TimeBin::Middle);
    let values: Vec<Option<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            Counts {
                pp: d1[i],
                mm: d2[j],
                pm: d1[j],
                mp: d2[i],
            }
            .expectation()
            .ok()
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        if let Some(e) = *v {
            if best.is_none_or(|(_, b)| e.abs() > b.abs()) {
                best = Some((k, e));
            }
        }
    }
    let (k, max_value) =
        best.ok_or(Error::ZeroDenominator("expectation surface (no middle-bin counts)"))?;
    Ok(ExpectationSurface {
        times: trace.times.clone(),
        values,
        argmax: (k / n, k % n),
        max_value,
    })
}

/// CHSH value extracted from one scan per Alice setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshEstimate {
    /// `[E11, E12, E21, E22]` with the surface maxima signed to maximize `S`.
    pub expectations: [f64; 4],
    pub s: f64,
}

/// Combine the `A1` and `A2` scans. The sign of a surface maximum is free
/// (swapping `t1` and `t2` flips it), so it is chosen to add constructively.
pub fn chsh_from_traces(a1: &DriftTrace, a2: &DriftTrace) -> Result<ChshEstimate> {
    let e11 = a1.z_expectation()?;
    let e21 = a2.z_expectation()?;
    let m12 = max_expectation_surface(a1)?.max_abs();
    let m22 = max_expectation_surface(a2)?.max_abs();
    let sign = if e11 + e21 >= 0.0 { 1.0 } else { -1.0 };
    let e12 = -sign * m12;
    let e22 = sign * m22;
    Ok(ChshEstimate {
        expectations: [e11, e12, e21, e22],
        s: chsh_s(e11, e12, e21, e22),
    })
}

/// Run the `A1` and `A2` scans with seeds derived from `seed` and estimate
/// `S`.
pub fn simulate_chsh(
    rho: &DensityMatrix,
    template: &DriftScanConfig,
    seed: u64,
) -> Result<(ChshEstimate, DriftTrace, DriftTrace)> {
    let cfg1 = DriftScanConfig {
        alice: AliceSetting::A1,
        ..*template
    };
    let cfg2 = DriftScanConfig {
        alice: AliceSetting::A2,
        ..*template
    };
    let t1 = simulate_drift_scan(rho, &cfg1, seed.wrapping_mul(2))?;
    let t2 = simulate_drift_scan(rho, &cfg2, seed.wrapping_mul(2).wrapping_add(1))?;
    Ok((chsh_from_traces(&t1, &t2)?, t1, t2))
}
