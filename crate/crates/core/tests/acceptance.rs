//! End-to-end acceptance checks. Each criterion writes one
//! `criterion NN ... PASS|FAIL` line straight to stderr, so the lines show up
//! even when the harness captures test output.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mmtqa::analysis::{aoi_sweep, phase_sensitivity, stability_series, FieldSpec, StabilityNoise, STABILITY_RATE};
use mmtqa::chsh::{
    max_expectation_surface, s_theo, simulate_chsh, simulate_drift_scan, AliceSetting, DriftModel, DriftScanConfig,
};
use mmtqa::geometry::{relay_matrix, InterferometerGeometry, RayTransferMatrix};
use mmtqa::measurement::{bob_povm, validate_povm, AnalyzerEfficiencies, POVM_TOL};
use mmtqa::quantum::DensityMatrix;
use mmtqa::states::{
    depolarize, hybrid_bell_state, phase_grid, visibility_xy, visibility_z, DepolarizationParams, VisibilityPair,
};
use mmtqa::verify::{
    block_diagonal_restriction, boundary_scan, build_constraints, ppt_oracle, sdp_feasible, werner_state,
    BoundaryPoint, ScanOptions, SolverOptions, Verdict,
};
use mmtqa::waveoptics::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relay-free visibility law at 0, 0.5, 1, 1.5 and 2 mrad, evaluated
/// independently in extended precision.
const VISIBILITY_LAW: [(f64, f64); 5] = [
    (0.0, 0.91),
    (0.5e-3, 0.891758622),
    (1.0e-3, 0.839267115),
    (1.5e-3, 0.758669435),
    (2.0e-3, 0.658804864),
];

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:02} {verdict} {title}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn measured_state() -> DensityMatrix {
    depolarize(&hybrid_bell_state(), DepolarizationParams::unbiased(0.012, 0.086).unwrap()).unwrap()
}

#[test]
fn criterion_01_visibility_point() {
    let g = InterferometerGeometry::reference();
    let start = Instant::now();
    let v = g.visibility(1.70e-3).unwrap();
    let elapsed = start.elapsed();
    let pass = (v - 0.70).abs() <= 0.03 && elapsed < Duration::from_millis(1);
    report(
        1,
        "visibility at 1.70 mrad",
        pass,
        &format!("V = {v:.6} (target 0.70 +/- 0.03), {:.1} us", elapsed.as_secs_f64() * 1e6),
    );
}

#[test]
fn criterion_02_relay_identity() {
    let mut worst = 0.0f64;
    for f in [0.05, 0.1, 1.0] {
        worst = worst.max(relay_matrix(f).unwrap().max_deviation(&RayTransferMatrix::IDENTITY));
    }
    report(
        2,
        "relay ABCD identity",
        worst <= 1e-12,
        &format!("max entry deviation {worst:.2e} for f in {{0.05, 0.1, 1.0}} m (limit 1e-12)"),
    );
}

#[test]
fn criterion_03_wave_ray_consistency() {
    let g = InterferometerGeometry::reference();
    let grid = GridSpec::new(512, 16.0 * g.sigma, g.wavelength).unwrap();
    let alphas: Vec<f64> = VISIBILITY_LAW.iter().map(|p| p.0).collect();
    let start = Instant::now();
    let free = aoi_sweep(&g, FieldSpec::Gaussian, &alphas, false, &grid).unwrap();
    let relay = aoi_sweep(&g, FieldSpec::Gaussian, &alphas, true, &grid).unwrap();
    let elapsed = start.elapsed();
    let free_err = free
        .iter()
        .zip(VISIBILITY_LAW)
        .map(|(p, (_, v))| (p.visibility - v).abs())
        .fold(0.0, f64::max);
    let law_err = alphas
        .iter()
        .zip(VISIBILITY_LAW)
        .map(|(&a, (_, v))| (g.visibility(a).unwrap() - v).abs())
        .fold(0.0, f64::max);
    let relay_err = relay.iter().map(|p| (p.visibility - g.v0).abs()).fold(0.0, f64::max);
    let pass = free_err <= 1e-2 && law_err <= 1e-8 && relay_err <= 1e-3 && elapsed < Duration::from_secs(30);
    report(
        3,
        "wave/ray consistency",
        pass,
        &format!(
            "no relay max |dV| {free_err:.2e} (limit 1e-2), relay max |V - V0| {relay_err:.2e} (limit 1e-3), \
             512^2 grid in {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_phase_sensitivity() {
    let p = phase_sensitivity(&InterferometerGeometry::reference(), 0.0).unwrap();
    let pass = p.deviation_from_reported.abs() <= 0.10 && (p.five_pi_ratio - 5.0).abs() <= 0.05;
    report(
        4,
        "phase sensitivity",
        pass,
        &format!(
            "pi per {:.2} nrad ({:+.2} % against the reported 349 nrad, limit 10 %), \
             phase ratio 1.75 urad / 349 nrad = {:.4} (target 5.00 +/- 0.05)",
            p.angle_per_pi * 1e9,
            100.0 * p.deviation_from_reported,
            p.five_pi_ratio
        ),
    );
}

#[test]
fn criterion_05_noise_model_round_trip() {
    let rho = measured_state();
    let bob = bob_povm(AnalyzerEfficiencies::default()).unwrap();
    let vz = visibility_z(&rho, &bob).unwrap().v_z;
    let vxy = visibility_xy(&rho, &bob, &phase_grid(24)).unwrap().v_xy;
    let s = s_theo(VisibilityPair::new(vz, vxy).unwrap());
    let pass = (vz - 0.952).abs() <= 1e-6
        && (vxy - 0.804).abs() <= 1e-6
        && (s - 2.483359015527155).abs() <= 1e-4
        && (s - 2.47).abs() <= 0.02;
    report(
        5,
        "noise-model round trip",
        pass,
        &format!("V_z = {vz:.9}, V_xy = {vxy:.9} (limit 1e-6), S_theo = {s:.4} (2.47 +/- 0.02)"),
    );
}

#[test]
fn criterion_06_chsh_simulation() {
    let rho = measured_state();
    let cfg = DriftScanConfig::aligned_noiseless(AliceSetting::Xy { phi: 0.0 }, 16);
    let trace = simulate_drift_scan(&rho, &cfg, 0).unwrap();
    let max_e = max_expectation_surface(&trace).unwrap().max_abs();

    let start = Instant::now();
    let template = DriftScanConfig::experiment(AliceSetting::A1);
    let values: Vec<f64> = (0..20).map(|seed| simulate_chsh(&rho, &template, seed).unwrap().0.s).collect();
    let elapsed = start.elapsed();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let in_band = values.iter().filter(|s| (*s - 2.42).abs() <= 0.10).count();
    let pass = (max_e - 0.804).abs() <= 1e-6 && (mean - 2.42).abs() <= 0.10 && elapsed < Duration::from_secs(60);
    report(
        6,
        "CHSH simulation",
        pass,
        &format!(
            "noiseless max|E| = {max_e:.9} (V_xy 0.804, limit 1e-6); Poisson S over 20 seeds: mean {mean:.4} \
             (2.42 +/- 0.10), {in_band}/20 seeds in band, range [{:.4}, {:.4}], {:.3} s",
            values.iter().cloned().fold(f64::INFINITY, f64::min),
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_07_entanglement_verdict() {
    let eff = AnalyzerEfficiencies::new(0.9, 0.9).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for (vz, vxy, expected) in [
        (0.952, 0.804, Verdict::Infeasible),
        (1.0, 0.0, Verdict::Feasible),
        (0.0, 0.0, Verdict::Feasible),
    ] {
        let set = build_constraints(vz, vxy, eff).unwrap();
        let start = Instant::now();
        let r = sdp_feasible(&set, SolverOptions::default()).unwrap();
        let elapsed = start.elapsed();
        pass &= r.verdict == expected && elapsed < Duration::from_secs(10);
        if expected == Verdict::Feasible {
            let w = &r.witness;
            let constraint = set.residual(w.matrix());
            let eig = w.min_eigenvalue().unwrap();
            let eig_pt = w.partial_transpose().min_eigenvalue().unwrap();
            pass &= constraint <= 1e-8 && eig >= -1e-8 && eig_pt >= -1e-8;
            detail.push(format!(
                "({vz}, {vxy}) {:?} witness residual {constraint:.1e} eig {eig:.1e} eig_pt {eig_pt:.1e} in {:.1} ms",
                r.verdict,
                elapsed.as_secs_f64() * 1e3
            ));
        } else {
            detail.push(format!(
                "({vz}, {vxy}) {:?} t* <= {:.4e} in {:.1} ms",
                r.verdict,
                r.upper_bound,
                elapsed.as_secs_f64() * 1e3
            ));
        }
    }
    report(7, "entanglement verdicts", pass, &detail.join("; "));
}

fn thresholds(points: &[BoundaryPoint]) -> Vec<f64> {
    points.iter().map(|p| p.threshold.unwrap_or(f64::INFINITY)).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_08_boundary_properties() {
    let start = Instant::now();
    let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let opts = ScanOptions::default();
    let scan = |l: f64, s: f64, g: &[f64], o: ScanOptions| {
        thresholds(&boundary_scan(g, AnalyzerEfficiencies::new(l, s).unwrap(), o).unwrap())
    };
    let base = scan(0.9, 0.9, &grid, opts);
    let monotone = base.windows(2).all(|w| w[1] <= w[0]);
    let loss = max_gap(&base, &scan(0.45, 0.45, &grid, opts));
    let swap = max_gap(&scan(0.9, 0.6, &grid, opts), &scan(0.6, 0.9, &grid, opts));
    let five = [0.1, 0.3, 0.5, 0.7, 0.9];
    let full = ScanOptions {
        restricted: false,
        ..opts
    };
    let restricted_vs_full = max_gap(&scan(0.9, 0.9, &five, opts), &scan(0.9, 0.9, &five, full));
    let at_measured = scan(0.9, 0.9, &[0.952], opts)[0];
    let elapsed = start.elapsed();
    let pass = monotone
        && loss <= 1e-3
        && swap <= 1e-3
        && restricted_vs_full <= 1e-3
        && 0.804 > at_measured
        && elapsed < Duration::from_secs(600);
    let curve: Vec<String> = base
        .iter()
        .map(|t| if t.is_finite() { format!("{t:.4}") } else { "none".into() })
        .collect();
    report(
        8,
        "boundary properties",
        pass,
        &format!(
            "thresholds [{}] monotone={monotone}, loss scaling gap {loss:.1e}, swap gap {swap:.1e}, \
             restricted/full gap {restricted_vs_full:.1e}, threshold at v_z 0.952 = {at_measured:.4} < 0.804, {:.2} s",
            curve.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_ppt_oracle() {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if ppt_oracle(&werner_state(mid).unwrap()).unwrap() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let transition = 0.5 * (lo + hi);
    let min_pt = hybrid_bell_state().partial_transpose().min_eigenvalue().unwrap();
    let pass = (transition - 1.0 / 3.0).abs() <= 0.01 && (min_pt + 0.5).abs() <= 1e-10;
    report(
        9,
        "PPT oracle",
        pass,
        &format!("Werner transition at p = {transition:.5} (1/3 +/- 0.01), pure-state PT min eigenvalue {min_pt:.12}"),
    );
}

#[test]
fn criterion_10_stability_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let drift = DriftModel::Constant {
            phase: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
        let s = stability_series(0.804, drift, 1.0, 1.0, StabilityNoise::Noiseless).unwrap();
        worst = worst.max((s[0].combined - 0.804).abs());
    }
    let drift = DriftModel::Linear {
        phase0: 0.0,
        rate: 0.5 * std::f64::consts::PI / 1800.0,
    };
    let noise = StabilityNoise::Poisson {
        rate: STABILITY_RATE,
        seed: 0,
    };
    let series = stability_series(0.804, drift, 1800.0, 180.0, noise).unwrap();
    let min = series.iter().map(|p| p.combined).fold(f64::INFINITY, f64::min);
    // One ulp of 0.804 is about 1.1e-16.
    let pass = worst <= 2.3e-16 && min > 0.65;
    report(
        10,
        "stability metric",
        pass,
        &format!(
            "noiseless max |combined - V_xy| {worst:.1e} over 100 phases, \
             30 min Poisson run minimum combined {min:.4} (> 0.65)"
        ),
    );
}

#[test]
fn criterion_11_povm_validity() {
    let mut worst_completeness = 0.0f64;
    let mut failures = 0;
    for i in 0..=20 {
        for j in 0..=20 {
            let eff = AnalyzerEfficiencies::new(i as f64 / 20.0, j as f64 / 20.0).unwrap();
            let povm = bob_povm(eff).unwrap();
            let diag = validate_povm(&povm.elements()).unwrap();
            worst_completeness = worst_completeness.max(diag.completeness_residual);
            if !diag.is_valid() {
                failures += 1;
            }
        }
    }
    report(
        11,
        "POVM validity",
        failures == 0 && POVM_TOL <= 1e-12,
        &format!("{failures}/441 grid points invalid, worst completeness residual {worst_completeness:.1e} (tol 1e-12)"),
    );
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_mmtqa"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("MMTQA_OUT_DIR")
        .output()
        .unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    let runs: [&[&str]; 6] = [
        &["--svg", "chsh-scan", "--seed", "11"],
        &["--svg", "stability", "--seed", "5"],
        &["--svg", "visibility-scan", "--mode", "speckle", "--relay", "off", "--seed", "3", "--grid", "256"],
        &["--svg", "npt-boundary", "--points", "6"],
        &["npt-verify", "--vz", "1.0", "--vxy", "0.0"],
        &["--svg", "expectation-aoi", "--relay", "off"],
    ];
    let mut identical = 0;
    let mut files = 0;
    for (k, args) in runs.iter().enumerate() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let jobs = if k % 2 == 0 { "1" } else { "4" };
        run_cli(a.path(), args);
        let mut with_jobs = vec!["--jobs", jobs];
        with_jobs.extend_from_slice(args);
        run_cli(b.path(), &with_jobs);
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        files += sa.len();
        if sa == sb {
            identical += 1;
        }
    }
    report(
        12,
        "CLI determinism",
        identical == runs.len(),
        &format!(
            "{identical}/{} invocations byte-identical across repeated runs and thread counts ({files} files)",
            runs.len()
        ),
    );
}

#[test]
fn restricted_problem_agrees_at_measured_point() {
    let set = build_constraints(0.952, 0.804, AnalyzerEfficiencies::default()).unwrap();
    let full = sdp_feasible(&set, SolverOptions::default()).unwrap();
    let reduced = sdp_feasible(&block_diagonal_restriction(&set).unwrap(), SolverOptions::default()).unwrap();
    assert_eq!(full.verdict, reduced.verdict);
}
