//! The `mmtqa` command-line front end.
//!
//! Parameters resolve as defaults < `--config` JSON file < explicit flags.
//! Every subcommand writes one or more CSV files into the output directory
//! (`--out-dir`, else `MMTQA_OUT_DIR`, else the working directory), each
//! starting with a `#` line that records the tool version, the resolved
//! parameters and the seed. `--svg` adds a line plot next to each curve.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 solver
//! non-convergence.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    aoi_sweep, collection_efficiency, expectation_vs_aoi, mean_expectation, phase_sensitivity, stability_series,
    symmetric_range, FieldSpec, StabilityNoise, COLLECTION_CUTOFF, STABILITY_RATE,
};
use crate::chsh::{
    max_expectation_surface, simulate_chsh, AliceSetting, DriftModel, DriftScanConfig, NoiseMode,
};
use crate::geometry::{relay_matrix, InterferometerGeometry, RayTransferMatrix};
use crate::measurement::AnalyzerEfficiencies;
use crate::states::{depolarize, hybrid_bell_state, DepolarizationParams, VisibilityPair};
use crate::units::{parse_quantity, Dimension};
use crate::verify::{
    block_diagonal_restriction, boundary_scan, build_constraints, sdp_feasible, write_boundary_csv, ScanOptions,
    SolverOptions, Verdict,
};
use crate::waveoptics::{GridSpec, DEFAULT_EXTENT_SIGMAS, DEFAULT_GRID};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version accepted in the `schema_version` key of a config file.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mmtqa", version, about = "Multimode time-bin qubit analyzer simulations")]
pub struct Cli {
    /// JSON file with parameter overrides (SI units).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "MMTQA_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for sweeps and bisections.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Also write an SVG plot for each curve.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fringe visibility against angle of incidence.
    VisibilityScan(VisibilityScanArgs),
    /// Ray-transfer matrix of the relay double pass.
    RelayCheck(RelayCheckArgs),
    /// Phase response of the relay-free analyzer.
    PhaseSensitivity(PhaseSensitivityArgs),
    /// Drifting-phase CHSH simulation.
    ChshScan(ChshScanArgs),
    /// Separability (PPT) feasibility for one visibility pair.
    NptVerify(NptVerifyArgs),
    /// Entanglement threshold on v_xy across v_z.
    NptBoundary(NptBoundaryArgs),
    /// Long-term stability series.
    Stability(StabilityArgs),
    /// Expectation value against angle of incidence.
    ExpectationAoi(ExpectationAoiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    Gaussian,
    Speckle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseArg {
    None,
    Poisson,
}

fn angle(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Angle).map_err(|e| e.to_string())
}

fn length(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Length).map_err(|e| e.to_string())
}

fn time(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Time).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Round-trip path difference at normal incidence.
    #[arg(long, value_parser = length)]
    pub delta_l0: Option<f64>,
    /// Beam width parameter of the visibility law.
    #[arg(long, value_parser = length)]
    pub sigma: Option<f64>,
    /// Visibility at normal incidence.
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long, value_parser = length)]
    pub wavelength: Option<f64>,
    /// Relay focal length.
    #[arg(long = "f", value_parser = length)]
    pub focal_length: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EfficiencyArgs {
    #[arg(long)]
    pub eta_l: Option<f64>,
    #[arg(long)]
    pub eta_s: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VisibilityScanArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub mode: FieldMode,
    #[arg(long, value_enum, default_value = "off")]
    pub relay: Switch,
    /// Sweep runs over [-alpha-max, alpha-max].
    #[arg(long, value_parser = angle, default_value = "2mrad")]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    /// Samples per grid axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Hermite-Gauss orders for the speckle field.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RelayCheckArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PhaseSensitivityArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Operating angle.
    #[arg(long, value_parser = angle, default_value = "0")]
    pub alpha: f64,
    /// Width of the phase table around the operating angle.
    #[arg(long, value_parser = angle, default_value = "1.75urad")]
    pub span: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VisibilityArgs {
    #[arg(long)]
    pub vz: Option<f64>,
    #[arg(long)]
    pub vxy: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ChshScanArgs {
    #[command(flatten)]
    pub visibilities: VisibilityArgs,
    #[command(flatten)]
    pub efficiencies: EfficiencyArgs,
    /// Total coincidence rate (1/s).
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_parser = time)]
    pub bucket: Option<f64>,
    #[arg(long, value_parser = time)]
    pub duration: Option<f64>,
    #[arg(long, value_enum, default_value = "poisson")]
    pub noise: NoiseArg,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct NptVerifyArgs {
    #[command(flatten)]
    pub visibilities: VisibilityArgs,
    #[command(flatten)]
    pub efficiencies: EfficiencyArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Search over block-diagonal states only.
    #[arg(long)]
    pub restricted: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NptBoundaryArgs {
    #[command(flatten)]
    pub efficiencies: EfficiencyArgs,
    /// Number of v_z grid points on [0, 1].
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub resolution: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Use the full 6x6 problem instead of the block-diagonal one.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub visibilities: VisibilityArgs,
    #[arg(long, value_parser = time, default_value = "30min")]
    pub duration: f64,
    #[arg(long, value_parser = time, default_value = "3min")]
    pub bucket: f64,
    /// Phase drift accumulated over the run.
    #[arg(long, value_parser = angle, default_value = "90deg")]
    pub drift: f64,
    #[arg(long, value_parser = angle, default_value = "0")]
    pub phase0: f64,
    #[arg(long, value_enum, default_value = "poisson")]
    pub noise: NoiseArg,
    /// Coincidence rate over both polarization settings (1/s).
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExpectationAoiArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub visibilities: VisibilityArgs,
    #[arg(long, value_enum, default_value = "on")]
    pub relay: Switch,
    #[arg(long, value_parser = angle, default_value = "0.2deg")]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Analyzer phase at normal incidence.
    #[arg(long, value_parser = angle, default_value = "0")]
    pub phase0: f64,
}

/// Contents of a `--config` file. All keys are optional and in SI units.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: Option<u32>,
    pub delta_l0: Option<f64>,
    pub sigma: Option<f64>,
    pub v0: Option<f64>,
    pub wavelength: Option<f64>,
    pub focal_length: Option<f64>,
    pub eta_l: Option<f64>,
    pub eta_s: Option<f64>,
    pub v_z: Option<f64>,
    pub v_xy: Option<f64>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub rate: Option<f64>,
    pub bucket: Option<f64>,
    pub duration: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ConfigFile =
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(v) = cfg.schema_version {
            if v != CONFIG_SCHEMA_VERSION {
                return Err(Error::Usage(format!(
                    "config schema_version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }

    fn geometry(&self, flags: &GeometryArgs) -> Result<InterferometerGeometry> {
        let d = InterferometerGeometry::reference();
        InterferometerGeometry::new(
            flags.delta_l0.or(self.delta_l0).unwrap_or(d.delta_l0),
            flags.sigma.or(self.sigma).unwrap_or(d.sigma),
            flags.v0.or(self.v0).unwrap_or(d.v0),
            flags.wavelength.or(self.wavelength).unwrap_or(d.wavelength),
            flags.focal_length.or(self.focal_length).unwrap_or(d.focal_length),
        )
    }

    fn efficiencies(&self, flags: &EfficiencyArgs) -> Result<AnalyzerEfficiencies> {
        let d = AnalyzerEfficiencies::default();
        AnalyzerEfficiencies::new(
            flags.eta_l.or(self.eta_l).unwrap_or(d.eta_l),
            flags.eta_s.or(self.eta_s).unwrap_or(d.eta_s),
        )
    }

    fn visibilities(&self, flags: &VisibilityArgs) -> Result<VisibilityPair> {
        let d = VisibilityPair::measured();
        VisibilityPair::new(
            flags.vz.or(self.v_z).unwrap_or(d.v_z),
            flags.vxy.or(self.v_xy).unwrap_or(d.v_xy),
        )
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    fn solver(&self, flag: Option<f64>) -> Result<SolverOptions> {
        let tol = flag.or(self.tol).unwrap_or(SolverOptions::default().tol);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::param("tol", tol, "must be positive"));
        }
        Ok(SolverOptions {
            tol,
            ..SolverOptions::default()
        })
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let sink = Sink {
        dir: cli.out_dir.clone(),
        svg: cli.svg,
    };
    std::fs::create_dir_all(&sink.dir)?;
    // Reports are buffered so the worker pool never touches `out`.
    let body = || -> Result<Vec<u8>> {
        let mut report = Vec::new();
        dispatch(&cli.command, &cfg, &sink, &mut report)?;
        Ok(report)
    };
    let report = match cli.jobs {
        Some(0) => return Err(Error::param("jobs", 0.0, "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?
            .install(body)?,
        None => body()?,
    };
    out.write_all(&report)?;
    Ok(())
}

fn dispatch(cmd: &Command, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::VisibilityScan(a) => visibility_scan(a, cfg, sink, out),
        Command::RelayCheck(a) => relay_check(a, cfg, sink, out),
        Command::PhaseSensitivity(a) => phase_sensitivity_cmd(a, cfg, sink, out),
        Command::ChshScan(a) => chsh_scan(a, cfg, sink, out),
        Command::NptVerify(a) => npt_verify(a, cfg, sink, out),
        Command::NptBoundary(a) => npt_boundary(a, cfg, sink, out),
        Command::Stability(a) => stability(a, cfg, sink, out),
        Command::ExpectationAoi(a) => expectation_aoi(a, cfg, sink, out),
    }
}

/// Where artifacts go.
struct Sink {
    dir: PathBuf,
    svg: bool,
}

impl Sink {
    /// Write `body` as `<name>.csv` behind the provenance line.
    fn csv<P: Serialize>(&self, name: &str, command: &str, params: &P, seed: Option<u64>, body: &[u8]) -> Result<PathBuf> {
        let mut text = Vec::with_capacity(body.len() + 256);
        let seed = seed.map_or("none".to_string(), |s| s.to_string());
        writeln!(
            text,
            "# mmtqa {VERSION} command={command} seed={seed} params={}",
            serde_json::to_string(params)?
        )?;
        text.extend_from_slice(body);
        let path = self.dir.join(format!("{name}.csv"));
        std::fs::write(&path, text)?;
        Ok(path)
    }

    fn plot(&self, name: &str, plot: &Plot) -> Result<()> {
        if self.svg {
            std::fs::write(self.dir.join(format!("{name}.svg")), plot.render())?;
        }
        Ok(())
    }
}

fn rows<T>(header: &str, items: &[T], fields: impl Fn(&T) -> Vec<String>) -> Vec<u8> {
    let mut s = String::new();
    s.push_str(header);
    s.push('\n');
    for item in items {
        s.push_str(&fields(item).join(","));
        s.push('\n');
    }
    s.into_bytes()
}

fn f(v: f64) -> String {
    v.to_string()
}

#[derive(Serialize)]
struct VisibilityScanParams {
    geometry: InterferometerGeometry,
    mode: FieldMode,
    relay: bool,
    alpha_max: f64,
    points: usize,
    grid: usize,
    extent: f64,
    modes: Option<usize>,
}

fn visibility_scan(a: &VisibilityScanArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let geom = cfg.geometry(&a.geometry)?;
    let n = a.grid.or(cfg.grid).unwrap_or(DEFAULT_GRID);
    let grid = GridSpec::new(n, DEFAULT_EXTENT_SIGMAS * geom.sigma, geom.wavelength)?;
    let seed = cfg.seed(a.seed);
    let (field, seed) = match a.mode {
        FieldMode::Gaussian => (FieldSpec::Gaussian, None),
        FieldMode::Speckle => (
            FieldSpec::Speckle {
                mode_count: a.modes,
                seed,
            },
            Some(seed),
        ),
    };
    let alphas = symmetric_range(a.alpha_max, a.points)?;
    let curve = aoi_sweep(&geom, field, &alphas, a.relay.on(), &grid)?;
    let params = VisibilityScanParams {
        geometry: geom,
        mode: a.mode,
        relay: a.relay.on(),
        alpha_max: a.alpha_max,
        points: a.points,
        grid: n,
        extent: grid.extent,
        modes: seed.map(|_| a.modes),
    };
    let body = rows("alpha_rad,visibility,ray_model", &curve, |p| {
        vec![f(p.alpha), f(p.visibility), f(p.ray_model)]
    });
    let path = sink.csv("visibility_scan", "visibility-scan", &params, seed, &body)?;
    sink.plot(
        "visibility_scan",
        &Plot::new("Fringe visibility", "alpha (mrad)", "visibility")
            .series("wave optics", curve.iter().map(|p| (p.alpha * 1e3, p.visibility)).collect())
            .series("ray model", curve.iter().map(|p| (p.alpha * 1e3, p.ray_model)).collect()),
    )?;
    let min = curve.iter().map(|p| p.visibility).fold(f64::INFINITY, f64::min);
    let max = curve.iter().map(|p| p.visibility).fold(f64::NEG_INFINITY, f64::max);
    writeln!(out, "visibility range [{min:.6}, {max:.6}] over {} angles", curve.len())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct RelayParams {
    focal_length: f64,
}

fn relay_check(a: &RelayCheckArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let geom = cfg.geometry(&a.geometry)?;
    let m = relay_matrix(geom.focal_length)?;
    let residual = m.max_deviation(&RayTransferMatrix::IDENTITY);
    let body = rows("focal_length_m,a,b,c,d,max_deviation", &[m], |m| {
        vec![f(geom.focal_length), f(m.a), f(m.b), f(m.c), f(m.d), f(residual)]
    });
    let params = RelayParams {
        focal_length: geom.focal_length,
    };
    let path = sink.csv("relay_check", "relay-check", &params, None, &body)?;
    writeln!(out, "relay double pass at f = {} m", geom.focal_length)?;
    writeln!(out, "  [{:+.3e} {:+.3e}]", m.a, m.b)?;
    writeln!(out, "  [{:+.3e} {:+.3e}]", m.c, m.d)?;
    writeln!(out, "identity residual {residual:.3e}")?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct PhaseParams {
    geometry: InterferometerGeometry,
    alpha: f64,
    span: f64,
    points: usize,
}

fn phase_sensitivity_cmd(a: &PhaseSensitivityArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let geom = cfg.geometry(&a.geometry)?;
    let report = phase_sensitivity(&geom, a.alpha)?;
    if a.points < 2 {
        return Err(Error::param("points", a.points as f64, "need at least 2"));
    }
    let base = geom.phase_shift(a.alpha)?;
    let step = a.span / (a.points - 1) as f64;
    let mut table = Vec::with_capacity(a.points);
    for k in 0..a.points {
        let d = step * k as f64;
        let shift = geom.phase_shift(a.alpha + d)? - base;
        table.push((d, shift));
    }
    let body = rows("delta_alpha_rad,phase_shift_rad,phase_shift_pi", &table, |&(d, s)| {
        vec![f(d), f(s), f(s / PI)]
    });
    let params = PhaseParams {
        geometry: geom,
        alpha: a.alpha,
        span: a.span,
        points: a.points,
    };
    let path = sink.csv("phase_sensitivity", "phase-sensitivity", &params, None, &body)?;
    sink.plot(
        "phase_sensitivity",
        &Plot::new("Phase shift", "delta alpha (urad)", "phase shift (pi)")
            .series("relay-free", table.iter().map(|&(d, s)| (d * 1e6, s / PI)).collect()),
    )?;
    writeln!(out, "path-difference slope {:.9} (numeric {:.9})", report.slope, report.slope_numeric)?;
    writeln!(out, "angle per pi {:.3} nrad", report.angle_per_pi * 1e9)?;
    writeln!(
        out,
        "deviation from the reported 349 nrad: {:+.2} %",
        100.0 * report.deviation_from_reported
    )?;
    writeln!(out, "phase(1.75 urad) / phase(349 nrad) = {:.6}", report.five_pi_ratio)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct ChshParams {
    visibilities: VisibilityPair,
    depolarization: DepolarizationParams,
    scan: DriftScanConfig,
}

fn chsh_scan(a: &ChshScanArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let v = cfg.visibilities(&a.visibilities)?;
    let p = DepolarizationParams::from_visibilities(v)?;
    let rho = depolarize(&hybrid_bell_state(), p)?;
    let mut scan = DriftScanConfig::experiment(AliceSetting::A1);
    scan.efficiencies = cfg.efficiencies(&a.efficiencies)?;
    scan.rate = a.rate.or(cfg.rate).unwrap_or(scan.rate);
    scan.bucket = a.bucket.or(cfg.bucket).unwrap_or(scan.bucket);
    if let Some(d) = a.duration.or(cfg.duration) {
        scan.duration = d;
        scan.drift = DriftModel::Linear {
            phase0: 0.0,
            rate: 2.0 * PI / d,
        };
    }
    scan.noise = match a.noise {
        NoiseArg::None => NoiseMode::Noiseless,
        NoiseArg::Poisson => NoiseMode::Poisson,
    };
    let seed = cfg.seed(a.seed);
    let (est, t1, t2) = simulate_chsh(&rho, &scan, seed)?;
    let params = ChshParams {
        visibilities: v,
        depolarization: p,
        scan,
    };
    for (tag, trace) in [("a1", &t1), ("a2", &t2)] {
        let mut body = Vec::new();
        trace.write_csv(&mut body)?;
        sink.csv(&format!("chsh_trace_{tag}"), "chsh-scan", &params, Some(seed), &body)?;
        let surface = max_expectation_surface(trace)?;
        let mut body = Vec::new();
        surface.write_csv(&mut body)?;
        sink.csv(&format!("chsh_surface_{tag}"), "chsh-scan", &params, Some(seed), &body)?;
        let middle = |d: usize| -> Vec<(f64, f64)> {
            trace
                .times
                .iter()
                .zip(trace.series(d, crate::chsh::TimeBin::Middle))
                .map(|(&t, &c)| (t, c))
                .collect()
        };
        sink.plot(
            &format!("chsh_trace_{tag}"),
            &Plot::new("Middle-bin coincidences", "t (s)", "counts")
                .series("D1", middle(0))
                .series("D2", middle(1)),
        )?;
    }
    let e = est.expectations;
    let body = rows("e11,e12,e21,e22,s", &[e], |e| {
        vec![f(e[0]), f(e[1]), f(e[2]), f(e[3]), f(est.s)]
    });
    let path = sink.csv("chsh_summary", "chsh-scan", &params, Some(seed), &body)?;
    writeln!(out, "E11 {:+.4}  E12 {:+.4}  E21 {:+.4}  E22 {:+.4}", e[0], e[1], e[2], e[3])?;
    writeln!(out, "S = {:.4}", est.s)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct NptParams {
    visibilities: VisibilityPair,
    efficiencies: AnalyzerEfficiencies,
    solver: SolverOptions,
    restricted: bool,
}

fn npt_verify(a: &NptVerifyArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let v = cfg.visibilities(&a.visibilities)?;
    let eff = cfg.efficiencies(&a.efficiencies)?;
    let solver = cfg.solver(a.tol)?;
    let set = build_constraints(v.v_z, v.v_xy, eff)?;
    let set = if a.restricted {
        block_diagonal_restriction(&set)?
    } else {
        set
    };
    for w in &set.warnings {
        writeln!(out, "warning: {w}")?;
    }
    let report = sdp_feasible(&set, solver)?;
    let params = NptParams {
        visibilities: v,
        efficiencies: eff,
        solver,
        restricted: a.restricted,
    };
    let verdict = match report.verdict {
        Verdict::Feasible => "feasible",
        Verdict::Infeasible => "infeasible",
    };
    let body = rows("v_z,v_xy,verdict,margin,upper_bound,iterations", &[&report], |r| {
        vec![
            f(v.v_z),
            f(v.v_xy),
            verdict.to_string(),
            format!("{:e}", r.margin),
            format!("{:e}", r.upper_bound),
            r.iterations.to_string(),
        ]
    });
    let path = sink.csv("npt_verify", "npt-verify", &params, None, &body)?;
    match report.verdict {
        Verdict::Infeasible => writeln!(
            out,
            "INFEASIBLE: no PPT state reproduces (v_z, v_xy) = ({}, {}); ENTANGLED (margin {:.3e})",
            v.v_z, v.v_xy, report.upper_bound
        )?,
        Verdict::Feasible => {
            writeln!(
                out,
                "FEASIBLE: a PPT state reproduces (v_z, v_xy) = ({}, {}); entanglement not certified (margin {:.3e})",
                v.v_z, v.v_xy, report.margin
            )?;
            std::fs::write(sink.dir.join("npt_witness.json"), report.witness_json()?)?;
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct BoundaryParams {
    efficiencies: AnalyzerEfficiencies,
    grid: Vec<f64>,
    scan: ScanOptions,
}

fn npt_boundary(a: &NptBoundaryArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let eff = cfg.efficiencies(&a.efficiencies)?;
    if a.points < 2 {
        return Err(Error::param("points", a.points as f64, "need at least 2"));
    }
    let grid: Vec<f64> = (0..a.points).map(|k| k as f64 / (a.points - 1) as f64).collect();
    let scan = ScanOptions {
        solver: cfg.solver(a.tol)?,
        resolution: a.resolution,
        restricted: !a.full,
    };
    let points = boundary_scan(&grid, eff, scan)?;
    let mut body = Vec::new();
    write_boundary_csv(&points, &mut body)?;
    let params = BoundaryParams {
        efficiencies: eff,
        grid,
        scan,
    };
    let path = sink.csv("npt_boundary", "npt-boundary", &params, None, &body)?;
    sink.plot(
        "npt_boundary",
        &Plot::new("Entanglement threshold", "V_z", "V_xy threshold").series(
            "boundary",
            points.iter().filter_map(|p| p.threshold.map(|t| (p.v_z, t))).collect(),
        ),
    )?;
    for p in &points {
        match p.threshold {
            Some(t) => writeln!(out, "v_z {:.4}  v_xy threshold {:.4}", p.v_z, t)?,
            None => writeln!(out, "v_z {:.4}  no threshold (separable up to v_xy = 1)", p.v_z)?,
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct StabilityParams {
    v_xy: f64,
    drift: DriftModel,
    duration: f64,
    bucket: f64,
    noise: StabilityNoise,
}

fn stability(a: &StabilityArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let v = cfg.visibilities(&a.visibilities)?;
    let duration = a.duration;
    let drift = DriftModel::Linear {
        phase0: a.phase0,
        rate: a.drift / duration,
    };
    let seed = cfg.seed(a.seed);
    let (noise, seed) = match a.noise {
        NoiseArg::None => (StabilityNoise::Noiseless, None),
        NoiseArg::Poisson => (
            StabilityNoise::Poisson {
                rate: a.rate.or(cfg.rate).unwrap_or(STABILITY_RATE),
                seed,
            },
            Some(seed),
        ),
    };
    let series = stability_series(v.v_xy, drift, duration, a.bucket, noise)?;
    let params = StabilityParams {
        v_xy: v.v_xy,
        drift,
        duration,
        bucket: a.bucket,
        noise,
    };
    let body = rows("t_s,phase_rad,e1,e2,combined", &series, |p| {
        vec![f(p.t), f(p.phase), f(p.e1), f(p.e2), f(p.combined)]
    });
    let path = sink.csv("stability", "stability", &params, seed, &body)?;
    sink.plot(
        "stability",
        &Plot::new("Long-term stability", "t (min)", "E")
            .series("E1", series.iter().map(|p| (p.t / 60.0, p.e1)).collect())
            .series("E2", series.iter().map(|p| (p.t / 60.0, p.e2)).collect())
            .series("combined", series.iter().map(|p| (p.t / 60.0, p.combined)).collect()),
    )?;
    let min = series.iter().map(|p| p.combined).fold(f64::INFINITY, f64::min);
    writeln!(out, "minimum combined expectation {min:.4} over {} buckets", series.len())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Serialize)]
struct ExpectationParams {
    geometry: InterferometerGeometry,
    v_xy: f64,
    relay: bool,
    alpha_max: f64,
    points: usize,
    phase0: f64,
    collection_cutoff: f64,
}

fn expectation_aoi(a: &ExpectationAoiArgs, cfg: &ConfigFile, sink: &Sink, out: &mut dyn Write) -> Result<()> {
    let geom = cfg.geometry(&a.geometry)?;
    let v = cfg.visibilities(&a.visibilities)?;
    let alphas = symmetric_range(a.alpha_max, a.points)?;
    let curve = expectation_vs_aoi(&geom, v.v_xy, &alphas, a.relay.on(), a.phase0)?;
    let mut table = Vec::with_capacity(curve.len());
    for p in &curve {
        table.push((*p, collection_efficiency(p.alpha, COLLECTION_CUTOFF)?));
    }
    let body = rows("alpha_rad,phase_rad,expectation,collection_efficiency", &table, |(p, eta)| {
        vec![f(p.alpha), f(p.phase), f(p.expectation), f(*eta)]
    });
    let params = ExpectationParams {
        geometry: geom,
        v_xy: v.v_xy,
        relay: a.relay.on(),
        alpha_max: a.alpha_max,
        points: a.points,
        phase0: a.phase0,
        collection_cutoff: COLLECTION_CUTOFF,
    };
    let path = sink.csv("expectation_aoi", "expectation-aoi", &params, None, &body)?;
    sink.plot(
        "expectation_aoi",
        &Plot::new("Expectation value", "alpha (deg)", "E").series(
            if a.relay.on() { "relay" } else { "no relay" },
            curve.iter().map(|p| (p.alpha.to_degrees(), p.expectation)).collect(),
        ),
    )?;
    writeln!(out, "mean expectation {:+.4} over {} angles", mean_expectation(&curve), curve.len())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

/// Minimal SVG line plot: frame, five ticks per axis, legend.
struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl Plot {
    fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    fn series(mut self, name: &str, points: Vec<(f64, f64)>) -> Self {
        let points = points.into_iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        self.series.push((name.into(), points));
        self
    }

    fn render(&self) -> String {
        let (w, h, m) = (640.0, 420.0, 60.0);
        let all = self.series.iter().flat_map(|(_, p)| p.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 * y0.abs().max(1.0) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, self.title);
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let (px, py) = (sx(fx), sy(fy));
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, h - m, h - m + 5.0);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{fx:.3}</text>"#, h - m + 18.0);
            let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{m}" y2="{py:.2}" stroke="black"/>"#, m - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{fy:.3}</text>"#, m - 8.0, py + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, self.x_label);
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            self.y_label
        );
        for (i, (name, points)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
            let ly = m + 15.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                w - m - 110.0,
                w - m - 90.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, w - m - 85.0, ly + 4.0);
        }
        s.push_str("</svg>\n");
        s
    }
}
