//! `freqcorr` command-line front end.

mod config;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use freqcorr::montecarlo::{
    filter_detection_model, g2_estimate_with, run_trajectories, ClickStream, CoincidenceEstimate, CoincidenceWindow,
    TrajectoryOptions, DEFAULT_BIN_WIDTH, DEFAULT_DT, DEFAULT_REFINEMENTS,
};
use freqcorr::scan::{cut, evaluate, gamma_scan, landscape, Line, OmegaAxis, Quantity, ScanOptions};
use freqcorr::sensors::{
    build_sensor_model, default_epsilon, emitter_model, mollow_splitting, spectrum_point, DriveConfig, MomentOptions,
    SensorConfig,
};
use freqcorr::validation::{run_check, Level, CHECK_COUNT};
use rayon::prelude::*;
use serde::Serialize;

use config::{ConfigFile, McSpec, OutputSpec, RunConfig, ScanSpec, SensorSettings};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or parameters. Exit 2.
    Config(String),
    /// Output could not be written. Exit 1.
    Io(String),
    /// Failure inside a computation. Exit 1.
    Numerical(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<freqcorr::Error> for CliError {
    fn from(e: freqcorr::Error) -> Self {
        use freqcorr::Error as E;
        match e {
            E::InvalidConfig(_) | E::GridTooLarge(_) | E::NoDressing => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "freqcorr", version, about = "Frequency-resolved photon correlations of a driven two-level emitter")]
struct Cli {
    /// INI-style file of `flag-name = value` defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads; 1 gives bitwise-reproducible runs.
    #[arg(long, global = true, env = "FREQCORR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Filtered spectrum S_Γ(ω) = ⟨a†a⟩/ε².
    Spectrum(SpectrumArgs),
    /// Cross-correlation g2_Γ(ω1, ω2) at one point.
    G2(PointArgs),
    /// Cauchy-Schwarz ratio R at one point.
    Csi(PointArgs),
    /// CHSH parameter B at one point.
    Bell(PointArgs),
    /// A quantity over a square (ω1, ω2) grid.
    Landscape(LandscapeArgs),
    /// A quantity along a straight line in the (ω1, ω2) plane.
    Cut(CutArgs),
    /// R, B and collected signal at (ω, −ω) for several filter widths.
    GammaScan(GammaScanArgs),
    /// Quantum-jump trajectories and their click records.
    Trajectory(TrajectoryArgs),
    /// Runs the numbered physics checks.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct DriveArgs {
    /// Drive amplitude Ω.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    omega_drive: f64,
    /// Emitter detuning from the laser.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta_sigma: f64,
    /// Incoherent pump rate P.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pump: f64,
}

impl DriveArgs {
    fn drive(&self) -> Result<DriveConfig, CliError> {
        let d = DriveConfig { omega: self.omega_drive, delta_sigma: self.delta_sigma, pump: self.pump };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Args, Debug)]
struct MomentArgs {
    /// Sensor coupling ε; 1e-2·min(Γ, 1) by default.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Highest Fock level kept per sensor.
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    /// Recompute at ε/2 and flag points that drift.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    certify: Option<bool>,
    /// Extrapolate to ε → 0 from ε and ε/2.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    richardson: bool,
}

impl MomentArgs {
    fn options(&self, certify_default: bool) -> MomentOptions {
        MomentOptions { certify: self.certify.unwrap_or(certify_default), richardson: self.richardson }
    }

    fn settings(&self, gamma: Option<f64>, certify_default: bool) -> SensorSettings {
        SensorSettings {
            gamma,
            epsilon: self.epsilon.or(gamma.map(default_epsilon)),
            epsilon_defaulted: self.epsilon.is_none(),
            n_max: self.n_max,
            moments: self.options(certify_default),
        }
    }

    fn scan_options(&self, certify_default: bool, use_symmetry: bool) -> ScanOptions {
        ScanOptions { moments: self.options(certify_default), epsilon: self.epsilon, n_max: self.n_max, use_symmetry }
    }

    /// Checks ε and n_max against every Γ the run will use.
    fn check(&self, gammas: &[f64]) -> Result<(), CliError> {
        for &g in gammas {
            let eps = self.epsilon.unwrap_or_else(|| default_epsilon(g));
            SensorConfig::new(0.0, 0.0, g).with_epsilon(eps).with_n_max(self.n_max).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write a gnuplot script for the CSV output.
    #[arg(long, value_name = "FILE")]
    plot: Option<PathBuf>,
}

impl OutputArgs {
    fn spec(&self) -> OutputSpec {
        OutputSpec {
            path: self.output.clone(),
            format: format!("{:?}", self.format).to_lowercase(),
            plot: self.plot.clone(),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if self.plot.is_some() && (self.output.is_none() || self.format != Format::Csv) {
            return Err(CliError::Config("--plot needs --output and CSV format".into()));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct AxisArgs {
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    omega_min: f64,
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    omega_max: f64,
    #[arg(long, default_value_t = 121)]
    points: usize,
}

impl AxisArgs {
    fn axis(&self) -> Result<OmegaAxis, CliError> {
        Ok(OmegaAxis::new(self.omega_min, self.omega_max, self.points)?)
    }
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    drive: DriveArgs,
    /// Filter linewidth Γ.
    #[arg(long, default_value_t = 1.0)]
    gamma_filter: f64,
    #[command(flatten)]
    moments: MomentArgs,
    #[command(flatten)]
    axis: AxisArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[command(flatten)]
    drive: DriveArgs,
    #[arg(long, allow_negative_numbers = true)]
    omega1: f64,
    #[arg(long, allow_negative_numbers = true)]
    omega2: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_filter: f64,
    #[command(flatten)]
    moments: MomentArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct LandscapeArgs {
    #[command(flatten)]
    drive: DriveArgs,
    /// g2, csi or bell.
    #[arg(long, default_value = "csi")]
    quantity: Quantity,
    #[command(flatten)]
    axis: AxisArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma_filter: f64,
    /// Evaluate every cell instead of mirroring across ω1 = ω2.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    no_symmetry: bool,
    #[command(flatten)]
    moments: MomentArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct CutArgs {
    #[command(flatten)]
    drive: DriveArgs,
    #[arg(long, default_value = "csi")]
    quantity: Quantity,
    /// I for (ω, −ω), II for (ω, ωS − ω), or `alpha,beta` for ω2 = alpha·ω1 + beta.
    #[arg(long, default_value = "I", allow_hyphen_values = true)]
    line: Line,
    #[command(flatten)]
    axis: AxisArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma_filter: f64,
    #[command(flatten)]
    moments: MomentArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct GammaScanArgs {
    #[command(flatten)]
    drive: DriveArgs,
    /// Frequencies ω of the pairs (ω, −ω); comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    omegas: Vec<f64>,
    /// Filter linewidths; comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f64>,
    #[command(flatten)]
    moments: MomentArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Bare emitter; one "emitter" channel.
    Emitter,
    /// Emitter plus two weakly coupled sensors; clicks are rare.
    Sensors,
    /// Emitter cascaded into two filter cavities; "filter_1", "filter_2".
    Filters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Window {
    Forward,
    Centered,
}

#[derive(Args, Debug)]
struct TrajectoryArgs {
    #[command(flatten)]
    drive: DriveArgs,
    #[arg(long, value_enum, default_value = "filters")]
    model: Model,
    /// First filter or sensor frequency; −ωS by default.
    #[arg(long, allow_negative_numbers = true)]
    omega1: Option<f64>,
    /// Second filter or sensor frequency; ωS by default.
    #[arg(long, allow_negative_numbers = true)]
    omega2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma_filter: f64,
    /// Sensor coupling for `--model sensors`.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    /// Recorded time per trajectory.
    #[arg(long, default_value_t = 1000.0)]
    duration: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    /// Number of independent trajectories, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    trajectories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time evolved before recording starts.
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    /// Maximum step halvings when locating a jump.
    #[arg(long, default_value_t = DEFAULT_REFINEMENTS)]
    refinements: u32,
    /// Estimate zero-delay g2 between two channels, e.g. `filter_1,filter_2`.
    #[arg(long)]
    correlate: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long, value_enum, default_value = "centered")]
    window: Window,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Smaller grids and a short Monte Carlo run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    quick: bool,
    /// Check numbers to run; all by default.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

/// What a finished command reports back.
struct Outcome {
    /// False when a convergence flag or failed check is present.
    clean: bool,
}

fn base_config(command: &str, cli: &Cli, out: OutputSpec) -> RunConfig {
    RunConfig {
        command: command.into(),
        config_file: cli.config.clone(),
        drive: None,
        sensor: None,
        scan: None,
        mc: None,
        output: out,
        seed: None,
        threads: cli.threads,
    }
}

fn empty_scan() -> ScanSpec {
    ScanSpec {
        quantity: None,
        omega1: None,
        omega2: None,
        omega_min: None,
        omega_max: None,
        points: None,
        line: None,
        omegas: None,
        gammas: None,
        use_symmetry: None,
    }
}

/// Writes CSV via `csv` or the JSON envelope around `data`, then the plot.
fn emit<T: Serialize>(
    out: &OutputArgs,
    cfg: &RunConfig,
    data: &T,
    csv: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    plot: impl FnOnce(&Path) -> String,
) -> Result<(), CliError> {
    let path = out.output.as_deref();
    let mut sink = output::sink(path)?;
    match out.format {
        Format::Csv => csv(&mut *sink),
        Format::Json => output::write_json(&mut *sink, cfg, data),
    }
    .and_then(|_| sink.flush())
    .map_err(output::io_err(path))?;
    if let (Some(script), Some(data_path)) = (&out.plot, path) {
        output::write_text(script, &plot(data_path))?;
    }
    Ok(())
}

fn spectrum(cli: &Cli, a: &SpectrumArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.moments.check(&[a.gamma_filter])?;
    a.out.check()?;
    let axis = a.axis.axis()?;
    let mut cfg = base_config("spectrum", cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.sensor = Some(a.moments.settings(Some(a.gamma_filter), false));
    cfg.scan = Some(ScanSpec {
        omega_min: Some(axis.min),
        omega_max: Some(axis.max),
        points: Some(axis.count),
        ..empty_scan()
    });
    let eps = a.moments.epsilon.unwrap_or_else(|| default_epsilon(a.gamma_filter));
    let rows: Vec<(f64, Option<f64>)> = axis
        .values()
        .into_par_iter()
        .map(|w| (w, spectrum_point(&drive, w, a.gamma_filter, eps).ok()))
        .collect();
    #[derive(Serialize)]
    struct Data {
        omega: Vec<f64>,
        value: Vec<Option<f64>>,
    }
    let data = Data { omega: rows.iter().map(|r| r.0).collect(), value: rows.iter().map(|r| r.1).collect() };
    let title = format!("spectrum, Gamma = {}", a.gamma_filter);
    emit(&a.out, &cfg, &data, |w| output::series_csv(w, &rows), |p| output::series_plot(&title, "S", None, p))?;
    Ok(Outcome { clean: rows.iter().all(|r| r.1.is_some()) })
}

fn point(cli: &Cli, q: Quantity, a: &PointArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.moments.check(&[a.gamma_filter])?;
    a.out.check()?;
    let mut cfg = base_config(q.name(), cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.sensor = Some(a.moments.settings(Some(a.gamma_filter), true));
    cfg.scan = Some(ScanSpec { quantity: Some(q), omega1: Some(a.omega1), omega2: Some(a.omega2), ..empty_scan() });
    let p = evaluate(&drive, q, a.omega1, a.omega2, a.gamma_filter, &a.moments.scan_options(true, false));
    if let (None, Some(e)) = (p.value, &p.error) {
        return Err(CliError::Numerical(e.clone()));
    }
    #[derive(Serialize)]
    struct Data {
        quantity: Quantity,
        omega1: f64,
        omega2: f64,
        value: Option<f64>,
        converged: bool,
    }
    let data = Data { quantity: q, omega1: a.omega1, omega2: a.omega2, value: p.value, converged: p.converged };
    let title = format!("{q} at ({}, {})", a.omega1, a.omega2);
    emit(
        &a.out,
        &cfg,
        &data,
        |w| output::point_csv(w, a.omega1, a.omega2, p.value, p.converged),
        |path| output::series_plot(&title, q.name(), None, path),
    )?;
    Ok(Outcome { clean: p.converged })
}

fn landscape_cmd(cli: &Cli, a: &LandscapeArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.moments.check(&[a.gamma_filter])?;
    a.out.check()?;
    let axis = a.axis.axis()?;
    let mut cfg = base_config("landscape", cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.sensor = Some(a.moments.settings(Some(a.gamma_filter), false));
    cfg.scan = Some(ScanSpec {
        quantity: Some(a.quantity),
        omega_min: Some(axis.min),
        omega_max: Some(axis.max),
        points: Some(axis.count),
        use_symmetry: Some(!a.no_symmetry),
        ..empty_scan()
    });
    let grid = landscape(&drive, a.quantity, &axis, a.gamma_filter, &a.moments.scan_options(false, !a.no_symmetry))?;
    emit(&a.out, &cfg, &grid, |w| output::landscape_csv(w, &grid), |p| output::landscape_plot(&grid, p))?;
    Ok(Outcome { clean: grid.unconverged() == 0 })
}

fn cut_cmd(cli: &Cli, a: &CutArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.moments.check(&[a.gamma_filter])?;
    a.out.check()?;
    let axis = a.axis.axis()?;
    let mut cfg = base_config("cut", cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.sensor = Some(a.moments.settings(Some(a.gamma_filter), false));
    cfg.scan = Some(ScanSpec {
        quantity: Some(a.quantity),
        line: Some(a.line),
        omega_min: Some(axis.min),
        omega_max: Some(axis.max),
        points: Some(axis.count),
        ..empty_scan()
    });
    let c = cut(
        &drive,
        a.quantity,
        a.line,
        (axis.min, axis.max),
        axis.count,
        a.gamma_filter,
        &a.moments.scan_options(false, false),
    )?;
    emit(&a.out, &cfg, &c, |w| output::series_csv(w, &c.samples), |p| output::cut_plot(&c, p))?;
    Ok(Outcome { clean: c.unconverged() == 0 })
}

fn gamma_scan_cmd(cli: &Cli, a: &GammaScanArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.moments.check(&a.gammas)?;
    a.out.check()?;
    let mut cfg = base_config("gamma-scan", cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.sensor = Some(a.moments.settings(None, false));
    cfg.scan = Some(ScanSpec { omegas: Some(a.omegas.clone()), gammas: Some(a.gammas.clone()), ..empty_scan() });
    let rows = gamma_scan(&drive, &a.omegas, &a.gammas, &a.moments.scan_options(false, false))?;
    emit(&a.out, &cfg, &rows, |w| output::gamma_scan_csv(w, &rows), output::gamma_scan_plot)?;
    Ok(Outcome { clean: rows.iter().all(|r| r.converged) })
}

/// `path` with `-{seed}` before the extension.
fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{seed}"),
    };
    path.with_file_name(name)
}

fn trajectory_cmd(cli: &Cli, a: &TrajectoryArgs) -> Result<Outcome, CliError> {
    let drive = a.drive.drive()?;
    a.out.check()?;
    if a.trajectories == 0 {
        return Err(CliError::Config("--trajectories must be at least 1".into()));
    }
    if !(a.duration > 0.0 && a.duration.is_finite()) || !(a.burn_in >= 0.0 && a.burn_in.is_finite()) {
        return Err(CliError::Config("--duration must be positive and --burn-in non-negative".into()));
    }
    if a.trajectories > 1 && a.out.format == Format::Csv && a.out.output.is_none() {
        return Err(CliError::Config("several trajectories in CSV format need --output".into()));
    }
    let correlate = match &a.correlate {
        Some(s) => match s.split_once(',') {
            Some((x, y)) => Some((x.trim().to_string(), y.trim().to_string())),
            None => return Err(CliError::Config(format!("--correlate expects two channels, got {s:?}"))),
        },
        None => None,
    };
    let ws = mollow_splitting(drive.omega);
    let (w1, w2) = (a.omega1.unwrap_or(-ws), a.omega2.unwrap_or(ws));
    let model = match a.model {
        Model::Emitter => emitter_model(&drive)?,
        Model::Sensors => {
            let eps = a.epsilon.unwrap_or_else(|| default_epsilon(a.gamma_filter));
            build_sensor_model(&drive, &SensorConfig::new(w1, w2, a.gamma_filter).with_epsilon(eps).with_n_max(a.n_max), 2)?
        }
        Model::Filters => filter_detection_model(&drive, w1, w2, a.gamma_filter, a.n_max)?.model,
    };
    if let Some((x, y)) = &correlate {
        let labels: Vec<&str> = model.collapse_terms().iter().map(|c| c.label.as_str()).collect();
        if let Some(bad) = [x, y].into_iter().find(|c| !labels.contains(&c.as_str())) {
            return Err(CliError::Config(format!("no channel {bad:?}; this model has {}", labels.join(", "))));
        }
    }
    let window = match a.window {
        Window::Forward => CoincidenceWindow::Forward,
        Window::Centered => CoincidenceWindow::Centered,
    };

    let mut cfg = base_config("trajectory", cli, a.out.spec());
    cfg.drive = Some(drive);
    cfg.seed = Some(a.seed);
    if a.model != Model::Emitter {
        cfg.sensor = Some(SensorSettings {
            gamma: Some(a.gamma_filter),
            epsilon: (a.model == Model::Sensors).then(|| a.epsilon.unwrap_or_else(|| default_epsilon(a.gamma_filter))),
            epsilon_defaulted: a.epsilon.is_none(),
            n_max: a.n_max,
            moments: MomentOptions::fast(),
        });
        cfg.scan = Some(ScanSpec { omega1: Some(w1), omega2: Some(w2), ..empty_scan() });
    }
    cfg.mc = Some(McSpec {
        model: format!("{:?}", a.model).to_lowercase(),
        duration: a.duration,
        dt: a.dt,
        trajectories: a.trajectories,
        burn_in: a.burn_in,
        refinements: a.refinements,
        bin_width: a.bin_width,
        window,
        correlate: correlate.clone(),
    });

    let seeds: Vec<u64> = (0..a.trajectories as u64).map(|k| a.seed.wrapping_add(k)).collect();
    let opts = TrajectoryOptions { burn_in: a.burn_in, refinements: a.refinements, ..Default::default() };
    let streams: Vec<ClickStream> =
        run_trajectories(&model, a.duration, a.dt, &seeds, &opts)?.into_iter().map(|t| t.stream).collect();
    // Too few clicks for any estimate is a statistics problem, not a failure.
    let (estimate, undefined) = match &correlate {
        Some((x, y)) => match g2_estimate_with(&streams, x, y, a.bin_width, window) {
            Ok(e) => (Some(e), None),
            Err(freqcorr::Error::UndefinedCorrelation(m)) => (None, Some(m)),
            Err(e) => return Err(e.into()),
        },
        None => (None, None),
    };

    #[derive(Serialize)]
    struct Data<'a> {
        streams: &'a [ClickStream],
        estimate: Option<CoincidenceEstimate>,
    }
    let data = Data { streams: &streams, estimate };
    match (a.out.format, a.out.output.as_deref()) {
        (Format::Csv, Some(path)) if streams.len() > 1 => {
            for s in &streams {
                let p = seeded_path(path, s.seed);
                let mut sink = output::sink(Some(&p))?;
                s.write_csv(&mut sink).and_then(|_| sink.flush()).map_err(output::io_err(Some(&p)))?;
                if let Some(script) = &a.out.plot {
                    output::write_text(&seeded_path(script, s.seed), &output::trajectory_plot(s, &p))?;
                }
            }
        }
        _ => emit(&a.out, &cfg, &data, |w| streams[0].write_csv(w), |p| output::trajectory_plot(&streams[0], p))?,
    }

    let mut err = std::io::stderr().lock();
    for label in &streams[0].channels {
        let n: usize = streams.iter().map(|s| s.count(label).unwrap_or(0)).sum();
        let _ = writeln!(err, "{label}: {n} clicks");
    }
    if let Some(e) = &estimate {
        let _ = writeln!(
            err,
            "g2 estimate: {} ± {} ({} pairs{})",
            output::num(e.value),
            output::num(e.std_error),
            e.n_pairs,
            if e.sufficient { "" } else { ", too few clicks" }
        );
    }
    if let Some(m) = &undefined {
        let _ = writeln!(err, "g2 estimate undefined: {m}");
    }
    Ok(Outcome { clean: undefined.is_none() && estimate.is_none_or(|e| e.sufficient) })
}

fn validate_cmd(cli: &Cli, a: &ValidateArgs) -> Result<Outcome, CliError> {
    let ids: Vec<u32> = if a.only.is_empty() { (1..=CHECK_COUNT).collect() } else { a.only.clone() };
    if let Some(bad) = ids.iter().find(|id| !(1..=CHECK_COUNT).contains(*id)) {
        return Err(CliError::Config(format!("no check numbered {bad} (1..={CHECK_COUNT})")));
    }
    let level = if a.quick { Level::Quick } else { Level::Full };
    let path = a.output.as_deref();
    let mut sink = output::sink(path)?;
    let mut results = Vec::new();
    for id in ids {
        let r = run_check(id, level).expect("id checked above");
        if a.format == Format::Csv {
            writeln!(sink, "{}", r.line()).and_then(|_| sink.flush()).map_err(output::io_err(path))?;
        }
        results.push(r);
    }
    let passed = results.iter().filter(|r| r.passed).count();
    match a.format {
        Format::Csv => writeln!(sink, "{passed}/{} checks passed", results.len()),
        Format::Json => {
            let spec = OutputSpec { path: a.output.clone(), format: "json".into(), plot: None };
            output::write_json(&mut *sink, &base_config("validate", cli, spec), &results)
        }
    }
    .and_then(|_| sink.flush())
    .map_err(output::io_err(path))?;
    Ok(Outcome { clean: passed == results.len() })
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Cmd::Spectrum(a) => spectrum(cli, a),
        Cmd::G2(a) => point(cli, Quantity::G2, a),
        Cmd::Csi(a) => point(cli, Quantity::Csi, a),
        Cmd::Bell(a) => point(cli, Quantity::Bell, a),
        Cmd::Landscape(a) => landscape_cmd(cli, a),
        Cmd::Cut(a) => cut_cmd(cli, a),
        Cmd::GammaScan(a) => gamma_scan_cmd(cli, a),
        Cmd::Trajectory(a) => trajectory_cmd(cli, a),
        Cmd::Validate(a) => validate_cmd(cli, a),
    }
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

/// Parses argv, folding in the config file when one is given. The first
/// pass only locates the subcommand and `--config`, so flags the config
/// supplies need not be on the command line.
fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let relaxed = command().mut_subcommands(|s| s.mut_args(|a| a.required(false)));
    let first = relaxed.try_get_matches_from(&argv)?;
    let Some((name, sub)) = first.subcommand() else {
        return Cli::from_arg_matches(&command().try_get_matches_from(&argv)?);
    };
    let config = sub.get_one::<PathBuf>("config").or_else(|| first.get_one::<PathBuf>("config"));
    let argv = match config {
        Some(path) => {
            let extra = ConfigFile::load(path)
                .and_then(|c| c.args_for(&command(), name))
                .map_err(|e| command().error(clap::error::ErrorKind::ValueValidation, e.to_string()))?;
            config::splice_args(&argv, name, extra)
        }
        None => argv,
    };
    Cli::from_arg_matches(&command().try_get_matches_from(argv)?)
}

fn report(kind: &str, message: &str, code: u8) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            report("config", text.lines().next().unwrap_or("invalid arguments"), 2);
            return ExitCode::from(2);
        }
    };
    let pool = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numerical(format!("cannot start thread pool: {e}"))),
        None => rayon::ThreadPoolBuilder::new().build().map_err(|e| CliError::Numerical(e.to_string())),
    };
    let result = pool.and_then(|p| p.install(|| dispatch(&cli)));
    match result {
        Ok(Outcome { clean: true }) => ExitCode::SUCCESS,
        Ok(Outcome { clean: false }) => {
            report("convergence", "some results are flagged unconverged or failed; outputs were written", 3);
            ExitCode::from(3)
        }
        Err(e) => {
            report(e.kind(), &e.to_string(), e.exit_code());
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<OsString> {
        std::iter::once("freqcorr").chain(args.iter().copied()).map(OsString::from).collect()
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_frequencies_parse() {
        let cli = parse(argv(&["g2", "--omega1", "-20", "--omega2", "20"])).unwrap();
        let Cmd::G2(a) = cli.command else { panic!() };
        assert_eq!((a.omega1, a.omega2, a.gamma_filter, a.drive.omega_drive), (-20.0, 20.0, 1.0, 10.0));
    }

    #[test]
    fn later_flags_override_earlier() {
        let cli = parse(argv(&["landscape", "--points", "3", "--points", "5"])).unwrap();
        let Cmd::Landscape(a) = cli.command else { panic!() };
        assert_eq!(a.axis.points, 5);
    }

    #[test]
    fn seeded_paths() {
        assert_eq!(seeded_path(Path::new("out/clicks.csv"), 7), PathBuf::from("out/clicks-7.csv"));
        assert_eq!(seeded_path(Path::new("clicks"), 7), PathBuf::from("clicks-7"));
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(freqcorr::Error::GridTooLarge(600)).exit_code(), 2);
        assert_eq!(CliError::from(freqcorr::Error::DegenerateSteadyState { pivot: 0 }).exit_code(), 1);
    }
}
