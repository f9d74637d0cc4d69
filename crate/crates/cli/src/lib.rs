//! `relcomplete` command line: integrate a scenario, check the completeness
//! criteria against it, or sweep an ensemble of initial conditions.

mod report;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relcomplete::{builtin, builtin_names, check, integrate_maximal, load, CriteriaConfig, Prediction, SamplingConfig, Scenario, State};

pub use report::{CheckReport, RunReport};
pub use sweep::{sample_initial_states, SweepReport};

/// Exit status for a successful run or a `Complete` prediction.
pub const EXIT_OK: i32 = 0;
/// Exit status of `check` when no completeness prediction can be made.
pub const EXIT_NO_PREDICTION: i32 = 1;
/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "relcomplete", version, about = "Integrate and check completeness of the equation of motion with Lorentz force and potential")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory forward and backward and classify it.
    Run(RunArgs),
    /// Check the sufficient conditions for completeness on samples.
    Check(CheckArgs),
    /// Integrate an ensemble of sampled initial states.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    pub scenario: String,
    /// Directory for output files (created if missing).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Integration {
    /// Integrate over [-t_max, t_max].
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    /// Relative tolerance; the absolute tolerance is tol/100.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Auxiliary speed treated as blowup.
    #[arg(long = "v-max")]
    pub v_max: Option<f64>,
    /// Keep every stride-th accepted step.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub integration: Integration,
    /// Initial position, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q0: Option<Vec<f64>>,
    /// Initial velocity, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of sample points.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Random directions per sample point.
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    /// Sampled radius along non-periodic axes.
    #[arg(long, default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub integration: Integration,
    /// Ensemble size.
    #[arg(short = 'n', long = "count")]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radius of the velocity ball (g_R norm when K is timelike).
    #[arg(long = "speed-radius", default_value_t = 1.0)]
    pub speed_radius: f64,
    /// Half-width of the position box along non-periodic axes.
    #[arg(long = "position-radius", default_value_t = 1.0)]
    pub position_radius: f64,
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

pub fn resolve_scenario(source: &str) -> Result<Scenario> {
    if builtin_names().contains(&source) {
        return Ok(builtin(source)?);
    }
    let path = Path::new(source);
    if path.exists() {
        return load(path).with_context(|| format!("loading scenario file {source}"));
    }
    bail!("unknown scenario `{source}`: not a built-in ({}) and not a file", builtin_names().join(", "))
}

fn integration_config(s: &Scenario, a: &Integration) -> Result<relcomplete::IntegrationConfig> {
    let mut cfg = s.integration_config();
    if let Some(t) = a.t_max {
        cfg.horizon = t;
    }
    if let Some(tol) = a.tol {
        cfg.rtol = tol;
        cfg.atol = tol * 1e-2;
    }
    if let Some(v) = a.v_max {
        cfg.v_max = v;
    }
    cfg.stride = a.stride;
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn file_stem(s: &Scenario) -> String {
    s.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    let s = resolve_scenario(&a.common.scenario)?;
    let cfg = integration_config(&s, &a.integration)?;
    let n = s.dim();
    let mut initial = s.initial.clone();
    if let Some(q) = &a.q0 {
        if q.len() != n {
            bail!("--q0 needs {n} components, got {}", q.len());
        }
        initial.q = q.clone();
    }
    if let Some(v) = &a.v0 {
        if v.len() != n {
            bail!("--v0 needs {n} components, got {}", v.len());
        }
        initial.v = v.clone();
    }
    let result = integrate_maximal(&s.manifold, &s.fields, &initial, &cfg)?;
    let report = RunReport::build(&s, &initial, &cfg, &result)?;
    let text = to_json(&report);
    if let Some(dir) = &a.common.output {
        ensure_dir(dir)?;
        let stem = file_stem(&s);
        match a.integration.format {
            Format::Csv => {
                let mut buf = Vec::new();
                relcomplete::dynamics::write_csv(&result, &mut buf)?;
                write_file(&dir.join(format!("{stem}.trajectory.csv")), &buf)?;
            }
            Format::Json => {
                let samples = report::trajectory_json(&result);
                write_file(&dir.join(format!("{stem}.trajectory.json")), to_json(&samples).as_bytes())?;
            }
        }
        write_file(&dir.join(format!("{stem}.report.json")), text.as_bytes())?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn cmd_check(a: &CheckArgs) -> Result<i32> {
    let s = resolve_scenario(&a.common.scenario)?;
    if a.points == 0 {
        bail!("--points must be at least 1");
    }
    let cfg = CriteriaConfig {
        sampling: SamplingConfig {
            points: a.points,
            directions: a.directions,
            region_radius: a.radius,
            region_center: None,
            seed: a.seed,
        },
        ..Default::default()
    };
    let criterion = check(&s.manifold, &s.fields, &cfg);
    let report = CheckReport::new(&s, &cfg, criterion);
    let text = to_json(&report);
    if let Some(dir) = &a.common.output {
        ensure_dir(dir)?;
        write_file(&dir.join(format!("{}.check.json", file_stem(&s))), text.as_bytes())?;
    }
    print!("{text}");
    Ok(match report.criterion.prediction {
        Prediction::Complete => EXIT_OK,
        Prediction::NoPrediction => EXIT_NO_PREDICTION,
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    if a.count == 0 {
        bail!("ensemble size -n must be at least 1");
    }
    if !(a.speed_radius > 0.0 && a.position_radius > 0.0) {
        bail!("sampling radii must be positive");
    }
    let s = resolve_scenario(&a.common.scenario)?;
    let mut cfg = integration_config(&s, &a.integration)?;
    cfg.keep_samples = false;
    let states: Vec<State> = sample_initial_states(&s, a.count, a.seed, a.speed_radius, a.position_radius)?;
    let report = SweepReport::run(&s, &states, &cfg, a.seed)?;
    let text = to_json(&report.aggregate);
    if let Some(dir) = &a.common.output {
        ensure_dir(dir)?;
        let stem = file_stem(&s);
        match a.integration.format {
            Format::Csv => write_file(&dir.join(format!("{stem}.sweep.csv")), report.csv().as_bytes())?,
            Format::Json => write_file(&dir.join(format!("{stem}.sweep.trajectories.json")), to_json(&report.rows).as_bytes())?,
        }
        write_file(&dir.join(format!("{stem}.sweep.json")), text.as_bytes())?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}
