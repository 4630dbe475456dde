use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sivc::io::{overlay_toml, ColumnRoles, KnotRule, RunConfig};
use sivc::simulation::ExperimentConfig;
use sivc::{Error, KStrategy, OutcomeKind};

mod commands;

/// Exit status for invalid configuration.
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "sivc", version, about = "Penalized single-index varying-coefficient models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write coefficient, curve and report files.
    Fit(RunArgs),
    /// Linear predictors for new data from a saved model.
    Predict(PredictArgs),
    /// Run a simulation experiment.
    Simulate(SimulateArgs),
    /// Repeated train/validation splits.
    Crossval(CrossvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutcomeArg {
    Gaussian,
    Cox,
}

impl From<OutcomeArg> for OutcomeKind {
    fn from(o: OutcomeArg) -> Self {
        match o {
            OutcomeArg::Gaussian => OutcomeKind::Gaussian,
            OutcomeArg::Cox => OutcomeKind::Cox,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KArg {
    Identity,
    FixedFromInitial,
    UpdateEachIteration,
}

impl From<KArg> for KStrategy {
    fn from(k: KArg) -> Self {
        match k {
            KArg::Identity => KStrategy::Identity,
            KArg::FixedFromInitial => KStrategy::FixedFromInitial,
            KArg::UpdateEachIteration => KStrategy::UpdateEachIteration,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML run configuration; its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Delimited data file with a header row.
    #[arg(long)]
    input: Option<String>,
    #[arg(long, env = "SIVC_OUTPUT_DIR")]
    output_dir: Option<String>,
    #[arg(long, value_enum)]
    outcome: Option<OutcomeArg>,
    /// Response or survival-time column.
    #[arg(long = "y")]
    y: Option<String>,
    /// Event indicator column (1 = event, 0 = censored).
    #[arg(long)]
    event: Option<String>,
    /// Comma-separated predictor columns with varying effects.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    /// Comma-separated index columns.
    #[arg(long, value_delimiter = ',')]
    u: Vec<String>,
    /// Comma-separated linear covariate columns.
    #[arg(long, value_delimiter = ',')]
    z: Vec<String>,
    #[arg(long)]
    delimiter: Option<String>,
    /// Keep predictors on their original scale.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    min_ratio: Option<f64>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    #[arg(long)]
    max_inner_iters: Option<usize>,
    #[arg(long)]
    tol_outer: Option<f64>,
    #[arg(long)]
    tol_inner: Option<f64>,
    #[arg(long, value_enum)]
    k_strategy: Option<KArg>,
    /// `symmetric` or a comma-separated odd-length list through 0.
    #[arg(long)]
    knots: Option<String>,
    /// Skip the adaptive-weight stage.
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    curve_points: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Saved model written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, env = "SIVC_OUTPUT_DIR")]
    output_dir: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML experiment configuration; its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "SIVC_OUTPUT_DIR")]
    output_dir: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_enum)]
    outcome: Option<OutcomeArg>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Hold the index at the full-data estimate.
    #[arg(long)]
    fix_beta: bool,
}

const DEFAULT_OUTPUT_DIR: &str = "sivc-out";

fn parse_knots(s: &str) -> Result<KnotRule, Error> {
    if s == "symmetric" {
        return Ok(KnotRule::Symmetric);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad knot '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(KnotRule::Explicit)
}

fn run_config(a: &RunArgs, extra: impl FnOnce(&mut RunConfig)) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig {
        input: a.input.clone(),
        output_dir: a.output_dir.clone(),
        delimiter: a.delimiter.clone(),
        standardize: !a.no_standardize,
        weighted: !a.unweighted,
        columns: ColumnRoles {
            outcome: a.y.clone().unwrap_or_default(),
            event: a.event.clone(),
            x: a.x.clone(),
            u: a.u.clone(),
            z: a.z.clone(),
        },
        ..RunConfig::default()
    };
    if let Some(o) = a.outcome {
        cfg.outcome = o.into();
    }
    if let Some(v) = a.n1 {
        cfg.grid.n1 = v;
    }
    if let Some(v) = a.n2 {
        cfg.grid.n2 = v;
    }
    if let Some(v) = a.min_ratio {
        cfg.grid.min_ratio = v;
    }
    if let Some(v) = a.n_starts {
        cfg.solver.n_starts = v;
    }
    if let Some(v) = a.max_outer_iters {
        cfg.solver.max_outer_iters = v;
    }
    if let Some(v) = a.max_inner_iters {
        cfg.solver.max_inner_iters = v;
    }
    if let Some(v) = a.tol_outer {
        cfg.solver.tol_outer = v;
    }
    if let Some(v) = a.tol_inner {
        cfg.solver.tol_inner = v;
    }
    if let Some(k) = a.k_strategy {
        cfg.k_strategy = k.into();
    }
    if let Some(k) = &a.knots {
        cfg.knots = parse_knots(k)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(c) = a.curve_points {
        cfg.curve_points = c;
    }
    extra(&mut cfg);
    let mut cfg = match &a.config {
        Some(path) => cfg.overlay_toml(&std::fs::read_to_string(path)?)?,
        None => {
            cfg.validate()?;
            cfg
        }
    };
    cfg.solver.seed = cfg.seed;
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(DEFAULT_OUTPUT_DIR.into());
    }
    Ok(cfg)
}

fn experiment_config(a: &SimulateArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(o) = a.outcome {
        cfg.outcome = o.into();
    }
    if let Some(v) = a.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(path) = &a.config {
        cfg = overlay_toml(&cfg, &std::fs::read_to_string(path)?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidGrid(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Dimension(_) | Error::NoEvents | Error::Io(_) => EXIT_DATA,
        Error::Solver(_) | Error::Calibration(_) => EXIT_SOLVER,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit(a) => commands::fit(&run_config(&a, |_| ())?),
        Command::Predict(a) => commands::predict(
            &a.model,
            &a.input,
            a.delimiter.as_deref(),
            a.output_dir.as_deref().unwrap_or(DEFAULT_OUTPUT_DIR),
        ),
        Command::Simulate(a) => {
            let dir = a.output_dir.clone().unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
            commands::simulate(&experiment_config(&a)?, &dir)
        }
        Command::Crossval(a) => {
            let mut cfg = run_config(&a.run, |c| {
                if let Some(v) = a.n_splits {
                    c.crossval.n_splits = v;
                }
                if let Some(v) = a.train_fraction {
                    c.crossval.train_fraction = v;
                }
                c.crossval.fix_beta |= a.fix_beta;
            })?;
            cfg.crossval.seed = cfg.seed;
            cfg.validate()?;
            commands::crossval(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
