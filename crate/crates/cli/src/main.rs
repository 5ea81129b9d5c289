mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Assertion(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "crossauth", version, about = "Cross-layer authentication simulator")]
struct Cli {
    /// JSON file of config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled fingerprint dataset (CSV).
    Dataset(DatasetArgs),
    /// Train a classifier and report held-out metrics.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Run a protocol scenario and emit its trace (JSON lines).
    Demo(DemoArgs),
    /// Measure adversary detection rates with confidence intervals.
    Attack(AttackArgs),
    /// Emit the cost comparison table.
    Overhead(OverheadArgs),
    /// Time the cryptographic primitives on this machine.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct DatasetArgs {
    /// fixed-skew (CFO varies) or fixed-cfo (skew varies).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// JSON roster overriding the evenly spaced default.
    #[arg(long)]
    roster: Option<String>,
    #[arg(long)]
    snr_db: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<String>,
    /// knn or lr.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Where to write the evaluation report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the confusion matrix CSV.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct EvalArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Score every row instead of the model's held-out split.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct DemoArgs {
    /// Scenario JSON; without it an honest run over the default roster.
    #[arg(long)]
    scenario_file: Option<String>,
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long)]
    messages: Option<u32>,
}

#[derive(Args, Debug, Default)]
struct AttackArgs {
    /// Scenario JSON with an adversary; default: stolen-PID impersonation.
    #[arg(long)]
    scenario_file: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    injections: Option<u32>,
    /// Exit 4 unless the control's false-reject rate agrees with the
    /// classifier's error.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug, Default)]
struct OverheadArgs {
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Exit 4 unless Ours costs the least time at every n.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug, Default)]
struct BenchArgs {
    #[arg(long)]
    iterations: Option<usize>,
}

fn put<T: serde::Serialize>(m: &mut Map<String, Value>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        m.insert(key.into(), serde_json::to_value(v).expect("serializable"));
    }
}

impl Command {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            Command::Dataset(a) => {
                put(&mut m, "scenario", &a.scenario);
                put(&mut m, "devices", &a.devices);
                put(&mut m, "frames", &a.frames);
                put(&mut m, "roster", &a.roster);
                put(&mut m, "snr_db", &a.snr_db);
            }
            Command::Train(a) => {
                put(&mut m, "dataset", &a.dataset);
                put(&mut m, "algo", &a.algo);
                put(&mut m, "k", &a.k);
                put(&mut m, "train_fraction", &a.train_fraction);
            }
            Command::Eval(a) => {
                put(&mut m, "model", &a.model);
                put(&mut m, "dataset", &a.dataset);
                put(&mut m, "train_fraction", &a.train_fraction);
            }
            Command::Demo(a) => {
                put(&mut m, "scenario_file", &a.scenario_file);
                put(&mut m, "devices", &a.devices);
                put(&mut m, "messages", &a.messages);
            }
            Command::Attack(a) => {
                put(&mut m, "scenario_file", &a.scenario_file);
                put(&mut m, "trials", &a.trials);
                put(&mut m, "injections", &a.injections);
            }
            Command::Overhead(a) => {
                put(&mut m, "n_max", &a.n_max);
                put(&mut m, "d", &a.d);
            }
            Command::Bench(a) => put(&mut m, "iterations", &a.iterations),
        }
        m
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut flags = cli.command.overrides();
    put(&mut flags, "seed", &cli.seed);
    let cfg = RunConfig::resolve(file, std::env::vars(), flags)?;
    eprintln!(
        "crossauth: seed {} config {}",
        cfg.seed,
        serde_json::to_string(&cfg).expect("serializable")
    );
    let out = commands::Output::new(cli.out, cli.force);
    match &cli.command {
        Command::Dataset(_) => commands::dataset(&cfg, &out),
        Command::Train(a) => commands::train(&cfg, &out, a.report.as_deref(), a.confusion.as_deref(), cli.force),
        Command::Eval(a) => commands::eval(&cfg, &out, a.all, a.confusion.as_deref(), cli.force),
        Command::Demo(_) => commands::demo(&cfg, &out),
        Command::Attack(a) => commands::attack(&cfg, &out, a.check),
        Command::Overhead(a) => commands::overhead(&cfg, &out, &a.format, a.check),
        Command::Bench(_) => commands::bench(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crossauth: {e}");
            ExitCode::from(e.code())
        }
    }
}
