use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esn_plasticity::ErrorKind;

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "esn", version, about = "Echo state networks with unsupervised plasticity")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Log debug detail.
    #[arg(short, long, global = true, conflicts_with = "quiet")]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a band-coded synthetic dataset in the native manifest layout.
    GenSynthetic(GenArgs),
    /// Write per-trial wavelet band powers (features.json, features.csv).
    ExtractFeatures(RunArgs),
    /// Pretrain, train a readout, score the test split (report.json, model.json).
    Train(RunArgs),
    /// Score a saved model (report.json).
    Eval(EvalArgs),
    /// Run one experiment per (value, seed) (sweep.csv, sweep.json).
    Sweep(SweepArgs),
    /// Summarize a dataset: counts, class histograms, rating ranges.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Synthetic spec JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scheme: Option<esn_plasticity::dataset::SchemeKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    None,
    Oja,
    Bcm,
    Ip,
}

#[derive(Debug, Clone, Args)]
struct Overrides {
    /// Seed for the reservoir, the split and online shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scheme: Option<esn_plasticity::dataset::SchemeKind>,
    #[arg(long = "input-mode")]
    input_mode: Option<esn_plasticity::pipeline::InputMode>,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    #[arg(long)]
    mode: Option<esn_plasticity::pipeline::ReadoutMode>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run config: `{"data": ..., "experiment": ...}`.
    #[arg(long, required_unless_present = "data")]
    config: Option<PathBuf>,
    /// Dataset manifest; replaces the config's data source.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Run config naming the data source (its experiment section is ignored).
    #[arg(long, required_unless_present = "data")]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Score every labeled trial instead of the model's test split.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    param: esn_plasticity::pipeline::SweepParameter,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    values: Vec<f64>,
    /// Comma-separated seeds; defaults to the configured seed.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long, required_unless_present = "config")]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write inspect.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(esn_plasticity::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Config => "config",
                ErrorKind::Data => "data",
                ErrorKind::Numerical => "numerical",
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<esn_plasticity::Error> for CliError {
    fn from(e: esn_plasticity::Error) -> Self {
        CliError::Lib(e)
    }
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn out_dir(command: &Command) -> Option<&Path> {
    match command {
        Command::GenSynthetic(a) => Some(&a.out),
        Command::ExtractFeatures(a) | Command::Train(a) => Some(&a.out),
        Command::Eval(a) => Some(&a.out),
        Command::Sweep(a) => Some(&a.run.out),
        Command::Inspect(a) => a.out.as_deref(),
    }
}

/// Best effort: the process exit code carries the outcome either way.
fn write_error_record(dir: &Path, err: &CliError) {
    let record = serde_json::json!({
        "error": err.to_string(),
        "kind": err.kind_name(),
        "exit_code": err.exit_code(),
    });
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging(&cli);
    let result = match &cli.command {
        Command::GenSynthetic(a) => commands::gen_synthetic(a),
        Command::ExtractFeatures(a) => commands::extract_features(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            if let Some(dir) = out_dir(&cli.command) {
                write_error_record(dir, &e);
            }
            ExitCode::from(e.exit_code())
        }
    }
}
