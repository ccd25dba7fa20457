use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod failure;

use failure::Failure;

/// Hybrid Kalman echo canceller with a complex-mask post-filter.
#[derive(Debug, Parser)]
#[command(name = "aenr", version, about)]
struct Cli {
    /// More log output (-v per-second stats, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cancel echo and noise in a microphone recording.
    Process(ProcessArgs),
    /// Render a test scenario to a directory of WAV files.
    Simulate(SimulateArgs),
    /// Score estimators on a set of scenarios.
    Eval(EvalArgs),
    /// Write a random-weight file for the neural estimator.
    InitWeights(InitWeightsArgs),
    /// Print the effective pipeline configuration as TOML.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ConfigSource {
    /// Pipeline configuration file (TOML). Defaults apply to missing keys.
    #[arg(long, env = aenr::config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Microphone signal, 16 kHz mono.
    #[arg(long)]
    pub mic: PathBuf,
    /// Far-end (loudspeaker) reference, 16 kHz mono.
    #[arg(long)]
    pub farend: PathBuf,
    /// Output WAV (32-bit float).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigSource,
    /// Estimator: identity, zero, oracle, wiener or neural:<weights>.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Clean near-end signal; needed by the oracle, enables SI-SDR metrics.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Write a one-row metrics CSV here.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Write per-frame canceller diagnostics (CSV) here.
    #[arg(long)]
    pub kf_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scenario directories written by `simulate`, scenario spec files, or
    /// directories holding either.
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    pub scenarios: Vec<PathBuf>,
    /// Comma-separated estimator list.
    #[arg(long, default_value = "identity,wiener,oracle")]
    pub estimators: String,
    /// Output CSV.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub config: ConfigSource,
    /// Timed runs per real-time factor measurement (at least 5).
    #[arg(long, default_value_t = 5)]
    pub rtf_runs: usize,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigSource,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub config: ConfigSource,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .format_timestamp(None)
        .parse_default_env()
        .init();
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Process(args) => commands::process(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::InitWeights(args) => commands::init_weights(&args),
        Command::Config(args) => commands::print_config(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{f}");
            ExitCode::from(f.code())
        }
    }
}
