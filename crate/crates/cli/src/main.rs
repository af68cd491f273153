//! The `cpd` binary: argument parsing and exit-code policy.
//!
//! Exit codes: 0 success, 1 usage (bad flags, unreadable or invalid
//! experiment file), 2 runtime failure (I/O, aborted trial, network).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cpd::config::{load_experiment, BuildAgentError, ExperimentSpec};
use cpd::net_cmd::{host_trial, join_trial, HostError, JoinError};
use cpd::single::{run_single, SingleError};
use cpd::sweep::{run_sweep, summary_table, SweepError};
use cpd_core::metrics::WindowProportions;
use cpd_core::model::PlayerId;
use cpd_llm::LlmError;
use cpd_net::{ClientOptions, ServeOptions};

/// Delayed-commit prisoner's dilemma experiments: seeded delay sweeps,
/// single trials, and networked trials.
#[derive(Parser)]
#[command(name = "cpd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a delay sweep and write sweep.csv, rasters, and traces.
    Run(RunArgs),
    /// Run one trial and write its trace, change log, and proportions.
    Single(SingleArgs),
    /// Host one networked trial for two clients.
    Serve(ServeArgs),
    /// Join a hosted trial as one seat.
    Connect(ConnectArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the experiment's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for trials (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the experiment's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SingleArgs {
    /// Experiment file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Delay condition to use, as an index into the experiment's list.
    #[arg(long, default_value_t = 0)]
    delay_index: usize,
    /// Trial index within the condition; picks the derived seed.
    #[arg(long, default_value_t = 0)]
    trial_index: u64,
    /// Override the experiment's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the experiment's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    /// Experiment file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Listen address; port 0 picks a free port, announced on stdout.
    #[arg(long, default_value = "127.0.0.1:4000")]
    listen: String,
    /// Delay condition to host, as an index into the experiment's list.
    #[arg(long, default_value_t = 0)]
    delay_index: usize,
    /// Trial index within the condition; picks the derived seed.
    #[arg(long, default_value_t = 0)]
    trial_index: u64,
    /// Override the experiment's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the experiment's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Pace ticks to real time instead of running at full speed.
    #[arg(long)]
    wall_clock: bool,
    /// Append every frame sent or received to this file as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// How long each client gets to open with hello, in seconds.
    #[arg(long, default_value_t = 10.0)]
    handshake_timeout_secs: f64,
    /// How long each client gets to answer a tick, in seconds.
    #[arg(long, default_value_t = 60.0)]
    submit_timeout_secs: f64,
}

/// Which of the experiment's two agent specs a client plays.
#[derive(Clone, Copy, ValueEnum)]
enum AgentChoice {
    A,
    B,
}

#[derive(Args)]
struct ConnectArgs {
    /// Experiment file (JSON); must describe the trial the server hosts.
    #[arg(long)]
    config: PathBuf,
    /// Server address to connect to.
    #[arg(long)]
    addr: String,
    /// Which of the experiment's agent specs to play. The server assigns
    /// actual seats in connection order.
    #[arg(long, value_enum, default_value_t = AgentChoice::A)]
    agent: AgentChoice,
    /// Delay condition the server is hosting, as an index.
    #[arg(long, default_value_t = 0)]
    delay_index: usize,
    /// Trial index the server is hosting.
    #[arg(long, default_value_t = 0)]
    trial_index: u64,
    /// Override the experiment's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Give up if the server is silent for this long, in seconds.
    #[arg(long)]
    read_timeout_secs: Option<f64>,
}

/// A failed command, already sorted into its exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = error.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Single(args) => single_command(args),
        Command::Serve(args) => serve_command(args),
        Command::Connect(args) => connect_command(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

/// Loads the experiment file and applies the shared overrides.
fn load(
    path: &std::path::Path,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExperimentSpec<f64>, Failure> {
    let mut spec: ExperimentSpec<f64> =
        load_experiment(path).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(dir) = out_dir {
        spec.out_dir = dir;
    }
    if let Some(seed) = seed {
        spec.base_seed = seed;
    }
    Ok(spec)
}

/// Whether a seat that failed to build points at the experiment file
/// rather than the environment.
fn seat_error_is_usage(error: &BuildAgentError) -> bool {
    match error {
        BuildAgentError::Builtin(_) => true,
        BuildAgentError::Llm(e) => matches!(e, LlmError::BadTraits(_)),
    }
}

fn run_command(args: RunArgs) -> Result<(), Failure> {
    let spec = load(&args.config, args.out_dir, args.seed)?;
    let outcome = run_sweep(&spec, args.workers).map_err(|error| match &error {
        SweepError::Spec(_) => Failure::Usage(error.to_string()),
        SweepError::Seat { source, .. } if seat_error_is_usage(source) => {
            Failure::Usage(error.to_string())
        }
        _ => Failure::Runtime(error.to_string()),
    })?;
    print!("{}", summary_table(&outcome.rows));
    println!("artifacts in {}", outcome.out_dir.display());
    Ok(())
}

fn print_proportions(proportions: &WindowProportions<f64>) {
    println!(
        "window proportions: cc {:.3}, dd {:.3}, exploit {:.3}",
        proportions.cc, proportions.dd, proportions.exploit,
    );
}

fn single_command(args: SingleArgs) -> Result<(), Failure> {
    let spec = load(&args.config, args.out_dir, args.seed)?;
    let outcome =
        run_single(&spec, args.delay_index, args.trial_index, &spec.out_dir).map_err(|error| {
            match &error {
                SingleError::Spec(_) | SingleError::DelayIndex { .. } => {
                    Failure::Usage(error.to_string())
                }
                SingleError::Seat { source, .. } if seat_error_is_usage(source) => {
                    Failure::Usage(error.to_string())
                }
                _ => Failure::Runtime(error.to_string()),
            }
        })?;
    let (a, b) = outcome.result.final_rewards;
    println!("final rewards: ({a}, {b})");
    print_proportions(&outcome.proportions);
    println!("artifacts in {}", outcome.out_dir.display());
    Ok(())
}

fn serve_command(args: ServeArgs) -> Result<(), Failure> {
    let spec = load(&args.config, args.out_dir, args.seed)?;
    let options = ServeOptions {
        handshake_timeout: Duration::from_secs_f64(args.handshake_timeout_secs),
        submit_timeout: Duration::from_secs_f64(args.submit_timeout_secs),
        wall_clock: args.wall_clock,
        transcript: args.transcript,
    };
    let outcome = host_trial(
        &spec,
        &args.listen,
        args.delay_index,
        args.trial_index,
        &options,
        Some(&spec.out_dir),
    )
    .map_err(|error| match &error {
        HostError::Spec(_) | HostError::DelayIndex { .. } => Failure::Usage(error.to_string()),
        _ => Failure::Runtime(error.to_string()),
    })?;
    let (a, b) = outcome.result.final_rewards;
    println!("final rewards: ({a}, {b})");
    print_proportions(&outcome.proportions);
    println!("artifacts in {}", spec.out_dir.display());
    Ok(())
}

fn connect_command(args: ConnectArgs) -> Result<(), Failure> {
    let spec = load(&args.config, None, args.seed)?;
    let which = match args.agent {
        AgentChoice::A => PlayerId::A,
        AgentChoice::B => PlayerId::B,
    };
    let options =
        ClientOptions { read_timeout: args.read_timeout_secs.map(Duration::from_secs_f64) };
    let outcome =
        join_trial(&spec, &args.addr, which, args.delay_index, args.trial_index, &options)
            .map_err(|error| match &error {
                JoinError::Spec(_) | JoinError::DelayIndex { .. } => {
                    Failure::Usage(error.to_string())
                }
                JoinError::Seat(source) if seat_error_is_usage(source) => {
                    Failure::Usage(error.to_string())
                }
                _ => Failure::Runtime(error.to_string()),
            })?;
    println!("assigned seat {}", outcome.player);
    println!("submitted {} ticks", outcome.ticks_submitted);
    println!(
        "final rewards: ({}, {})",
        outcome.final_state.cum_reward_a, outcome.final_state.cum_reward_b,
    );
    Ok(())
}
