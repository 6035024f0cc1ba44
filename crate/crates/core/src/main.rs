use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rcmlab::experiments::{emit, run_scenario, Command, Scenario};
use rcmlab::RcmError;

#[derive(Parser)]
#[command(name = "rcmlab", version, about = "Random connection model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one sample per rung and write its points and edges.
    Sample(Common),
    /// Evaluate the configured statistics on every replicate.
    Census(Common),
    /// Compare empirical means with the predicted intensities.
    Expectation(Common),
    /// Compare empirical covariances with the asymptotic matrix.
    Covariance(Common),
    /// Distances to the normal law per rung and their decay rate.
    Clt(Common),
    /// Poincare, birth-time and optional gamma and fourth-moment bounds.
    Bounds(Common),
    /// Variance of the total component count and its partial sums.
    Total(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario's seed_base.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; defaults to the scenario's `out` or `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; RCMLAB_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, RcmError> {
    match std::env::var("RCMLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| RcmError::InvalidParameter(format!("RCMLAB_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => match flag {
            Some(0) => Err(RcmError::InvalidParameter("--threads must be positive".into())),
            other => Ok(other),
        },
    }
}

fn run(command: Command, args: Common) -> Result<PathBuf, RcmError> {
    let mut scenario = Scenario::load(&args.config)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    let out = args
        .out
        .or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads(args.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RcmError::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let experiment = pool.install(|| run_scenario(&scenario, command))?;
    emit(&experiment, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Sample(a) => (Command::Sample, a),
        Cmd::Census(a) => (Command::Census, a),
        Cmd::Expectation(a) => (Command::Expectation, a),
        Cmd::Covariance(a) => (Command::Covariance, a),
        Cmd::Clt(a) => (Command::Clt, a),
        Cmd::Bounds(a) => (Command::Bounds, a),
        Cmd::Total(a) => (Command::Total, a),
    };
    match run(command, args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
