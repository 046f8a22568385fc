use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmqm_cli::{replay, run, write_output, CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cmqm", version, about = "Seeded, replayable finite-resolution quantum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; `params` missing from it take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the record here (series go to `.csv` / `.events.jsonl` siblings)
    /// instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a polynomial has a root in a bounded domain.
    DioSolve(RunArgs),
    /// Search for a root with a field of communicating machines.
    FieldRun(RunArgs),
    /// Bounded halting table for the diagonal argument.
    DiagDemo(RunArgs),
    /// Lower bound on the halting probability.
    ChaitinOmega(RunArgs),
    /// Estimate a rotation angle from repeated measurements.
    ChaitinRotate(RunArgs),
    /// Decoherence of a qubit coupled to fresh environment qubits.
    Decohere(RunArgs),
    /// Spin measured by a three-state meter.
    Meter(RunArgs),
    /// Memory and operation-rate estimates from entropy and resolution.
    EstimateResources(RunArgs),
    /// Evolve a state through repeated cycles of unitaries.
    StateEvolve(RunArgs),
    /// Re-run a record and check the result is byte-identical.
    Replay {
        record: PathBuf,
        /// Write the re-run record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path, experiment)?,
        None => ExperimentConfig::new(experiment),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let output = run(&config)?;
    write_output(&output, args.out.as_deref())
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (experiment, args) = match command {
        Command::DioSolve(a) => (Experiment::DioSolve, a),
        Command::FieldRun(a) => (Experiment::FieldRun, a),
        Command::DiagDemo(a) => (Experiment::DiagDemo, a),
        Command::ChaitinOmega(a) => (Experiment::ChaitinOmega, a),
        Command::ChaitinRotate(a) => (Experiment::ChaitinRotate, a),
        Command::Decohere(a) => (Experiment::Decohere, a),
        Command::Meter(a) => (Experiment::Meter, a),
        Command::EstimateResources(a) => (Experiment::EstimateResources, a),
        Command::StateEvolve(a) => (Experiment::StateEvolve, a),
        Command::Replay { record, out } => {
            let text = std::fs::read_to_string(record).map_err(|e| CliError::Io {
                path: record.display().to_string(),
                message: e.to_string(),
            })?;
            let (report, rerun) = replay(&text)?;
            if let Some(path) = out {
                write_output(&rerun, Some(path))?;
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            return Ok(());
        }
    };
    run_experiment(experiment, args)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
