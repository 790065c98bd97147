mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "uamplan", version, about = "Communication-aware ride-sharing trajectory planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the expected-SINR radio map of a scenario.
    BuildMap(Common),
    /// Fly a classical planner with arrival-driven replanning.
    Plan(Common),
    /// Train the attention policy.
    Train(Common),
    /// Roll out a trained policy greedily.
    Eval(Common),
    /// Sweep methods over SINR thresholds.
    Compare(Common),
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Scenario JSON, or `builtin:desk`.
    #[arg(long)]
    pub scenario: String,
    /// Radio map built by `build-map`; built on the fly when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// cptsp, pdpcc, straight or msha. Repeatable for `compare`.
    #[arg(long)]
    pub method: Vec<String>,
    /// SINR threshold in dB. Repeatable for `compare`.
    #[arg(long = "threshold-db", allow_negative_numbers = true)]
    pub threshold_db: Vec<f64>,
    /// Policy checkpoint for `eval` and the msha method of `compare`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON overrides with optional `env`, `model`, `train` and
    /// `checkpoint_every` entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Process exit codes.
pub mod exit {
    pub const VALIDATION: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const NUMERIC: u8 = 5;
    pub const IO: u8 = 6;
    pub const OTHER: u8 = 1;
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use uamplan::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. } | E::Validation { .. } | E::Config(_) | E::Domain(_) | E::Action { .. } | E::Format(_) => {
                    exit::VALIDATION
                }
                E::InfeasibleEndpoint { .. } | E::Unreachable { .. } => exit::INFEASIBLE,
                E::Numeric(_) => exit::NUMERIC,
                E::Io(_) => exit::IO,
                E::State(_) | E::Shape { .. } | E::Contract(_) => exit::OTHER,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return exit::VALIDATION;
        }
    }
    exit::OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildMap(a) => commands::build_map(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
