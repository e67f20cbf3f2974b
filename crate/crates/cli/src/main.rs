//! `scorecheck`: evaluate scores, check properties, simulate networks and run attacks.

mod attack;
mod common;
mod score;
mod simulate;
mod topology;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "scorecheck", version, about = "Gossipsub peer-score model checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score neighbors from a counters file.
    ScoreEval(score::ScoreEvalArgs),
    /// Search for a counterexample to one of the score properties.
    Check(score::CheckArgs),
    /// Run an event file over a topology and record the trace.
    Simulate(simulate::SimulateArgs),
    /// Generate an attack script.
    AttackSynth(attack::SynthArgs),
    /// Run an attack script or a built-in scenario and validate it.
    AttackRun(attack::RunArgs),
    /// Generate, inspect or normalize topologies.
    #[command(subcommand)]
    Topology(topology::TopologyCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ScoreEval(a) => score::score_eval(a),
        Command::Check(a) => score::check(a),
        Command::Simulate(a) => simulate::simulate(a),
        Command::AttackSynth(a) => attack::synth(a),
        Command::AttackRun(a) => attack::run(a),
        Command::Topology(c) => topology::run(c),
    };
    match result {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
