//! `mepsnet`: synthesize spatially heterogeneous distortion datasets and
//! train, evaluate, and inspect the mixture-of-experts restoration network.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod appconfig;
mod commands;

use clap::{Parser, Subcommand};

use commands::{EvalArgs, GenerateArgs, InspectCmd, RestoreArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "mepsnet", version, about = "Distortion dataset synthesis and restoration training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a distorted dataset from clean PNGs
    Generate(GenerateArgs),
    /// Train the restoration network on a generated dataset
    Train(TrainArgs),
    /// Score a checkpoint (or the identity baseline) on a split
    Eval(EvalArgs),
    /// Run a checkpoint over PNGs and write restored images
    Restore(RestoreArgs),
    /// Diagnostics: gradients, parameter census, features, noise spectrum
    #[command(subcommand)]
    Inspect(InspectCmd),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Restore(args) => commands::restore(args),
        Command::Inspect(cmd) => commands::inspect(cmd),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
