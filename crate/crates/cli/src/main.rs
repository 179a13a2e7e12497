use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use antnav::{run, Subcommand};

#[derive(Clone, Copy, Debug, clap::Subcommand)]
enum Command {
    /// Render the world and save its database, route and grid.
    GenWorld,
    /// Visual compass against one route snapshot.
    CompassDemo,
    /// Perfect Memory heading errors over the grid.
    PmEval,
    /// Perfect Memory across training frequencies.
    PmFreq,
    /// Perfect Memory across blur and resize settings.
    PmPrep,
    /// Train the familiarity classifier and save it.
    MlpTrain,
    /// Cross-validated hyperparameter search.
    MlpGrid,
    /// Classifier headings with full and forward scan arcs.
    MlpEval,
    /// Snapshot rate of change at bends and corner-boosted training.
    MlpCorners,
    /// Familiarity curves while rotating on the spot.
    MlpConfidence,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::GenWorld => Subcommand::GenWorld,
            Command::CompassDemo => Subcommand::CompassDemo,
            Command::PmEval => Subcommand::PmEval,
            Command::PmFreq => Subcommand::PmFreq,
            Command::PmPrep => Subcommand::PmPrep,
            Command::MlpTrain => Subcommand::MlpTrain,
            Command::MlpGrid => Subcommand::MlpGrid,
            Command::MlpEval => Subcommand::MlpEval,
            Command::MlpCorners => Subcommand::MlpCorners,
            Command::MlpConfidence => Subcommand::MlpConfidence,
        }
    }
}

/// Ant-inspired visual navigation experiments.
#[derive(Parser, Debug)]
#[command(name = "antnav", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// World seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(config) = args.config else {
        Args::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "--config <CONFIG> is required",
            )
            .exit();
    };
    match run(args.command.into(), &config, args.out.as_deref(), args.seed) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("antnav: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
