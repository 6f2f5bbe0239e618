use std::io::Write;
use std::num::NonZeroU64;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use attnsim::sim::{self, RunConfig, SimError};
use attnsim::{Capacity, ModelKind};

#[derive(Parser)]
#[command(name = "attnsim", about = "Replay annotated dialogues through stack and cache models of attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Stack,
    Cache,
}

#[derive(Subcommand)]
enum Command {
    /// Run one model over a transcript.
    Run {
        #[arg(long, value_enum)]
        model: Model,
        /// Cache size in items, or `inf`.
        #[arg(long, default_value_t = Capacity::default())]
        capacity: Capacity,
        /// Effort charged per item moved by cued retrieval.
        #[arg(long, default_value = "1")]
        cost: NonZeroU64,
        /// Write the per-utterance trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        file: PathBuf,
    },
    /// Run both models and report where their resolutions diverge.
    Compare { file: PathBuf },
    /// Classify the return pops of a CASE-annotated corpus.
    Pops { file: PathBuf },
}

/// Writes a report to stdout. A closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from).and_then(|()| writeln!(out));
}

fn execute(command: Command) -> Result<(), SimError> {
    match command {
        Command::Run { model, capacity, cost, trace, file } => {
            let model = match model {
                Model::Stack => ModelKind::Stack,
                Model::Cache => ModelKind::Cache,
            };
            let config = RunConfig { model, capacity, retrieval_cost: cost, transcript_path: file, trace_out: trace };
            print_json(&sim::run(&config)?);
        }
        Command::Compare { file } => print_json(&sim::compare(&sim::load(&file)?)?),
        Command::Pops { file } => print_json(&attnsim::classify_corpus(&sim::load(&file)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("attnsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
