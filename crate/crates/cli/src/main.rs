use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mharm::nn::Checkpoint;
use mharm_cli::commands::{self, EvalArgs, HarmonizeArgs, PrepareArgs, ServeArgs, SynthArgs, TrainArgs};

/// Melody harmonization with a masked BiLSTM chord model.
#[derive(Debug, Parser)]
#[command(name = "mharm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize, quantize and split a lead-sheet corpus.
    Prepare(PrepareArgs),
    /// Train a model on prepared data.
    Train(TrainArgs),
    /// Generate chords for lead-sheet melodies.
    Harmonize(HarmonizeArgs),
    /// Print objective metrics, optionally for model harmonizations.
    Eval(EvalArgs),
    /// Write a synthetic lead-sheet corpus.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Prepare(a) => commands::prepare(&a, &mut out),
        Command::Train(a) => commands::train_cmd(&a, &mut out),
        Command::Harmonize(a) => commands::harmonize_cmd(&a, &mut out),
        Command::Eval(a) => commands::eval_cmd(&a, &mut out),
        Command::Synth(a) => commands::synth_cmd(&a, &mut out),
        Command::Serve(a) => {
            let model = Checkpoint::load(&a.checkpoint)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(mharm_cli::server::serve(model, &a.bind))
        }
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
