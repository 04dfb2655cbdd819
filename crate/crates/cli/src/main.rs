mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{eval, fit_check, learn, sample, separate};

/// Phase-aware monaural source separation.
#[derive(Debug, Parser)]
#[command(name = "cisnmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Learn(learn::LearnArgs),
    Separate(separate::SeparateArgs),
    Eval(eval::EvalArgs),
    FitCheck(fit_check::FitCheckArgs),
    Sample(sample::SampleArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Learn(a) => learn::run(a),
        Command::Separate(a) => separate::run(a),
        Command::Eval(a) => eval::run(a),
        Command::FitCheck(a) => fit_check::run(a),
        Command::Sample(a) => sample::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
