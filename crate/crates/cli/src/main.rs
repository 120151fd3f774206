use clap::{Parser, Subcommand};
use combnoise::config::{self, Format, RunConfig};
use combnoise::{execute, CliError, Command};
use std::path::PathBuf;
use std::process::ExitCode;

/// Quantum noise floors of frequency-comb measurements.
#[derive(Parser)]
#[command(name = "combnoise", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Phase-noise suppression ratio against RMS modal bandwidth.
    OfdSweep(RunArgs),
    /// Dual-comb SNR advantage against absorption depth.
    DcsAdvantage(RunArgs),
    /// Cyclostationary photocurrent variance traces and sampled spectra.
    CycloTrace(RunArgs),
    /// Oracle, reduction and Monte-Carlo checks.
    Validate(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON config or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (command, args) = match cli.command {
        Cmd::OfdSweep(a) => (Command::OfdSweep, a),
        Cmd::DcsAdvantage(a) => (Command::DcsAdvantage, a),
        Cmd::CycloTrace(a) => (Command::CycloTrace, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let mut cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(format) = args.format {
        cfg.format = format;
    }
    let out = args
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = execute(command, &cfg, &out)?;
    for f in &outcome.files {
        println!("{}", out.join(f).display());
    }
    if !outcome.passed {
        eprintln!(
            "{} checks failed: {}",
            command.name(),
            outcome.summary["failed"]
        );
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
