use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use hawkes_malliavin::cli::{exit_code, output_dir, run, Command, RunOptions};
use hawkes_malliavin::config::RunConfig;
use hawkes_malliavin::Parallelism;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Simulate,
    DensityCheck,
    IbpCheck,
    UnitMass,
    MeanIntensity,
    SdeDensity,
    Greeks,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::DensityCheck => Command::DensityCheck,
            Cmd::IbpCheck => Command::IbpCheck,
            Cmd::UnitMass => Command::UnitMass,
            Cmd::MeanIntensity => Command::MeanIntensity,
            Cmd::SdeDensity => Command::SdeDensity,
            Cmd::Greeks => Command::Greeks,
        }
    }
}

/// Monte Carlo checks for nonlinear Hawkes processes and their jump-time
/// Malliavin calculus.
#[derive(Debug, Parser)]
#[command(name = "hawkes-mc", version)]
struct Args {
    command: Cmd,
    /// TOML run configuration; the reference setup is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Directory for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp comment so identical runs give identical bytes.
    #[arg(long)]
    no_timestamp: bool,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match &args.config {
        Some(path) => RunConfig::from_path(path),
        None => Ok(RunConfig::default()),
    };
    let mut config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.paths = paths;
    }
    let options = RunOptions {
        out_dir: output_dir(args.out.as_deref(), &config),
        timestamp: !args.no_timestamp,
        parallelism: Parallelism(args.threads),
    };
    let command = Command::from(args.command);
    let result = run(command, &config, &options);
    match &result {
        Ok(outcome) => {
            // A closed pipe (e.g. `| head`) must not turn a finished run into a panic.
            let mut out = std::io::stdout().lock();
            for line in &outcome.summary {
                let _ = writeln!(out, "{line}");
            }
            for file in &outcome.files {
                let _ = writeln!(out, "wrote {}", file.display());
            }
            let verdict = if outcome.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{}: {verdict}", command.name());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
