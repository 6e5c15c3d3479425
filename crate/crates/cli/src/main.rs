//! `w2slab`: verification suites and experiments from the command line.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use commands::Outcome;
use config::ExperimentConfig;
use error::Result;
use report::OutDir;

#[derive(Debug, Parser)]
#[command(name = "w2slab", version, about = "Weak-to-strong generalization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every identity and inequality suite.
    Verify(Common),
    /// Sweep the random-feature ridge misfit against its closed-form bound.
    Ridge(Common),
    /// Train students under smoothed pseudo-labels across losses and alphas.
    Classify(Common),
    /// Estimate per-point bias and variance from repeated teacher/student runs.
    BiasVariance(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Config file: top-level keys plus an optional section named after the command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set seed=3` or `--set alphas=0,0.1,1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Directory for the CSV and JSON outputs.
    #[arg(long)]
    out: PathBuf,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Verify(c) => ("verify", c),
            Command::Ridge(c) => ("ridge", c),
            Command::Classify(c) => ("classify", c),
            Command::BiasVariance(c) => ("bias-variance", c),
        }
    }
}

fn finish<R: Serialize>(cfg: &ExperimentConfig, out: &OutDir, outcome: Outcome<R>, start: Instant) -> Result<bool> {
    let elapsed = start.elapsed().as_secs_f64();
    let path = out.write_report(cfg, &outcome.rows, &outcome.verdicts, elapsed)?;
    for v in &outcome.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("report written to {}", path.display());
    let failed: Vec<&str> = outcome.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn run(command: &Command) -> Result<bool> {
    let (name, common) = command.parts();
    let env_seed = std::env::var("W2SLAB_SEED").ok();
    let cfg = ExperimentConfig::load(name, common.config.as_deref(), &common.sets, env_seed.as_deref())?;
    let start = Instant::now();
    let out = OutDir::create(&common.out)?;
    match name {
        "verify" => finish(&cfg, &out, commands::verify(&cfg, &out)?, start),
        "ridge" => finish(&cfg, &out, commands::ridge(&cfg, &out)?, start),
        "classify" => finish(&cfg, &out, commands::classify(&cfg, &out)?, start),
        _ => finish(&cfg, &out, commands::bias_variance(&cfg, &out)?, start),
    }
}

fn main() -> ExitCode {
    let mut cmd = Cli::command();
    for name in config::COMMANDS {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(config::schema_help(name)));
    }
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
