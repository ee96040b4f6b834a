//! `dnlab`: runs and validates experiment configurations.
//!
//! Exit codes: 0 all checks passed, 1 a check failed (artifacts are still
//! written), 2 config error, 3 solver failure, 4 i/o error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod expr;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{parse_config, Overrides};
use experiments::RunError;

#[derive(Parser)]
#[command(name = "dnlab", version, about = "Experiments for the doubly nonlinear parabolic problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomized checks (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Allow p = 2 as a linear sanity check.
        #[arg(long)]
        sanity_p2: bool,
    },
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        sanity_p2: bool,
    },
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| RunError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn run(config: &Path, overrides: &Overrides) -> Result<bool, RunError> {
    let text = read(config)?;
    let cfg = parse_config(&text, base_dir(config), overrides).map_err(RunError::Config)?;
    let sha = format!("{:x}", Sha256::digest(text.as_bytes()));
    let pass = experiments::run(&cfg, &sha)?;
    println!("{}: {} ({})", cfg.kind.name(), if pass { "pass" } else { "FAIL" }, cfg.output.join("manifest.json").display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, sanity_p2 } => match run(&config, &Overrides { seed, sanity_p2, out }) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprint!("{e}");
                ExitCode::from(e.exit_code())
            }
        },
        Command::Validate { config, sanity_p2 } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(e.exit_code());
                }
            };
            let overrides = Overrides { sanity_p2, ..Default::default() };
            let errors: Vec<String> = match parse_config(&text, base_dir(&config), &overrides) {
                Ok(_) => Vec::new(),
                Err(errors) => errors.iter().map(ToString::to_string).collect(),
            };
            let report = json!({ "config": config.display().to_string(), "errors": errors });
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if errors.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
