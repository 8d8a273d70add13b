//! `spl`: command-line harness for the self-paced learning toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

mod compare;
mod config;
mod curriculum;
mod derive;
mod fit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{load, merge, Globals};

#[derive(Parser, Debug)]
#[command(name = "spl", version, about = "Self-paced learning through concave conjugacy")]
struct Cli {
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a regularizer from a weight function or a penalty and dump its
    /// triple with a validation report.
    Derive(derive::DeriveArgs),
    /// Check a catalog or designed regularizer.
    Validate(derive::ValidateArgs),
    /// Latent objective under a curriculum region on a 2-D loss lattice.
    Curriculum(curriculum::CurriculumArgs),
    /// Self-paced fit of a linear model on a CSV dataset.
    Fit(fit::FitArgs),
    /// SPL against ridge on seeded data with outliers.
    Compare(compare::CompareArgs),
}

pub enum Status {
    Ok,
    Invalid,
    Capped,
}

/// A mathematical failure (exit code 2) as opposed to bad input (exit code 1).
#[derive(Debug)]
pub struct MathFailure(pub String);

impl std::fmt::Display for MathFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for MathFailure {}

fn run(cli: Cli) -> Result<Status> {
    let (file, file_out, file_seed) = load(cli.config.as_deref())?;
    let globals = Globals {
        out: cli.out.or(file_out).unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed.or(file_seed).unwrap_or(0),
    };
    match cli.command {
        Command::Derive(a) => derive::derive(merge(&a, file)?, &globals),
        Command::Validate(a) => derive::validate(merge(&a, file)?, &globals),
        Command::Curriculum(a) => curriculum::run(merge(&a, file)?, &globals),
        Command::Fit(a) => fit::run(merge(&a, file)?, &globals),
        Command::Compare(a) => compare::run(merge(&a, file)?, &globals),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Invalid) => ExitCode::from(2),
        Ok(Status::Capped) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<MathFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
