//! Command-line harness for the Gaussian randomization experiments.
//!
//! Exit codes: 0 success, 1 invalid input (or a failing selftest), 2 numerical
//! non-convergence, 3 I/O failure.

mod args;
mod commands;
mod specs;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::Params;

#[derive(Parser)]
#[command(name = "gausslit", version, about = "Gaussian randomization of Hardy-space series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// H^p norm of a series on the boundary grid
    Norm(Params),
    /// Finite-section operator norm and Schur bound of a covariance family
    Covnorm(Params),
    /// One realization of the process
    Sample(Params),
    /// Monte Carlo estimate of the mixed norm of Rf
    Estimate(Params),
    /// Bound reports for the randomization operator
    Verify(Params),
    /// Exponential-square integrability estimate
    Expint(Params),
    /// Deterministic versus randomized norms across degrees
    Sweep(Params),
    /// Multiplier, decay, Wiener and lacunary diagnostics
    Diag(Params),
    /// Run the acceptance suite
    Selftest(Params),
}

/// A user-facing validation failure (exit code 1).
#[derive(Debug)]
pub struct Validation(pub String);

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gausslit::Error>() {
            return match e {
                gausslit::Error::NotConverged { .. } => 2,
                gausslit::Error::Io(_) => 3,
                gausslit::Error::Csv(c) if c.is_io_error() => 3,
                gausslit::Error::Json(j) if j.is_io() => 3,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
        if cause.is::<Validation>() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
