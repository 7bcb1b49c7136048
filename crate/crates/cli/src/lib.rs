//! Command-line front end for the problab library.
//!
//! `run` is the whole program behind `main`: parse arguments, resolve the
//! master seed (flag, then environment, then default), size the worker pool,
//! execute the experiment, and emit the result. It returns a status instead
//! of exiting so integration tests can drive it in-process.
//!
//! Exit codes: 0 = ran cleanly, 1 = any error, 2 = a conjecture violation
//! was found (the run itself succeeded; see the witness file).

pub mod args;
pub mod config;
pub mod exec;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser as _;
use problab_core::{Error, Result};

use crate::args::{Cli, Invocation};
use crate::config::{ExperimentConfig, DEFAULT_SEED, SEED_ENV_VAR};

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Clean,
    /// A checked conjecture failed on some input; a witness file was written.
    ViolationFound,
}

/// Parse `argv` and run it to completion.
pub fn run<I, T>(argv: I) -> Result<RunStatus>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(RunStatus::Clean);
        }
        Err(e) => return Err(Error::Parse(e.to_string())),
    };

    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Error::invalid("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    }

    let seed = match cli.seed {
        Some(seed) => seed,
        None => match std::env::var(SEED_ENV_VAR) {
            Ok(text) => text
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{SEED_ENV_VAR}={text:?}: {e}")))?,
            Err(_) => DEFAULT_SEED,
        },
    };

    match cli.command.into_invocation() {
        Invocation::Selftest => {
            selftest::selftest()?;
            Ok(RunStatus::Clean)
        }
        Invocation::Rerun(from) => {
            if cli.seed.is_some() {
                eprintln!("note: rerun uses the seed embedded in the config; --seed is ignored");
            }
            let text = std::fs::read_to_string(&from).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", from.display())))
            })?;
            let config = output::extract_config(&text)?;
            execute(&config, cli.out.as_deref())
        }
        Invocation::Experiment(op) => {
            execute(&ExperimentConfig::new(seed, op), cli.out.as_deref())
        }
    }
}

/// Process exit code for a finished invocation: 0 clean, 1 error,
/// 2 violation found.
pub fn status_code(outcome: &Result<RunStatus>) -> u8 {
    match outcome {
        Ok(RunStatus::Clean) => 0,
        Ok(RunStatus::ViolationFound) => 2,
        Err(_) => 1,
    }
}

fn execute(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunStatus> {

    let outcome = exec::run_experiment(config)?;
    let text = outcome.record.render();
    match out {
        Some(path) => {
            output::write_atomic(path, &text)?;
            println!("wrote {} ({} data rows)", path.display(), outcome.record.rows.len());
        }
        None => print!("{text}"),
    }
    if outcome.violation {
        if let Some(witness) = &outcome.witness_path {
            eprintln!("violation found; witness written to {}", witness.display());
        }
        return Ok(RunStatus::ViolationFound);
    }
    Ok(RunStatus::Clean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(status_code(&Ok(RunStatus::Clean)), 0);
        assert_eq!(status_code(&Err(Error::invalid("boom"))), 1);
        assert_eq!(status_code(&Ok(RunStatus::ViolationFound)), 2);
    }
}
