mod args;
mod io;
mod reproduce;
mod verbs;

use std::process::ExitCode;

use clap::Parser;
use cvkit::config::{self, Tolerances};
use cvkit::CvError;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Format};
use crate::io::{sidecar_path, Inputs, Sidecar, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Module(#[from] CvError),
    #[error("{0}")]
    Failed(String),
    #[error("output: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Module(_) | CliError::Failed(_) | CliError::Io(_) => 1,
        }
    }
}

/// What one verb produced.
pub struct Outcome {
    pub result: serde_json::Value,
    pub table: Option<Table>,
    pub sidecar: Option<Sidecar>,
    /// Set by `reproduce` when a check did not pass.
    pub failed: Option<String>,
}

impl Outcome {
    pub fn value<T: Serialize>(v: &T) -> Result<Self, CliError> {
        Ok(Self { result: to_json(v)?, table: None, sidecar: None, failed: None })
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Envelope {
    pub verb: String,
    pub inputs_digest: String,
    pub seed: Option<u64>,
    pub result: serde_json::Value,
}

fn configure(cli: &Cli) -> Result<Tolerances, CliError> {
    if let Ok(v) = std::env::var("CVKIT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("CVKIT_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut tol = Tolerances::default();
    for (name, value) in cli.tol.overrides() {
        tol.set(name, value).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    config::install(tol);
    Ok(tol)
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let tol = configure(&cli)?;
    let verb = cli.verb.name();
    let mut inputs = Inputs::new(verb, &cli.verb, &tol);
    let outcome = verbs::dispatch(&cli.verb, cli.seed, &mut inputs)?;
    let envelope = Envelope { verb: verb.to_string(), inputs_digest: inputs.digest(), seed: cli.seed, result: outcome.result };
    match cli.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Io(e.to_string()))? + "\n";
            print!("{text}");
            if let Some(path) = &cli.out {
                write_file(path, &text)?;
            }
        }
        Format::Csv => {
            let table = outcome
                .table
                .ok_or_else(|| CliError::Usage(format!("`{verb}` has no tabular output; use --format json")))?;
            let text = table.to_csv()?;
            match &cli.out {
                Some(path) => {
                    write_file(path, &text)?;
                    if let Some(side) = &outcome.sidecar {
                        let meta = serde_json::to_string_pretty(side).map_err(|e| CliError::Io(e.to_string()))?;
                        write_file(&sidecar_path(path), &(meta + "\n"))?;
                    }
                }
                None => print!("{text}"),
            }
        }
    }
    match outcome.failed {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
