#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] madmm::data::DataError),
    #[error("data error: {path}: {source}")]
    DataFile {
        path: String,
        source: madmm::data::DataError,
    },
    #[error("solver failure: {0}")]
    Solver(madmm::Error),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl From<madmm::Error> for CliError {
    fn from(e: madmm::Error) -> Self {
        match e {
            madmm::Error::Config(msg) => CliError::Config(msg),
            e @ madmm::Error::BetaCondition { .. } => CliError::Config(e.to_string()),
            madmm::Error::Data(d) => CliError::Data(d),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::DataFile { .. } => 3,
            CliError::Solver(_) | CliError::Output(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match args::Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run::execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
