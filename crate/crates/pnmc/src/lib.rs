//! IO, file formats, and pipeline plumbing around [`pnmc_core`].
//!
//! CSV is the single interchange format (dense matrices with id header row
//! and column, 2-column vectors), JSON the diagnostics format. The `pnmc`
//! binary exposes the `embed`, `ising`, `validate`, and `target`
//! subcommands on top of [`pipeline`].

pub use pnmc_core as core;

pub mod io;
pub mod pipeline;
pub mod report;
pub mod synth;

use std::fmt;

/// Errors from the IO and pipeline layer, split by how the CLI exits:
/// input problems (exit 2) versus contract/numerics failures (exit 1).
#[derive(Debug)]
pub enum Error {
    /// Unreadable, unparseable, or inconsistent input; `line` is the
    /// 1-based CSV line when known.
    Input { message: String, line: Option<u64> },
    /// The computation itself failed or a contract was violated.
    Contract(String),
}

impl Error {
    pub fn input(message: impl Into<String>) -> Self {
        Error::Input { message: message.into(), line: None }
    }

    pub fn input_at(message: impl Into<String>, line: u64) -> Self {
        Error::Input { message: message.into(), line: Some(line) }
    }

    /// "input" or "contract"; the machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input { .. } => "input",
            Error::Contract(_) => "contract",
        }
    }

    pub fn line(&self) -> Option<u64> {
        match self {
            Error::Input { line, .. } => *line,
            Error::Contract(_) => None,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input { message, line: Some(line) } => {
                write!(f, "{message} (line {line})")
            }
            Error::Input { message, line: None } => write!(f, "{message}"),
            Error::Contract(message) => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<pnmc_core::Error> for Error {
    fn from(err: pnmc_core::Error) -> Self {
        use pnmc_core::Error as E;
        match &err {
            E::Input(_) | E::Parameter(_) | E::DegenerateInput(_) | E::DimensionMismatch(_) => {
                Error::input(err.to_string())
            }
            E::Convergence { .. } | E::Numerical(_) | E::Contract(_) => {
                Error::Contract(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::input(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = match err.kind() {
            csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(|p| p.line()),
            csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map(|p| p.line()),
            csv::ErrorKind::Deserialize { pos, .. } => pos.as_ref().map(|p| p.line()),
            _ => None,
        };
        match line {
            Some(line) => Error::input_at(err.to_string(), line),
            None => Error::input(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
