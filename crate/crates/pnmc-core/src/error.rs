use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed input data (non-finite coordinates, duplicate ids, ...).
    Input(String),
    /// A parameter outside its admissible range.
    Parameter(String),
    /// Structurally valid input on which the operation is undefined
    /// (duplicate points corrupting an adaptive bandwidth, zero rows, ...).
    DegenerateInput(String),
    /// Operands whose shapes do not line up.
    DimensionMismatch(String),
    /// An iterative solver ran out of iterations. `trace` holds the residual
    /// history when the solver records one.
    Convergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    /// Arithmetic broke down (non-finite iterates, residual blow-up).
    Numerical(String),
    /// A caller-supplied value violates a documented contract.
    Contract(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Convergence {
                context,
                iterations,
                residual,
                ..
            } => write!(
                f,
                "{context} failed to converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
