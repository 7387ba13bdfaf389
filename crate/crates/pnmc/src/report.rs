//! JSON-serializable diagnostic reports.

use serde::{Deserialize, Serialize};

use pnmc_core::chains::Diagnostics;
use pnmc_core::embedding::Embedding;
use pnmc_core::maxent::{PerronPair, ScalingVector};

use crate::Error;

/// Chain audit: worst residual per invariant, localized by index and id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub max_row_sum_deviation: f64,
    pub worst_row: usize,
    pub worst_row_id: Option<String>,
    pub max_stationarity_residual: f64,
    pub worst_state: usize,
    pub worst_state_id: Option<String>,
    pub max_detailed_balance_residual: f64,
    pub worst_pair: (usize, usize),
    pub tol: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn new(d: &Diagnostics, ids: Option<&[String]>) -> Self {
        ValidationReport {
            max_row_sum_deviation: d.max_row_sum_deviation,
            worst_row: d.worst_row,
            worst_row_id: ids.map(|ids| ids[d.worst_row].clone()),
            max_stationarity_residual: d.max_stationarity_residual,
            worst_state: d.worst_state,
            worst_state_id: ids.map(|ids| ids[d.worst_state].clone()),
            max_detailed_balance_residual: d.max_detailed_balance_residual,
            worst_pair: d.worst_pair,
            tol: d.tol,
            pass: d.pass,
        }
    }
}

/// Spectral sidecar for an embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    pub m: usize,
    /// `m + 1` values including the trivial leading eigenvalue.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub degenerate_gaps: Vec<usize>,
}

impl EigenReport {
    pub fn new(embedding: &Embedding) -> Self {
        EigenReport {
            m: embedding.coords.cols(),
            eigenvalues: embedding.eigenvalues.clone(),
            residuals: embedding.residuals.clone(),
            degenerate_gaps: embedding.degenerate_gaps.clone(),
        }
    }
}

/// Iteration counts and residual traces from the max-entropy solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverTelemetry {
    pub solver: String,
    pub iterations: usize,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl SolverTelemetry {
    pub fn from_perron(pair: &PerronPair) -> Self {
        SolverTelemetry {
            solver: "perron_power_iteration".to_string(),
            iterations: pair.iterations,
            residual: pair.residual,
            trace: Vec::new(),
        }
    }

    pub fn from_scaling(scaling: &ScalingVector) -> Self {
        SolverTelemetry {
            solver: "sinkhorn_symmetric_scaling".to_string(),
            iterations: scaling.iterations,
            residual: scaling.residual,
            trace: scaling.trace.clone(),
        }
    }
}

/// Machine-readable error body emitted on standard error.
pub fn error_json(err: &Error) -> String {
    let mut body = serde_json::json!({
        "kind": err.kind(),
        "message": err.to_string(),
    });
    if let Some(line) = err.line() {
        body["line"] = serde_json::json!(line);
    }
    serde_json::json!({ "error": body }).to_string()
}
