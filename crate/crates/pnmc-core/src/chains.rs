//! Row-normalized Markov chains and chain validation machinery.

use alloc::format;
use alloc::vec::Vec;

use libm::{fabs, log};

use crate::geometry::KernelMatrix;
use crate::mat::Mat;
use crate::{Error, Result};

/// Default audit tolerance for [`validate`].
pub const DEFAULT_VALIDATE_TOL: f64 = 1e-8;

/// Construction-time sanity bound on row sums and the stationary vector.
/// Constructors guarantee much tighter consistency; this only rejects
/// hand-assembled chains that are not even approximately stochastic.
/// [`MarkovChain::for_audit`] skips it so defective chains can be diagnosed.
const SANITY_TOL: f64 = 1e-4;

/// How a chain was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Rnmc,
    PnmcFree,
    PnmcPrescribed,
    PnmcUpdate,
    /// Ingested from files or produced by a reference optimizer.
    External,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Rnmc => "rnmc",
            Provenance::PnmcFree => "pnmc_free",
            Provenance::PnmcPrescribed => "pnmc_prescribed",
            Provenance::PnmcUpdate => "pnmc_update",
            Provenance::External => "external",
        }
    }
}

/// A row-stochastic transition matrix paired with its stationary
/// distribution and a detailed-balance flag.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    q: Mat,
    p: Vec<f64>,
    reversible: bool,
    provenance: Provenance,
}

impl MarkovChain {
    /// Wraps a transition matrix and stationary vector. Checks structure
    /// (shape, finiteness, nonnegative `q`, strictly positive `p`) and loose
    /// normalization; [`validate`] is the precise audit.
    pub fn new(q: Mat, p: Vec<f64>, reversible: bool, provenance: Provenance) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix must be square, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        if p.len() != q.rows() {
            return Err(Error::DimensionMismatch(format!(
                "stationary vector has {} entries for {} states",
                p.len(),
                q.rows()
            )));
        }
        if !q.all_finite() || q.iter().any(|v| *v < 0.0) {
            return Err(Error::Input(
                "transition matrix has negative or non-finite entries".into(),
            ));
        }
        if p.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Input(
                "stationary vector must be strictly positive and finite".into(),
            ));
        }
        let p_sum: f64 = p.iter().sum();
        if fabs(p_sum - 1.0) > SANITY_TOL {
            return Err(Error::Input(format!(
                "stationary vector sums to {p_sum}, expected 1"
            )));
        }
        for (a, sum) in q.row_sums().iter().enumerate() {
            if fabs(sum - 1.0) > SANITY_TOL {
                return Err(Error::Input(format!(
                    "row {a} of the transition matrix sums to {sum}, expected 1"
                )));
            }
        }
        Ok(MarkovChain { q, p, reversible, provenance })
    }

    /// Structural checks only (shapes, finiteness, nonnegative `q`, positive
    /// `p`): admits chains that are not stochastic at all, so [`validate`]
    /// can report how far off they are.
    pub fn for_audit(q: Mat, p: Vec<f64>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix must be square, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        if p.len() != q.rows() {
            return Err(Error::DimensionMismatch(format!(
                "stationary vector has {} entries for {} states",
                p.len(),
                q.rows()
            )));
        }
        if !q.all_finite() || q.iter().any(|v| *v < 0.0) {
            return Err(Error::Input(
                "transition matrix has negative or non-finite entries".into(),
            ));
        }
        if p.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Input(
                "stationary vector must be strictly positive and finite".into(),
            ));
        }
        Ok(MarkovChain {
            q,
            p,
            reversible: false,
            provenance: Provenance::External,
        })
    }

    /// Crate-internal assembly for constructors whose math guarantees
    /// consistency.
    pub(crate) fn assemble(
        q: Mat,
        p: Vec<f64>,
        reversible: bool,
        provenance: Provenance,
    ) -> Self {
        MarkovChain { q, p, reversible, provenance }
    }

    pub fn len(&self) -> usize {
        self.q.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.rows() == 0
    }

    pub fn transitions(&self) -> &Mat {
        &self.q
    }

    pub fn stationary(&self) -> &[f64] {
        &self.p
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.q[(a, b)]
    }

    /// Path entropy rate `-sum_ab p_a q_ab log q_ab` (natural log,
    /// `0 log 0 = 0`).
    pub fn path_entropy(&self) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let q = self.q[(a, b)];
                if q > 0.0 {
                    s -= self.p[a] * q * log(q);
                }
            }
        }
        s
    }

    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Row normalization: `q_ab = Delta(a,b) / Z(a)` with `Z(a) = sum_b
/// Delta(a,b)`; the stationary distribution is `p_a = Z(a) / sum_c Z(c)`.
/// Symmetric kernels give reversible chains.
pub fn rnmc(kernel: &KernelMatrix) -> MarkovChain {
    let n = kernel.len();
    let z = kernel.matrix().row_sums();
    let z_total: f64 = z.iter().sum();
    let mut q = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            q[(a, b)] = kernel.get(a, b) / z[a];
        }
    }
    let p = z.iter().map(|za| za / z_total).collect();
    MarkovChain {
        q,
        p,
        reversible: true,
        provenance: Provenance::Rnmc,
    }
}

/// Residual report from [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `max_a |sum_b q_ab - 1|` and the row attaining it.
    pub max_row_sum_deviation: f64,
    pub worst_row: usize,
    /// `max_b |(p^T q)_b - p_b|` and the state attaining it.
    pub max_stationarity_residual: f64,
    pub worst_state: usize,
    /// `max_ab |p_a q_ab - p_b q_ba|` and the pair attaining it.
    pub max_detailed_balance_residual: f64,
    pub worst_pair: (usize, usize),
    pub tol: f64,
    pub pass: bool,
}

/// Audits a chain: row-stochasticity, stationarity of `p`, and detailed
/// balance, each in the max norm, with pass/fail against `tol`.
pub fn validate(chain: &MarkovChain, tol: f64) -> Diagnostics {
    let n = chain.len();
    let q = chain.transitions();
    let p = chain.stationary();

    let mut max_row = 0.0;
    let mut worst_row = 0;
    for (a, sum) in q.row_sums().iter().enumerate() {
        let dev = fabs(sum - 1.0);
        if dev > max_row {
            max_row = dev;
            worst_row = a;
        }
    }

    let ptq = q.vecmat(p);
    let mut max_stat = 0.0;
    let mut worst_state = 0;
    for b in 0..n {
        let dev = fabs(ptq[b] - p[b]);
        if dev > max_stat {
            max_stat = dev;
            worst_state = b;
        }
    }

    let mut max_db = 0.0;
    let mut worst_pair = (0, 0);
    for a in 0..n {
        for b in (a + 1)..n {
            let dev = fabs(p[a] * q[(a, b)] - p[b] * q[(b, a)]);
            if dev > max_db {
                max_db = dev;
                worst_pair = (a, b);
            }
        }
    }

    let pass = max_row <= tol && max_stat <= tol && max_db <= tol;
    Diagnostics {
        max_row_sum_deviation: max_row,
        worst_row,
        max_stationarity_residual: max_stat,
        worst_state,
        max_detailed_balance_residual: max_db,
        worst_pair,
        tol,
        pass,
    }
}

/// Path-ensemble average `sum_ab p_a q_ab r_ab` of a per-transition
/// observable `r`.
pub fn path_average(chain: &MarkovChain, r: &Mat) -> Result<f64> {
    let n = chain.len();
    if r.rows() != n || r.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{} for a {n}-state chain",
            r.rows(),
            r.cols()
        )));
    }
    let q = chain.transitions();
    let p = chain.stationary();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            acc += p[a] * q[(a, b)] * r[(a, b)];
        }
    }
    Ok(acc)
}
