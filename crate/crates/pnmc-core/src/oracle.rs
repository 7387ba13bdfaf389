//! Brute-force reference optimizers used to anchor the analytic chain
//! constructions in tests.
//!
//! [`maximize_objective`] climbs the constrained path-entropy objective
//! directly, parameterized by the symmetric edge measure `mu_ab = p_a q_ab`:
//! symmetry makes detailed balance automatic, and the remaining constraints
//! (total mass one, optionally fixed row sums) are convex sets handled by
//! Euclidean projection. Multi-restart projected ascent on a concave
//! objective over at most 4 states is slow and dumb on purpose — it shares
//! no machinery with the eigenvector and scaling solvers it checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, log};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chains::{path_average, MarkovChain, Provenance};
use crate::mat::Mat;
use crate::targets::StationaryTarget;
use crate::{Error, Result};

/// Default number of random restarts.
pub const DEFAULT_RESTARTS: usize = 50;

/// Largest state count the brute-force maximizer accepts.
pub const MAX_STATES: usize = 4;

const MAX_ASCENT_ITER: usize = 60_000;

/// The constrained path-entropy program: maximize
/// `-sum_ab p_a q_ab log q_ab - (1 / 2 eps^2) sum_ab p_a q_ab d2_ab`
/// over reversible chains, with the stationary distribution either free or
/// fixed to `fixed_p`.
#[derive(Debug, Clone)]
pub struct ChainObjective {
    epsilon: f64,
    d2: Mat,
    fixed_p: Option<StationaryTarget>,
}

impl ChainObjective {
    /// `d2` must be square, symmetric, nonnegative, and zero on the
    /// diagonal; `fixed_p`, when given, must match its size.
    pub fn new(epsilon: f64, d2: Mat, fixed_p: Option<StationaryTarget>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Parameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !d2.is_square() {
            return Err(Error::DimensionMismatch("cost matrix must be square".into()));
        }
        if !d2.all_finite() || d2.iter().any(|v| *v < 0.0) {
            return Err(Error::Input(
                "cost matrix must be nonnegative and finite".into(),
            ));
        }
        if (0..d2.rows()).any(|i| d2[(i, i)] != 0.0) {
            return Err(Error::Input("cost matrix diagonal must be zero".into()));
        }
        if d2.asymmetry() > 1e-12 {
            return Err(Error::Input("cost matrix must be symmetric".into()));
        }
        if let Some(p) = &fixed_p {
            if p.len() != d2.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "fixed stationary target has {} entries for {} states",
                    p.len(),
                    d2.rows()
                )));
            }
        }
        Ok(ChainObjective { epsilon, d2, fixed_p })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d2(&self) -> &Mat {
        &self.d2
    }

    pub fn fixed_p(&self) -> Option<&StationaryTarget> {
        self.fixed_p.as_ref()
    }

    fn multiplier(&self) -> f64 {
        1.0 / (2.0 * self.epsilon * self.epsilon)
    }

    fn len(&self) -> usize {
        self.d2.rows()
    }
}

/// Objective value of a chain under the program: path entropy minus the
/// weighted path-ensemble average of the cost.
pub fn objective_value(obj: &ChainObjective, chain: &MarkovChain) -> Result<f64> {
    Ok(chain.path_entropy() - obj.multiplier() * path_average(chain, &obj.d2)?)
}

/// Multi-restart projected gradient ascent on the edge measure. Returns the
/// best chain found; `tol` controls how small an accepted step must get
/// before a restart is considered converged.
pub fn maximize_objective(
    obj: &ChainObjective,
    restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<MarkovChain> {
    let n = obj.len();
    if n < 2 || n > MAX_STATES {
        return Err(Error::Parameter(format!(
            "brute-force maximizer handles 2..={MAX_STATES} states, got {n}"
        )));
    }
    if restarts < 1 {
        return Err(Error::Parameter("need at least 1 restart".into()));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Parameter(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if let Some(p) = &obj.fixed_p {
        if p.probabilities().iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Input("fixed stationary target must be positive".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Mat)> = None;
    for restart in 0..restarts {
        let mut mu = start_measure(obj, restart, &mut rng);
        project(obj, &mut mu);
        let value = ascend(obj, &mut mu, tol);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, mu));
        }
    }
    let (_, mu) = best.unwrap();
    chain_from_edge_measure(&mu)
}

/// Numerically maximizes `-sum_b q_b log q_b - (1 / 2 eps^2) sum_b q_b d2_b`
/// over the probability simplex by projected gradient ascent. The analytic
/// maximizer is the Gibbs row `q_b ∝ exp(-d2_b / 2 eps^2)`; returning the
/// numerical one lets tests confirm that claim independently.
pub fn local_maxent_check(d2_row: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let n = d2_row.len();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 outcomes, got {n}")));
    }
    if d2_row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input("costs must be nonnegative and finite".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let c = 1.0 / (2.0 * epsilon * epsilon);
    let value = |q: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (qb, d) in q.iter().zip(d2_row) {
            if *qb > 0.0 {
                acc -= qb * log(*qb);
            }
            acc -= c * qb * d;
        }
        acc
    };
    let mut q = vec![1.0 / n as f64; n];
    let mut f = value(&q);
    let mut step = 0.1;
    for _ in 0..20_000 {
        let mut trial: Vec<f64> = q
            .iter()
            .zip(d2_row)
            .map(|(qb, d)| qb + step * (-log(qb.max(1e-300)) - 1.0 - c * d))
            .collect();
        simplex_project(&mut trial);
        let ft = value(&trial);
        if ft > f {
            let moved = trial
                .iter()
                .zip(&q)
                .fold(0.0, |m: f64, (a, b)| m.max(fabs(a - b)));
            q = trial;
            f = ft;
            step = (step * 1.3).min(2.0);
            if moved < 1e-12 {
                break;
            }
        } else {
            step *= 0.4;
            if step < 1e-14 {
                break;
            }
        }
    }

    // Projected-ascent line searches compare objective values and stall near
    // sqrt(machine epsilon). A damped Newton polish inside the simplex,
    // judged by step size rather than objective value, finishes the job.
    for _ in 0..60 {
        let g: Vec<f64> = q
            .iter()
            .zip(d2_row)
            .map(|(qb, d)| -log(qb.max(1e-300)) - 1.0 - c * d)
            .collect();
        let lambda: f64 = q.iter().zip(&g).map(|(qb, gb)| qb * gb).sum();
        let delta: Vec<f64> = q.iter().zip(&g).map(|(qb, gb)| qb * (gb - lambda)).collect();
        let mut t = 1.0f64;
        for (qb, db) in q.iter().zip(&delta) {
            if *db < 0.0 {
                t = t.min(0.9 * qb / -db);
            }
        }
        let mut moved = 0.0f64;
        for (qb, db) in q.iter_mut().zip(&delta) {
            let change = t * db;
            moved = moved.max(fabs(change));
            *qb += change;
        }
        let total: f64 = q.iter().sum();
        for qb in q.iter_mut() {
            *qb /= total;
        }
        if moved < 1e-15 {
            break;
        }
    }
    Ok(q)
}

fn start_measure(obj: &ChainObjective, restart: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = obj.len();
    let mut mu = Mat::zeros(n, n);
    match &obj.fixed_p {
        Some(target) => {
            let p = target.probabilities();
            for a in 0..n {
                for b in a..n {
                    // Independent coupling, randomly perturbed after the
                    // first restart.
                    let noise = if restart == 0 { 1.0 } else { rng.gen_range(0.25..4.0) };
                    let v = p[a] * p[b] * noise;
                    mu[(a, b)] = v;
                    mu[(b, a)] = v;
                }
            }
        }
        None => {
            for a in 0..n {
                for b in a..n {
                    let v = if restart == 0 { 1.0 } else { rng.gen_range(0.05..1.0) };
                    mu[(a, b)] = v;
                    mu[(b, a)] = v;
                }
            }
        }
    }
    mu
}

fn ascend(obj: &ChainObjective, mu: &mut Mat, tol: f64) -> f64 {
    let n = obj.len();
    let c = obj.multiplier();
    let mut f = objective_of_measure(obj, mu);
    let mut step = 0.05;
    for _ in 0..MAX_ASCENT_ITER {
        let row_sums = mu.row_sums();
        let mut trial = mu.clone();
        for a in 0..n {
            for b in a..n {
                let grad_ab = -log((mu[(a, b)] / row_sums[a].max(1e-300)).max(1e-300))
                    - c * obj.d2[(a, b)];
                let grad_ba = -log((mu[(b, a)] / row_sums[b].max(1e-300)).max(1e-300))
                    - c * obj.d2[(b, a)];
                let g = 0.5 * (grad_ab + grad_ba);
                trial[(a, b)] += step * g;
                if b != a {
                    trial[(b, a)] += step * g;
                }
            }
        }
        project(obj, &mut trial);
        let ft = objective_of_measure(obj, &trial);
        if ft > f {
            let moved = trial.max_abs_diff(mu);
            *mu = trial;
            f = ft;
            step = (step * 1.3).min(5.0);
            if moved < tol * 1e-3 {
                break;
            }
        } else {
            step *= 0.4;
            if step < 1e-15 {
                break;
            }
        }
    }
    f
}

fn objective_of_measure(obj: &ChainObjective, mu: &Mat) -> f64 {
    let n = obj.len();
    let c = obj.multiplier();
    let row_sums = mu.row_sums();
    let mut acc = 0.0;
    for a in 0..n {
        if row_sums[a] > 0.0 {
            acc += row_sums[a] * log(row_sums[a]);
        }
        for b in 0..n {
            let m = mu[(a, b)];
            if m > 0.0 {
                acc -= m * log(m);
            }
            acc -= c * m * obj.d2[(a, b)];
        }
    }
    acc
}

fn project(obj: &ChainObjective, mu: &mut Mat) {
    match &obj.fixed_p {
        Some(target) => project_fixed_rows(mu, target.probabilities()),
        None => project_total_mass(mu),
    }
}

/// Projection onto {symmetric, nonnegative, total mass 1}: symmetrize, then
/// project the flattened matrix onto the simplex (value-based, so symmetry
/// survives).
fn project_total_mass(mu: &mut Mat) {
    let n = mu.rows();
    for a in 0..n {
        for b in (a + 1)..n {
            let v = 0.5 * (mu[(a, b)] + mu[(b, a)]);
            mu[(a, b)] = v;
            mu[(b, a)] = v;
        }
    }
    let mut flat: Vec<f64> = mu.iter().copied().collect();
    simplex_project(&mut flat);
    for (dst, src) in mu.iter_mut().zip(flat) {
        *dst = src;
    }
}

/// Alternating projections onto {symmetric, row sums = p} (closed form) and
/// the nonnegative cone. Near interior points the cone step is inactive and
/// a single affine step is exact.
fn project_fixed_rows(mu: &mut Mat, p: &[f64]) {
    let n = mu.rows();
    for _ in 0..500 {
        // Affine part: symmetrize, then mu_ab += lambda_a + lambda_b with
        // lambda solving the row-sum correction.
        for a in 0..n {
            for b in (a + 1)..n {
                let v = 0.5 * (mu[(a, b)] + mu[(b, a)]);
                mu[(a, b)] = v;
                mu[(b, a)] = v;
            }
        }
        let sums = mu.row_sums();
        let r: Vec<f64> = (0..n).map(|a| p[a] - sums[a]).collect();
        let t = r.iter().sum::<f64>() / (2.0 * n as f64);
        let lambda: Vec<f64> = r.iter().map(|ra| (ra - t) / n as f64).collect();
        for a in 0..n {
            for b in 0..n {
                mu[(a, b)] += lambda[a] + lambda[b];
            }
        }
        let mut clipped = false;
        for v in mu.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clipped = true;
            }
        }
        if !clipped {
            return;
        }
        let sums = mu.row_sums();
        let violation = (0..n).fold(0.0, |m: f64, a| m.max(fabs(sums[a] - p[a])));
        if violation <= 1e-13 {
            return;
        }
    }
}

/// Euclidean projection of a vector onto the probability simplex.
fn simplex_project(x: &mut [f64]) {
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}

/// `q_ab = mu_ab / sum_b mu_ab`, `p` = row sums. Symmetric `mu` makes the
/// chain reversible by construction.
fn chain_from_edge_measure(mu: &Mat) -> Result<MarkovChain> {
    let n = mu.rows();
    let p = mu.row_sums();
    if p.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numerical(
            "optimizer produced an edge measure with an empty row".into(),
        ));
    }
    let mut q = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            q[(a, b)] = mu[(a, b)] / p[a];
        }
    }
    MarkovChain::new(q, p, true, Provenance::External)
}
