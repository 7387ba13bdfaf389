//! Path-entropy-maximized Markov chains.
//!
//! Maximizing the entropy rate of long stationary trajectories subject to a
//! mean-squared-step constraint singles out chains of a rigid analytic form:
//!
//! - **Free stationary distribution.** `q_ab = nu_b Delta(a,b) / (eta nu_a)`
//!   where `(eta, nu)` is the Perron pair of the kernel, with stationary
//!   distribution `p_a ∝ nu_a^2`. Equivalently the row normalization of the
//!   reweighted kernel `nu_a Delta(a,b) nu_b`, which is how [`pnmc_free`]
//!   assembles it: row sums, stationarity, and detailed balance then hold
//!   exactly instead of up to the eigensolve residual.
//! - **Prescribed stationary distribution.** `q_ab = rho_a rho_b Delta(a,b)
//!   / p_a` where `rho` solves the symmetric scaling problem
//!   `R Delta R 1 = p` ([`sinkhorn_scale`]).
//! - **Prior update.** The least-deformed chain relative to a prior chain
//!   `k` is either construction applied to the reweighted kernel
//!   `Delta(a,b) sqrt(k_ab k_ba)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::chains::{MarkovChain, Provenance};
use crate::geometry::{KernelFamily, KernelMatrix, KernelMeta, KERNEL_FLOOR};
use crate::mat::Mat;
use crate::targets::StationaryTarget;
use crate::{Error, Result};

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default Sinkhorn iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Power-iteration cap is `PERRON_ITER_PER_STATE * N`.
const PERRON_ITER_PER_STATE: usize = 100;

/// Dominant eigenpair of a strictly positive symmetric kernel.
#[derive(Debug, Clone)]
pub struct PerronPair {
    /// Dominant eigenvalue.
    pub eta: f64,
    /// Dominant eigenvector: strictly positive, unit Euclidean norm.
    pub nu: Vec<f64>,
    /// Achieved `max_a |(Delta nu)_a - eta nu_a|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solution of the symmetric scaling problem `R Delta R 1 = p`.
#[derive(Debug, Clone)]
pub struct ScalingVector {
    /// Strictly positive diagonal scaling.
    pub rho: Vec<f64>,
    /// Achieved `max_a |rho_a (Delta rho)_a - p_a|`.
    pub residual: f64,
    pub iterations: usize,
    /// Residual after every iteration, for telemetry.
    pub trace: Vec<f64>,
}

/// Power iteration with Rayleigh-quotient eigenvalue estimates; converges
/// when `max_a |(Delta nu)_a - eta nu_a| <= tol * eta`. The largest-magnitude
/// entry of `nu` is oriented positive.
pub fn perron(kernel: &KernelMatrix, tol: f64) -> Result<PerronPair> {
    check_tol(tol)?;
    let n = kernel.len();
    let delta = kernel.matrix();
    let cap = PERRON_ITER_PER_STATE * n;
    let mut nu = vec![1.0 / sqrt(n as f64); n];
    let mut last_residual = f64::INFINITY;
    for iter in 1..=cap {
        let w = delta.matvec(&nu);
        // nu has unit norm, so the Rayleigh quotient is nu . w.
        let eta: f64 = nu.iter().zip(&w).map(|(x, y)| x * y).sum();
        let residual = nu
            .iter()
            .zip(&w)
            .fold(0.0, |m: f64, (x, y)| m.max(fabs(y - eta * x)));
        if residual <= tol * eta {
            if nu.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Numerical(
                    "power iteration left the positive cone".into(),
                ));
            }
            return Ok(PerronPair { eta, nu, residual, iterations: iter });
        }
        last_residual = residual;
        let norm = sqrt(w.iter().map(|x| x * x).sum::<f64>());
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical(format!(
                "power iteration produced vector norm {norm}"
            )));
        }
        nu = w.into_iter().map(|x| x / norm).collect();
    }
    Err(Error::Convergence {
        context: "Perron power iteration",
        iterations: cap,
        residual: last_residual,
        trace: vec![],
    })
}

/// Max-entropy chain with free stationary distribution: row normalization of
/// the centrality-reweighted kernel `nu_a Delta(a,b) nu_b`; `p_a ∝ nu_a^2`.
pub fn pnmc_free(kernel: &KernelMatrix, tol: f64) -> Result<MarkovChain> {
    Ok(pnmc_free_with_pair(kernel, tol)?.0)
}

/// [`pnmc_free`] plus the Perron pair it was built from, for telemetry.
pub fn pnmc_free_with_pair(
    kernel: &KernelMatrix,
    tol: f64,
) -> Result<(MarkovChain, PerronPair)> {
    let pair = perron(kernel, tol)?;
    let chain = chain_from_reweighted(kernel, &pair.nu);
    Ok((chain, pair))
}

/// Row-normalizes `nu_a Delta(a,b) nu_b`. The row factor `nu_a` cancels in
/// the transition probabilities, giving `q_ab = nu_b Delta(a,b) / sum_c nu_c
/// Delta(a,c)`; the stationary distribution follows the row-normalization
/// rule for the reweighted kernel.
fn chain_from_reweighted(kernel: &KernelMatrix, nu: &[f64]) -> MarkovChain {
    let n = kernel.len();
    let delta = kernel.matrix();
    let mut q = Mat::zeros(n, n);
    let mut z = vec![0.0; n];
    for a in 0..n {
        let mut sum = 0.0;
        for b in 0..n {
            sum += nu[b] * delta[(a, b)];
        }
        z[a] = nu[a] * sum;
        for b in 0..n {
            q[(a, b)] = nu[b] * delta[(a, b)] / sum;
        }
    }
    let z_total: f64 = z.iter().sum();
    let p = z.iter().map(|za| za / z_total).collect();
    MarkovChain::assemble(q, p, true, Provenance::PnmcFree)
}

/// Symmetric Sinkhorn scaling: finds strictly positive `rho` with
/// `rho_a * sum_b Delta(a,b) rho_b = p_a`.
///
/// Uses the geometric-mean damped update
/// `rho_a <- sqrt(rho_a * p_a / (Delta rho)_a)` started from
/// `rho_a = sqrt(p_a / sum_b Delta(a,b))`; the undamped fixed-point map can
/// oscillate. The residual must not increase between iterations; if it does
/// the solver aborts rather than loop.
pub fn sinkhorn_scale(
    kernel: &KernelMatrix,
    target: &StationaryTarget,
    tol: f64,
    max_iter: usize,
) -> Result<ScalingVector> {
    check_tol(tol)?;
    let n = kernel.len();
    if target.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "target has {} entries for a {n}-point kernel",
            target.len(),
        )));
    }
    if max_iter == 0 {
        return Err(Error::Parameter("max_iter must be at least 1".into()));
    }
    let delta = kernel.matrix();
    let p = target.probabilities();

    let row_sums = delta.row_sums();
    let mut rho: Vec<f64> = (0..n).map(|a| sqrt(p[a] / row_sums[a])).collect();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for iter in 0..=max_iter {
        let image = delta.matvec(&rho);
        let residual = (0..n).fold(0.0, |m: f64, a| m.max(fabs(rho[a] * image[a] - p[a])));
        trace.push(residual);
        if residual <= tol {
            return Ok(ScalingVector { rho, residual, iterations: iter, trace });
        }
        if residual > prev * (1.0 + 1e-6) {
            return Err(Error::Numerical(format!(
                "sinkhorn residual increased from {prev:e} to {residual:e} at iteration {iter}"
            )));
        }
        prev = residual;
        if iter == max_iter {
            break;
        }
        for a in 0..n {
            rho[a] = sqrt(rho[a] * p[a] / image[a]);
            if !(rho[a] > 0.0) || !rho[a].is_finite() {
                return Err(Error::Numerical(format!(
                    "sinkhorn scaling entry {a} became {} at iteration {iter}",
                    rho[a]
                )));
            }
        }
    }
    let residual = *trace.last().unwrap();
    Err(Error::Convergence {
        context: "symmetric Sinkhorn scaling",
        iterations: max_iter,
        residual,
        trace,
    })
}

/// Max-entropy chain with a prescribed stationary distribution:
/// `q_ab = rho_a rho_b Delta(a,b) / p_a`. The edge measure
/// `rho_a rho_b Delta(a,b)` is symmetric, so detailed balance with respect
/// to the target holds exactly; row sums match 1 up to the scaling residual.
pub fn pnmc_prescribed(
    kernel: &KernelMatrix,
    target: &StationaryTarget,
    tol: f64,
    max_iter: usize,
) -> Result<MarkovChain> {
    Ok(pnmc_prescribed_with_scaling(kernel, target, tol, max_iter)?.0)
}

/// [`pnmc_prescribed`] plus the scaling vector it was built from, for
/// telemetry.
pub fn pnmc_prescribed_with_scaling(
    kernel: &KernelMatrix,
    target: &StationaryTarget,
    tol: f64,
    max_iter: usize,
) -> Result<(MarkovChain, ScalingVector)> {
    let scaling = sinkhorn_scale(kernel, target, tol, max_iter)?;
    let n = kernel.len();
    let delta = kernel.matrix();
    let p = target.probabilities();
    let mut q = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            q[(a, b)] = scaling.rho[a] * scaling.rho[b] * delta[(a, b)] / p[a];
        }
    }
    let chain = MarkovChain::assemble(q, p.to_vec(), true, Provenance::PnmcPrescribed);
    Ok((chain, scaling))
}

/// Kernel reweighted by a prior chain: `Delta(a,b) sqrt(k_ab k_ba)`.
/// Entries that vanish because the prior forbids a transition are floored
/// like any other kernel entry; a prior that kills an entire row is
/// rejected.
pub fn prior_weighted_kernel(
    kernel: &KernelMatrix,
    prior: &MarkovChain,
) -> Result<KernelMatrix> {
    let n = kernel.len();
    if prior.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "prior chain has {} states for a {n}-point kernel",
            prior.len()
        )));
    }
    let delta = kernel.matrix();
    let k = prior.transitions();
    let mut out = Mat::zeros(n, n);
    for a in 0..n {
        let mut dead = true;
        for b in 0..n {
            let v = delta[(a, b)] * sqrt(k[(a, b)] * k[(b, a)]);
            if v > 0.0 {
                dead = false;
            }
            out[(a, b)] = v.max(KERNEL_FLOOR);
        }
        if dead {
            return Err(Error::DegenerateInput(format!(
                "prior chain leaves row {a} of the reweighted kernel at zero"
            )));
        }
    }
    KernelMatrix::from_matrix(
        out,
        KernelMeta { family: KernelFamily::Custom, alpha: kernel.meta().alpha },
    )
}

/// Least-deformed update of a prior chain, stationary distribution free:
/// [`pnmc_free`] on the prior-weighted kernel.
pub fn pnmc_update_free(
    kernel: &KernelMatrix,
    prior: &MarkovChain,
    tol: f64,
) -> Result<MarkovChain> {
    let reweighted = prior_weighted_kernel(kernel, prior)?;
    Ok(pnmc_free(&reweighted, tol)?.with_provenance(Provenance::PnmcUpdate))
}

/// Least-deformed update of a prior chain under a prescribed stationary
/// distribution: [`pnmc_prescribed`] on the prior-weighted kernel.
pub fn pnmc_update_prescribed(
    kernel: &KernelMatrix,
    prior: &MarkovChain,
    target: &StationaryTarget,
    tol: f64,
    max_iter: usize,
) -> Result<MarkovChain> {
    Ok(pnmc_update_prescribed_with_scaling(kernel, prior, target, tol, max_iter)?.0)
}

/// [`pnmc_update_prescribed`] plus the scaling vector, for telemetry.
pub fn pnmc_update_prescribed_with_scaling(
    kernel: &KernelMatrix,
    prior: &MarkovChain,
    target: &StationaryTarget,
    tol: f64,
    max_iter: usize,
) -> Result<(MarkovChain, ScalingVector)> {
    let reweighted = prior_weighted_kernel(kernel, prior)?;
    let (chain, scaling) = pnmc_prescribed_with_scaling(&reweighted, target, tol, max_iter)?;
    Ok((chain.with_provenance(Provenance::PnmcUpdate), scaling))
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Parameter(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{rnmc, validate};
    use crate::eigen::symmetric_eigen;
    use crate::geometry::{gaussian_kernel, pairwise_distances, PointCloud};
    use crate::mat::linf_diff;
    use crate::targets::uniform_target;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn custom_kernel(delta: Mat) -> KernelMatrix {
        KernelMatrix::from_matrix(
            delta,
            KernelMeta { family: KernelFamily::Custom, alpha: 0.0 },
        )
        .unwrap()
    }

    fn random_kernel(n: usize, rng: &mut StdRng) -> KernelMatrix {
        let mut delta = Mat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = rng.gen_range(0.05..2.0);
                delta[(a, b)] = v;
                delta[(b, a)] = v;
            }
        }
        custom_kernel(delta)
    }

    fn random_target(n: usize, rng: &mut StdRng) -> StationaryTarget {
        StationaryTarget::custom((0..n).map(|_| rng.gen_range(0.2..2.0)).collect()).unwrap()
    }

    #[test]
    fn perron_two_by_two_circulant() {
        let pair = perron(
            &custom_kernel(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()),
            1e-12,
        )
        .unwrap();
        assert!((pair.eta - 3.0).abs() < 1e-10);
        let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
        assert!((pair.nu[0] - inv_sqrt2).abs() < 1e-10);
        assert!((pair.nu[1] - inv_sqrt2).abs() < 1e-10);
        assert!(pair.residual <= 1e-12 * pair.eta);
    }

    #[test]
    fn perron_weakly_coupled_pair() {
        let pair = perron(
            &custom_kernel(Mat::from_rows(&[vec![1.0, 1e-4], vec![1e-4, 1.0]]).unwrap()),
            1e-12,
        )
        .unwrap();
        assert!((pair.eta - 1.0001).abs() < 1e-10);
        let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
        assert!((pair.nu[0] - inv_sqrt2).abs() < 1e-8);
    }

    #[test]
    fn perron_matches_dense_eigensolver() {
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..5 {
            let kernel = random_kernel(8, &mut rng);
            let pair = perron(&kernel, 1e-12).unwrap();
            let eig = symmetric_eigen(kernel.matrix()).unwrap();
            assert!((pair.eta - eig.values[0]).abs() < 1e-10);
            let sign = if eig.vectors[(0, 0)] >= 0.0 { 1.0 } else { -1.0 };
            for a in 0..8 {
                assert!((pair.nu[a] - sign * eig.vectors[(a, 0)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pnmc_free_two_by_two() {
        let chain = pnmc_free(
            &custom_kernel(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()),
            1e-12,
        )
        .unwrap();
        assert!((chain.get(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((chain.get(0, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((chain.stationary()[0] - 0.5).abs() < 1e-12);
        assert_eq!(chain.provenance(), Provenance::PnmcFree);
        assert!(validate(&chain, 1e-12).pass);
    }

    #[test]
    fn pnmc_free_uniform_kernel_gives_uniform_chain() {
        let chain = pnmc_free(&custom_kernel(Mat::filled(4, 4, 0.7)), 1e-12).unwrap();
        for a in 0..4 {
            assert!((chain.stationary()[a] - 0.25).abs() < 1e-12);
            for b in 0..4 {
                assert!((chain.get(a, b) - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnmc_free_equals_rnmc_of_reweighted_kernel() {
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..5 {
            let kernel = random_kernel(5, &mut rng);
            let chain = pnmc_free(&kernel, 1e-12).unwrap();
            let pair = perron(&kernel, 1e-12).unwrap();
            let mut reweighted = Mat::zeros(5, 5);
            for a in 0..5 {
                for b in 0..5 {
                    reweighted[(a, b)] = pair.nu[a] * kernel.get(a, b) * pair.nu[b];
                }
            }
            let reference = rnmc(&custom_kernel(reweighted));
            assert!(chain.transitions().max_abs_diff(reference.transitions()) < 1e-10);
            assert!(linf_diff(chain.stationary(), reference.stationary()) < 1e-10);
        }
    }

    #[test]
    fn pnmc_free_stationary_matches_squared_eigenvector() {
        let mut rng = StdRng::seed_from_u64(61);
        let kernel = random_kernel(6, &mut rng);
        let chain = pnmc_free(&kernel, 1e-12).unwrap();
        let pair = perron(&kernel, 1e-12).unwrap();
        let nu_sq_sum: f64 = pair.nu.iter().map(|v| v * v).sum();
        for a in 0..6 {
            assert!(
                (chain.stationary()[a] - pair.nu[a] * pair.nu[a] / nu_sq_sum).abs() < 1e-9
            );
        }
    }

    #[test]
    fn pnmc_free_scale_invariant() {
        let mut rng = StdRng::seed_from_u64(67);
        let kernel = random_kernel(5, &mut rng);
        let mut scaled = kernel.matrix().clone();
        for v in scaled.iter_mut() {
            *v *= 41.0;
        }
        let a = pnmc_free(&kernel, 1e-12).unwrap();
        let b = pnmc_free(&custom_kernel(scaled), 1e-12).unwrap();
        assert!(a.transitions().max_abs_diff(b.transitions()) < 1e-12);
    }

    #[test]
    fn sinkhorn_uniform_fixed_point() {
        let kernel = custom_kernel(Mat::filled(2, 2, 1.0));
        let target = uniform_target(2).unwrap();
        let s = sinkhorn_scale(&kernel, &target, 1e-12, 100).unwrap();
        assert!((s.rho[0] - 0.5).abs() < 1e-12);
        assert!((s.rho[1] - 0.5).abs() < 1e-12);
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn sinkhorn_symmetric_two_state_analytic() {
        // rho^2 (1 + t) = 1/2 for both entries by symmetry.
        let t = (-1.0f64).exp();
        let kernel = custom_kernel(Mat::from_rows(&[vec![1.0, t], vec![t, 1.0]]).unwrap());
        let target = uniform_target(2).unwrap();
        let s = sinkhorn_scale(&kernel, &target, 1e-13, 1000).unwrap();
        let expected = (0.5 / (1.0 + t)).sqrt();
        assert!((s.rho[0] - expected).abs() < 1e-12);
        assert!((s.rho[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_matches_newton_oracle() {
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..5 {
            let kernel = random_kernel(6, &mut rng);
            let target = random_target(6, &mut rng);
            let s = sinkhorn_scale(&kernel, &target, 1e-12, DEFAULT_MAX_ITER).unwrap();
            assert!(s.residual <= 1e-12);
            let oracle = newton_scaling(kernel.matrix(), target.probabilities());
            assert!(
                linf_diff(&s.rho, &oracle) < 1e-8,
                "sinkhorn {:?} vs newton {oracle:?}",
                s.rho
            );
        }
    }

    #[test]
    fn sinkhorn_residual_trace_is_monotone() {
        let mut rng = StdRng::seed_from_u64(73);
        let kernel = random_kernel(10, &mut rng);
        let target = random_target(10, &mut rng);
        let s = sinkhorn_scale(&kernel, &target, 1e-11, DEFAULT_MAX_ITER).unwrap();
        for w in s.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6));
        }
        assert_eq!(s.trace.len(), s.iterations + 1);
    }

    #[test]
    fn sinkhorn_iteration_cap_is_reported() {
        let mut rng = StdRng::seed_from_u64(79);
        let kernel = random_kernel(6, &mut rng);
        let target = random_target(6, &mut rng);
        match sinkhorn_scale(&kernel, &target, 1e-14, 2) {
            Err(Error::Convergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn pnmc_prescribed_uniform_kernel_and_target() {
        let kernel = custom_kernel(Mat::filled(3, 3, 2.0));
        let target = uniform_target(3).unwrap();
        let chain = pnmc_prescribed(&kernel, &target, 1e-12, 100).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((chain.get(a, b) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnmc_prescribed_uniform_target_doubly_stochastic() {
        let mut rng = StdRng::seed_from_u64(83);
        let kernel = random_kernel(7, &mut rng);
        let target = uniform_target(7).unwrap();
        let chain = pnmc_prescribed(&kernel, &target, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert!(chain.transitions().asymmetry() < 1e-10);
        for sum in chain.transitions().col_sums() {
            assert!((sum - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pnmc_prescribed_gaussian_line_audit() {
        let points = Mat::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let cloud = PointCloud::from_points(points).unwrap();
        let kernel = gaussian_kernel(&pairwise_distances(&cloud), 1.0).unwrap();
        let target = StationaryTarget::custom(vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let chain = pnmc_prescribed(&kernel, &target, 1e-10, DEFAULT_MAX_ITER).unwrap();
        let d = validate(&chain, 1e-8);
        assert!(d.max_stationarity_residual <= 1e-8, "{d:?}");
        assert!(d.max_detailed_balance_residual <= 1e-10, "{d:?}");
        assert_eq!(linf_diff(chain.stationary(), target.probabilities()), 0.0);
    }

    #[test]
    fn update_free_with_constant_prior_reduces_to_pnmc_free() {
        let mut rng = StdRng::seed_from_u64(89);
        let kernel = random_kernel(5, &mut rng);
        let prior = rnmc(&custom_kernel(Mat::filled(5, 5, 1.0)));
        let updated = pnmc_update_free(&kernel, &prior, 1e-12).unwrap();
        let plain = pnmc_free(&kernel, 1e-12).unwrap();
        assert!(updated.transitions().max_abs_diff(plain.transitions()) < 1e-10);
        assert!(linf_diff(updated.stationary(), plain.stationary()) < 1e-10);
        assert_eq!(updated.provenance(), Provenance::PnmcUpdate);
    }

    #[test]
    fn update_free_idempotent_at_flat_kernel() {
        // With an all-ones kernel, the prior-weighted kernel of a
        // free-stationary max-entropy chain is its own base kernel rescaled,
        // so the update returns the prior chain.
        let mut rng = StdRng::seed_from_u64(97);
        let prior = pnmc_free(&random_kernel(5, &mut rng), 1e-13).unwrap();
        let flat = custom_kernel(Mat::filled(5, 5, 1.0));
        let updated = pnmc_update_free(&flat, &prior, 1e-13).unwrap();
        assert!(updated.transitions().max_abs_diff(prior.transitions()) < 1e-10);
        assert!(linf_diff(updated.stationary(), prior.stationary()) < 1e-10);
    }

    #[test]
    fn update_prescribed_with_constant_prior_reduces_to_pnmc_prescribed() {
        let mut rng = StdRng::seed_from_u64(101);
        let kernel = random_kernel(5, &mut rng);
        let target = random_target(5, &mut rng);
        let prior = rnmc(&custom_kernel(Mat::filled(5, 5, 1.0)));
        let updated =
            pnmc_update_prescribed(&kernel, &prior, &target, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let plain = pnmc_prescribed(&kernel, &target, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert!(updated.transitions().max_abs_diff(plain.transitions()) < 1e-10);
    }

    #[test]
    fn update_prescribed_recovers_prior_stationary_on_flat_kernel() {
        let mut rng = StdRng::seed_from_u64(103);
        let prior = pnmc_free(&random_kernel(6, &mut rng), 1e-13).unwrap();
        let target = StationaryTarget::custom(prior.stationary().to_vec()).unwrap();
        let flat = custom_kernel(Mat::filled(6, 6, 1.0));
        let updated =
            pnmc_update_prescribed(&flat, &prior, &target, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let d = validate(&updated, 1e-8);
        assert!(d.max_stationarity_residual <= 1e-8, "{d:?}");
        assert!(linf_diff(updated.stationary(), prior.stationary()) < 1e-12);
    }

    #[test]
    fn update_audits_clean_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(107);
        for _ in 0..5 {
            let kernel = random_kernel(5, &mut rng);
            let prior = rnmc(&random_kernel(5, &mut rng));
            let free = pnmc_update_free(&kernel, &prior, 1e-12).unwrap();
            let d = validate(&free, 1e-10);
            assert!(d.pass, "{d:?}");
            let target = random_target(5, &mut rng);
            let presc =
                pnmc_update_prescribed(&kernel, &prior, &target, 1e-12, DEFAULT_MAX_ITER)
                    .unwrap();
            let d = validate(&presc, 1e-8);
            assert!(d.max_stationarity_residual <= 1e-8, "{d:?}");
            assert!(d.max_detailed_balance_residual <= 1e-10, "{d:?}");
        }
    }

    #[test]
    fn prior_with_dead_row_is_rejected() {
        let kernel = custom_kernel(Mat::filled(3, 3, 1.0));
        // Row 0 reaches only state 1, but state 1 never returns, so every
        // sqrt(k_0b * k_b0) vanishes and row 0 of the reweighted kernel dies.
        let q = Mat::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap();
        let prior = MarkovChain::for_audit(q, vec![1.0 / 3.0; 3]).unwrap();
        match prior_weighted_kernel(&kernel, &prior) {
            Err(Error::DegenerateInput(msg)) => assert!(msg.contains("row 0")),
            other => panic!("unexpected result {other:?}"),
        }
    }

    /// Damped Newton on `F(rho) = rho .* (Delta rho) - p`, an independent
    /// route to the scaling vector.
    fn newton_scaling(delta: &Mat, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        let row_sums = delta.row_sums();
        let mut rho: Vec<f64> = (0..n).map(|a| (p[a] / row_sums[a]).sqrt()).collect();
        for _ in 0..200 {
            let image = delta.matvec(&rho);
            let f: Vec<f64> = (0..n).map(|a| rho[a] * image[a] - p[a]).collect();
            let worst = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if worst < 1e-14 {
                break;
            }
            // J = diag(Delta rho) + diag(rho) Delta
            let mut jac = Mat::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    jac[(a, b)] = rho[a] * delta[(a, b)];
                }
                jac[(a, a)] += image[a];
            }
            let step_dir = solve_dense(&mut jac, &f);
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = (0..n).map(|a| rho[a] - step * step_dir[a]).collect();
                if trial.iter().all(|v| *v > 0.0) {
                    let image_t = delta.matvec(&trial);
                    let worst_t = (0..n)
                        .map(|a| (trial[a] * image_t[a] - p[a]).abs())
                        .fold(0.0f64, f64::max);
                    if worst_t < worst {
                        rho = trial;
                        break;
                    }
                }
                step *= 0.5;
                assert!(step > 1e-12, "newton line search failed");
            }
        }
        rho
    }

    /// Gaussian elimination with partial pivoting; consumes the matrix.
    fn solve_dense(a: &mut Mat, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .unwrap();
            if pivot != col {
                for k in 0..n {
                    let tmp = a[(col, k)];
                    a[(col, k)] = a[(pivot, k)];
                    a[(pivot, k)] = tmp;
                }
                x.swap(col, pivot);
            }
            for row in (col + 1)..n {
                let factor = a[(row, col)] / a[(col, col)];
                for k in col..n {
                    let delta = factor * a[(col, k)];
                    a[(row, k)] -= delta;
                }
                x[row] -= factor * x[col];
            }
        }
        for col in (0..n).rev() {
            for k in (col + 1)..n {
                x[col] -= a[(col, k)] * x[k];
            }
            x[col] /= a[(col, col)];
        }
        x
    }
}
