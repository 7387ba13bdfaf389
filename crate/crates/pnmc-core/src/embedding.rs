//! Diffusion-map coordinates from a reversible Markov chain.
//!
//! With `P = diag(p)`, a reversible chain's conjugated operator
//! `S = P^{1/2} q P^{-1/2}` is symmetric, so its eigenpairs `(lambda_i,
//! v_i)` are real and orthonormal. The right eigenvectors of `q` are
//! recovered as `psi_i = P^{-1/2} v_i` (unit norm in the `p`-weighted inner
//! product) and the embedding coordinates are `D_i(a) = lambda_i psi_i(a)`
//! for `i = 1..m`, dropping the trivial pair `lambda_0 = 1`,
//! `psi_0 = const`.

use alloc::format;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::chains::MarkovChain;
use crate::eigen::symmetric_eigen;
use crate::mat::Mat;
use crate::{Error, Result};

/// Default eigensolve tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Conjugated-operator asymmetry beyond this on a chain flagged reversible
/// is a broken contract, not roundoff.
const REVERSIBILITY_GUARD: f64 = 1e-6;

/// Diffusion coordinates with the spectral data behind them.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `N x m`; column `i` holds `D_{i+1}(a) = lambda_{i+1} psi_{i+1}(a)`.
    pub coords: Mat,
    /// `m + 1` eigenvalues including the trivial `lambda_0`, descending.
    pub eigenvalues: Vec<f64>,
    /// Per retained eigenpair: `max_a |(S v)_a - lambda v_a|`.
    pub residuals: Vec<f64>,
    /// Indices `i` with `lambda_i - lambda_{i+1} <= tol` among the retained
    /// pairs: coordinate `i+1` is only defined up to rotation with its
    /// neighbor. Ordering stays deterministic (descending, index-tied).
    pub degenerate_gaps: Vec<usize>,
}

/// First `m` nontrivial diffusion coordinates of a reversible chain.
///
/// Sign convention: each `psi_i` is oriented so its largest-magnitude entry
/// (lowest index on ties) is positive.
pub fn diffusion_map(chain: &MarkovChain, m: usize, tol: f64) -> Result<Embedding> {
    let n = chain.len();
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Parameter(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if m < 1 || m > n - 1 {
        return Err(Error::Parameter(format!(
            "coordinate count must be in [1, {}], got {m}",
            n - 1
        )));
    }
    if !chain.is_reversible() {
        return Err(Error::Contract(
            "diffusion map requires a reversible chain (conjugated operator would not be symmetric)"
                .into(),
        ));
    }

    let q = chain.transitions();
    let p = chain.stationary();
    let sqrt_p: Vec<f64> = p.iter().map(|v| sqrt(*v)).collect();

    let mut s = Mat::zeros(n, n);
    let mut worst_asym = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let upper = sqrt_p[a] * q[(a, b)] / sqrt_p[b];
            let lower = sqrt_p[b] * q[(b, a)] / sqrt_p[a];
            worst_asym = worst_asym.max(fabs(upper - lower));
            let v = 0.5 * (upper + lower);
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    if worst_asym > REVERSIBILITY_GUARD {
        return Err(Error::Contract(format!(
            "chain is flagged reversible but the conjugated operator has asymmetry {worst_asym:e}"
        )));
    }

    let eig = symmetric_eigen(&s)?;
    let keep = m + 1;
    let eigenvalues: Vec<f64> = eig.values[..keep].to_vec();
    if fabs(eigenvalues[0] - 1.0) > 1e-4 {
        return Err(Error::Contract(format!(
            "leading eigenvalue {} is far from 1; the chain is not stochastic",
            eigenvalues[0]
        )));
    }

    let mut residuals = Vec::with_capacity(keep);
    for i in 0..keep {
        let v: Vec<f64> = (0..n).map(|r| eig.vectors[(r, i)]).collect();
        let sv = s.matvec(&v);
        let res = (0..n).fold(0.0, |acc: f64, r| {
            acc.max(fabs(sv[r] - eigenvalues[i] * v[r]))
        });
        residuals.push(res);
    }
    if let Some(worst) = residuals.iter().copied().reduce(f64::max) {
        if worst > tol {
            return Err(Error::Numerical(format!(
                "eigenpair residual {worst:e} exceeds tolerance {tol:e}"
            )));
        }
    }

    let mut degenerate_gaps = Vec::new();
    for i in 0..m {
        if eigenvalues[i] - eigenvalues[i + 1] <= tol {
            degenerate_gaps.push(i);
        }
    }

    let mut coords = Mat::zeros(n, m);
    for i in 1..keep {
        let mut psi: Vec<f64> = (0..n).map(|r| eig.vectors[(r, i)] / sqrt_p[r]).collect();
        let mut arg = 0;
        for (r, v) in psi.iter().enumerate() {
            if fabs(*v) > fabs(psi[arg]) {
                arg = r;
            }
        }
        if psi[arg] < 0.0 {
            for v in psi.iter_mut() {
                *v = -*v;
            }
        }
        for r in 0..n {
            coords[(r, i - 1)] = eigenvalues[i] * psi[r];
        }
    }

    Ok(Embedding { coords, eigenvalues, residuals, degenerate_gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{rnmc, MarkovChain, Provenance};
    use crate::geometry::{
        gaussian_kernel, pairwise_distances, KernelFamily, KernelMatrix, KernelMeta,
        PointCloud,
    };
    use alloc::vec;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn custom_kernel(delta: Mat) -> KernelMatrix {
        KernelMatrix::from_matrix(
            delta,
            KernelMeta { family: KernelFamily::Custom, alpha: 0.0 },
        )
        .unwrap()
    }

    fn two_state_chain() -> MarkovChain {
        let q = Mat::from_rows(&[
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 2.0 / 3.0],
        ])
        .unwrap();
        MarkovChain::new(q, vec![0.5, 0.5], true, Provenance::External).unwrap()
    }

    #[test]
    fn two_state_hand_eigendecomposition() {
        let emb = diffusion_map(&two_state_chain(), 1, 1e-10).unwrap();
        assert!((emb.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((emb.eigenvalues[1] - 1.0 / 3.0).abs() < 1e-12);
        // psi_1 = (1, -1) under p-weighted normalization, D_1 = psi_1 / 3.
        assert!((emb.coords[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((emb.coords[(1, 0)] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_chain_uses_its_own_eigenvectors() {
        // Symmetric q with uniform p: the conjugation is the identity.
        let q = Mat::from_rows(&[
            vec![0.5, 0.3, 0.2],
            vec![0.3, 0.4, 0.3],
            vec![0.2, 0.3, 0.5],
        ])
        .unwrap();
        let chain =
            MarkovChain::new(q.clone(), vec![1.0 / 3.0; 3], true, Provenance::External)
                .unwrap();
        let emb = diffusion_map(&chain, 2, 1e-10).unwrap();
        // q psi = lambda psi with psi recovered from coords.
        for i in 0..2 {
            let lambda = emb.eigenvalues[i + 1];
            let psi: Vec<f64> = (0..3).map(|r| emb.coords[(r, i)] / lambda).collect();
            let qpsi = q.matvec(&psi);
            for r in 0..3 {
                assert!((qpsi[r] - lambda * psi[r]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn invariants_on_random_reversible_chain() {
        let mut rng = StdRng::seed_from_u64(109);
        let mut delta = Mat::zeros(6, 6);
        for a in 0..6 {
            for b in a..6 {
                let v = rng.gen_range(0.1..1.5);
                delta[(a, b)] = v;
                delta[(b, a)] = v;
            }
        }
        let chain = rnmc(&custom_kernel(delta));
        let m = 3;
        let emb = diffusion_map(&chain, m, 1e-10).unwrap();
        let p = chain.stationary();

        assert!((emb.eigenvalues[0] - 1.0).abs() < 1e-10);
        for lambda in &emb.eigenvalues {
            assert!(lambda.abs() <= 1.0 + 1e-10);
        }
        assert!(emb.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for res in &emb.residuals {
            assert!(*res <= 1e-10);
        }

        // p-weighted orthonormality of psi_i, including the constant psi_0.
        let mut psis: Vec<Vec<f64>> = Vec::new();
        psis.push(vec![1.0; 6]);
        for i in 0..m {
            let lambda = emb.eigenvalues[i + 1];
            psis.push((0..6).map(|r| emb.coords[(r, i)] / lambda).collect());
        }
        for i in 0..psis.len() {
            for j in i..psis.len() {
                let dot: f64 = (0..6).map(|r| p[r] * psis[i][r] * psis[j][r]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "psi_{i} . psi_{j} = {dot}");
            }
        }

        // Right-eigenvector property through the original q.
        for i in 1..psis.len() {
            let qpsi = chain.transitions().matvec(&psis[i]);
            for r in 0..6 {
                assert!((qpsi[r] - emb.eigenvalues[i] * psis[i][r]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn embedding_equivariant_under_permutation() {
        let mut rng = StdRng::seed_from_u64(113);
        let n = 5;
        let mut delta = Mat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = rng.gen_range(0.1..1.5);
                delta[(a, b)] = v;
                delta[(b, a)] = v;
            }
        }
        let chain = rnmc(&custom_kernel(delta.clone()));
        let emb = diffusion_map(&chain, 2, 1e-10).unwrap();

        // Reverse the state order.
        let mut permuted = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                permuted[(a, b)] = delta[(n - 1 - a, n - 1 - b)];
            }
        }
        let chain_rev = rnmc(&custom_kernel(permuted));
        let emb_rev = diffusion_map(&chain_rev, 2, 1e-10).unwrap();
        for i in 0..2 {
            for r in 0..n {
                assert!(
                    (emb.coords[(r, i)] - emb_rev.coords[(n - 1 - r, i)]).abs() < 1e-9,
                    "coordinate {i} not equivariant at row {r}"
                );
            }
        }
    }

    #[test]
    fn two_blob_cloud_separated_by_first_coordinate() {
        let mut rng = StdRng::seed_from_u64(127);
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push(vec![rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
        }
        for _ in 0..10 {
            rows.push(vec![5.0 + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
        }
        let cloud = PointCloud::from_points(Mat::from_rows(&rows).unwrap()).unwrap();
        let kernel = gaussian_kernel(&pairwise_distances(&cloud), 1.0).unwrap();
        let chain = rnmc(&kernel);
        let emb = diffusion_map(&chain, 2, 1e-8).unwrap();
        let first_sign = emb.coords[(0, 0)].signum();
        for r in 0..10 {
            assert_eq!(emb.coords[(r, 0)].signum(), first_sign);
        }
        for r in 10..20 {
            assert_eq!(emb.coords[(r, 0)].signum(), -first_sign);
        }
    }

    #[test]
    fn degenerate_spectrum_is_flagged_not_fatal() {
        // Uniform kernel: spectrum (1, 0, 0, 0).
        let chain = rnmc(&custom_kernel(Mat::filled(4, 4, 1.0)));
        let emb = diffusion_map(&chain, 2, 1e-10).unwrap();
        assert!(emb.degenerate_gaps.contains(&1));
        assert_eq!(emb.coords.cols(), 2);
    }

    #[test]
    fn non_reversible_flag_is_a_contract_error() {
        let q = Mat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let chain = MarkovChain::for_audit(q, vec![0.5, 0.5]).unwrap();
        match diffusion_map(&chain, 1, 1e-10) {
            Err(Error::Contract(_)) => {}
            other => panic!("expected contract error, got {other:?}"),
        }
    }

    #[test]
    fn lying_reversibility_flag_is_caught() {
        let q = Mat::from_rows(&[vec![0.9, 0.1], vec![0.6, 0.4]]).unwrap();
        let chain =
            MarkovChain::new(q, vec![0.5, 0.5], true, Provenance::External).unwrap();
        match diffusion_map(&chain, 1, 1e-10) {
            Err(Error::Contract(msg)) => assert!(msg.contains("asymmetry")),
            other => panic!("expected contract error, got {other:?}"),
        }
    }

    #[test]
    fn coordinate_count_bounds() {
        let chain = two_state_chain();
        assert!(diffusion_map(&chain, 0, 1e-10).is_err());
        assert!(diffusion_map(&chain, 2, 1e-10).is_err());
    }
}
