//! The max-entropy chains really do maximize the constrained objective:
//! random feasible perturbations of the edge measure never score higher.

use pnmc_core::chains::{MarkovChain, Provenance};
use pnmc_core::geometry::{gaussian_kernel, pairwise_distances, PointCloud};
use pnmc_core::mat::Mat;
use pnmc_core::maxent::{pnmc_free, pnmc_prescribed, DEFAULT_MAX_ITER};
use pnmc_core::oracle::{objective_value, ChainObjective};
use pnmc_core::targets::StationaryTarget;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_cloud(n: usize, rng: &mut StdRng) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    PointCloud::from_points(Mat::from_rows(&rows).unwrap()).unwrap()
}

fn squared_distances(cloud: &PointCloud) -> Mat {
    let d = pairwise_distances(cloud);
    let n = cloud.len();
    let mut d2 = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            d2[(a, b)] = d.get(a, b) * d.get(a, b);
        }
    }
    d2
}

/// Edge measure -> chain: `p` = row sums, `q_ab = mu_ab / p_a`.
fn chain_from_measure(mu: &Mat) -> MarkovChain {
    let n = mu.rows();
    let p = mu.row_sums();
    let mut q = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            q[(a, b)] = mu[(a, b)] / p[a];
        }
    }
    MarkovChain::new(q, p, true, Provenance::External).unwrap()
}

/// Symmetric zero-sum direction: feasible for the free program.
fn free_direction(n: usize, rng: &mut StdRng) -> Mat {
    let mut d = Mat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = rng.gen_range(-1.0..1.0);
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    let mean = d.iter().sum::<f64>() / (n * n) as f64;
    for v in d.iter_mut() {
        *v -= mean;
    }
    d
}

/// Symmetric direction with zero row sums: feasible for the fixed program.
fn fixed_direction(n: usize, rng: &mut StdRng) -> Mat {
    let mut d = free_direction(n, rng);
    // Project onto {symmetric, row sums zero}: d_ab += lambda_a + lambda_b.
    for _ in 0..200 {
        let sums = d.row_sums();
        let worst = sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if worst < 1e-15 {
            break;
        }
        let t: f64 = sums.iter().sum::<f64>() / (2.0 * n as f64);
        for a in 0..n {
            for b in 0..n {
                d[(a, b)] += (-sums[a] + t) / n as f64 + (-sums[b] + t) / n as f64;
            }
        }
    }
    d
}

/// Largest `t` keeping `mu + t d` entrywise positive, shrunk for margin.
fn safe_scale(mu: &Mat, d: &Mat) -> f64 {
    let mut t = f64::INFINITY;
    for (m, dir) in mu.iter().zip(d.iter()) {
        if *dir < 0.0 {
            t = t.min(m / -dir);
        }
    }
    0.5 * t
}

#[test]
fn free_chain_beats_feasible_perturbations() {
    let mut rng = StdRng::seed_from_u64(211);
    for &n in &[3usize, 4] {
        let cloud = random_cloud(n, &mut rng);
        let eps = rng.gen_range(0.6..1.4);
        let kernel = gaussian_kernel(&pairwise_distances(&cloud), eps).unwrap();
        let obj = ChainObjective::new(eps, squared_distances(&cloud), None).unwrap();
        let chain = pnmc_free(&kernel, 1e-13).unwrap();
        let best = objective_value(&obj, &chain).unwrap();

        // The optimizer's own edge measure, perturbed along feasible
        // directions of varying size.
        let mut mu = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                mu[(a, b)] = chain.stationary()[a] * chain.get(a, b);
            }
        }
        for _ in 0..200 {
            let dir = free_direction(n, &mut rng);
            let t = safe_scale(&mu, &dir) * rng.gen_range(0.01..1.0);
            let mut perturbed = mu.clone();
            for (p, d) in perturbed.iter_mut().zip(dir.iter()) {
                *p += t * d;
            }
            let value = objective_value(&obj, &chain_from_measure(&perturbed)).unwrap();
            assert!(
                value <= best + 1e-9,
                "perturbation scored {value}, optimum {best}"
            );
        }

        // Blind random feasible measures.
        for _ in 0..200 {
            let mut mu_rand = Mat::zeros(n, n);
            for a in 0..n {
                for b in a..n {
                    let v = rng.gen_range(0.01..1.0);
                    mu_rand[(a, b)] = v;
                    mu_rand[(b, a)] = v;
                }
            }
            let total: f64 = mu_rand.iter().sum();
            for v in mu_rand.iter_mut() {
                *v /= total;
            }
            let value = objective_value(&obj, &chain_from_measure(&mu_rand)).unwrap();
            assert!(value <= best + 1e-9);
        }
    }
}

#[test]
fn prescribed_chain_beats_feasible_perturbations() {
    let mut rng = StdRng::seed_from_u64(223);
    for &n in &[3usize, 4] {
        let cloud = random_cloud(n, &mut rng);
        let eps = rng.gen_range(0.6..1.4);
        let kernel = gaussian_kernel(&pairwise_distances(&cloud), eps).unwrap();
        let target =
            StationaryTarget::custom((0..n).map(|_| rng.gen_range(0.3..1.5)).collect())
                .unwrap();
        let obj = ChainObjective::new(
            eps,
            squared_distances(&cloud),
            Some(target.clone()),
        )
        .unwrap();
        let chain = pnmc_prescribed(&kernel, &target, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let best = objective_value(&obj, &chain).unwrap();

        let mut mu = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                mu[(a, b)] = chain.stationary()[a] * chain.get(a, b);
            }
        }
        for _ in 0..300 {
            let dir = fixed_direction(n, &mut rng);
            let t = safe_scale(&mu, &dir) * rng.gen_range(0.01..1.0);
            let mut perturbed = mu.clone();
            for (p, d) in perturbed.iter_mut().zip(dir.iter()) {
                *p += t * d;
            }
            let perturbed_chain = chain_from_measure(&perturbed);
            // Feasibility: the perturbed chain keeps the prescribed
            // stationary distribution.
            for a in 0..n {
                assert!((perturbed_chain.stationary()[a] - target.get(a)).abs() < 1e-10);
            }
            let value = objective_value(&obj, &perturbed_chain).unwrap();
            assert!(
                value <= best + 1e-9,
                "perturbation scored {value}, optimum {best}"
            );
        }
    }
}
