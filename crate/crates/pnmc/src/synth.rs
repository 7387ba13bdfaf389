//! Seeded synthetic datasets for demos and end-to-end tests.

use pnmc_core::mat::Mat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of feature columns produced by [`branching_clusters`].
pub const BRANCHING_FEATURES: usize = 18;

/// Number of clusters produced by [`branching_clusters`].
pub const BRANCHING_CLUSTERS: usize = 5;

/// Five-cluster branching population over 18 nonnegative features.
///
/// Cluster 0 is a rare, diffuse root with a flat (high-entropy) profile;
/// clusters 1 and 2 branch off it and clusters 3 and 4 terminate those
/// branches as large, tight populations with strongly peaked (low-entropy)
/// profiles. Non-root points are spread along the edge toward their parent
/// so consecutive clusters overlap, with multiplicative log-normal noise on
/// top. `points` is split across the clusters with the root smallest.
/// Returns the profile matrix and per-point cluster indices.
pub fn branching_clusters(seed: u64, points: usize) -> (Mat, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = BRANCHING_FEATURES;

    // Parent of each cluster in the branching tree; the root points at
    // itself.
    let parent = [0usize, 0, 0, 1, 2];
    // Profile shape per cluster: a flat baseline plus a block of elevated
    // features, narrower and taller toward the leaves.
    let block_start = [0usize, 2, 6, 10, 14];
    let block_len = [4usize, 4, 4, 2, 2];
    let baseline = [1.0, 0.45, 0.45, 0.02, 0.02];
    let peak = [0.0, 2.2, 2.2, 5.0, 5.0];
    // Point scatter: diffuse root and intermediates, tight leaves.
    let noise = [0.35, 0.3, 0.3, 0.1, 0.1];
    // Population split: differentiated states outnumber the root.
    let share = [0.12, 0.19, 0.19, 0.25, 0.25];

    let mut centers = vec![vec![0.0f64; f]; BRANCHING_CLUSTERS];
    for c in 0..BRANCHING_CLUSTERS {
        for j in 0..f {
            centers[c][j] = baseline[c];
        }
        if c > 0 {
            for j in block_start[c]..block_start[c] + block_len[c] {
                centers[c][j] += peak[c];
            }
            // Lineage: a leaf keeps a trace of its parent's block.
            let p = parent[c];
            if p > 0 {
                for j in block_start[p]..block_start[p] + block_len[p] {
                    centers[c][j] += 0.8;
                }
            }
        }
    }

    let sizes = apportion(points, &share);
    let mut profiles = Mat::zeros(points, f);
    let mut labels = Vec::with_capacity(points);
    let mut row = 0usize;
    for c in 0..BRANCHING_CLUSTERS {
        for _ in 0..sizes[c] {
            // Position along the edge from the parent: u = 1 is the cluster
            // center, small u sits near the parent and bridges the gap.
            let u: f64 = if c == 0 { 1.0 } else { rng.gen_range(0.25..1.0) };
            for j in 0..f {
                let base = (1.0 - u) * centers[parent[c]][j] + u * centers[c][j];
                profiles[(row, j)] = base * (noise[c] * gaussian(&mut rng)).exp();
            }
            labels.push(c);
            row += 1;
        }
    }
    (profiles, labels)
}

/// Integer split of `total` proportional to `share`, largest remainders
/// first so the counts sum exactly.
fn apportion(total: usize, share: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = share.iter().map(|s| (s * total as f64) as usize).collect();
    let mut remainders: Vec<(usize, f64)> = share
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s * total as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut missing = total - counts.iter().sum::<usize>();
    for (i, _) in remainders {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

/// Two well-separated Gaussian blobs in the plane; `n` points per blob.
pub fn two_blobs(seed: u64, n: usize, separation: f64) -> (Mat, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Mat::zeros(2 * n, 2);
    let mut labels = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let blob = i / n;
        let cx = blob as f64 * separation;
        points[(i, 0)] = cx + 0.3 * gaussian(&mut rng);
        points[(i, 1)] = 0.3 * gaussian(&mut rng);
        labels.push(blob);
    }
    (points, labels)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
