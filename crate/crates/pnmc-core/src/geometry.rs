//! Pairwise distances and affinity-kernel constructions.
//!
//! A kernel here is a symmetric, strictly positive `N x N` matrix scoring the
//! vicinity of point pairs. Three families are provided: the Gaussian kernel
//! `exp(-d^2 / 2 eps^2)`, its density-corrected anisotropic variant
//! `K(a,b) / (D(a)^alpha D(b)^alpha)`, and an adaptive-bandwidth kernel
//! `exp(-(d/eps_k(a))^beta) + exp(-(d/eps_k(b))^beta)` whose per-point scale
//! `eps_k(a)` is the distance to the k-th nearest neighbor.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, pow, sqrt};

use crate::mat::Mat;
use crate::{Error, Result};

/// Smallest kernel entry kept after underflow clamping. Gaussian tails reach
/// zero in finite precision; the spectral and scaling machinery downstream
/// requires strict positivity.
pub const KERNEL_FLOOR: f64 = 1e-300;

/// Tolerance for the symmetry check on kernel matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A set of `N` points in `R^n` with opaque ids and optional labels.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Mat,
    ids: Vec<String>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    /// `points` is `N x n`. Requires `N >= 2`, `n >= 1`, finite coordinates,
    /// and unique ids; `labels`, when given, must have one entry per point.
    pub fn new(points: Mat, ids: Vec<String>, labels: Option<Vec<String>>) -> Result<Self> {
        let n_points = points.rows();
        if n_points < 2 {
            return Err(Error::Input(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        if points.cols() < 1 {
            return Err(Error::Input("points must have at least 1 coordinate".into()));
        }
        if !points.all_finite() {
            return Err(Error::Input("non-finite coordinate in point cloud".into()));
        }
        if ids.len() != n_points {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {n_points} points",
                ids.len()
            )));
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("point ids are not unique".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n_points {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {n_points} points",
                    labels.len()
                )));
            }
        }
        Ok(PointCloud { points, ids, labels })
    }

    /// Convenience constructor with ids `"0".."N-1"` and no labels.
    pub fn from_points(points: Mat) -> Result<Self> {
        let ids = (0..points.rows()).map(|i| format!("{i}")).collect();
        PointCloud::new(points, ids, None)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Mat {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Symmetric matrix of pairwise Euclidean distances with a zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d: Mat,
}

impl DistanceMatrix {
    /// Wraps a precomputed distance matrix. Must be square, symmetric,
    /// nonnegative, and zero on the diagonal.
    pub fn new(d: Mat) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "distance matrix must be square, got {}x{}",
                d.rows(),
                d.cols()
            )));
        }
        if !d.all_finite() || d.iter().any(|v| *v < 0.0) {
            return Err(Error::Input(
                "distance matrix has negative or non-finite entries".into(),
            ));
        }
        if (0..d.rows()).any(|i| d[(i, i)] != 0.0) {
            return Err(Error::Input("distance matrix diagonal is not zero".into()));
        }
        if d.asymmetry() > SYMMETRY_TOL {
            return Err(Error::Input("distance matrix is not symmetric".into()));
        }
        Ok(DistanceMatrix { d })
    }

    pub fn len(&self) -> usize {
        self.d.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn matrix(&self) -> &Mat {
        &self.d
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.d[(a, b)]
    }
}

/// Kernel family tag carried alongside the matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Gaussian { epsilon: f64 },
    /// Adaptive-bandwidth kernel; `bandwidths[a]` is the k-th neighbor
    /// distance of point `a`.
    Phate { k: usize, beta: f64, bandwidths: Vec<f64> },
    /// Anything assembled outside the named constructions.
    Custom,
}

/// Construction metadata for a kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMeta {
    pub family: KernelFamily,
    /// Density-normalization exponent already applied to the matrix.
    pub alpha: f64,
}

/// Symmetric strictly positive affinity matrix plus provenance metadata.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    delta: Mat,
    meta: KernelMeta,
}

impl KernelMatrix {
    /// Wraps an arbitrary symmetric positive matrix as a kernel. Entries at
    /// or below [`KERNEL_FLOOR`] are clamped up to it.
    pub fn from_matrix(mut delta: Mat, meta: KernelMeta) -> Result<Self> {
        if !delta.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "kernel must be square, got {}x{}",
                delta.rows(),
                delta.cols()
            )));
        }
        if !delta.all_finite() {
            return Err(Error::Input("kernel has non-finite entries".into()));
        }
        if delta.iter().any(|v| *v < 0.0) {
            return Err(Error::Input("kernel has negative entries".into()));
        }
        if delta.asymmetry() > SYMMETRY_TOL {
            return Err(Error::Input("kernel is not symmetric".into()));
        }
        for v in delta.iter_mut() {
            if *v < KERNEL_FLOOR {
                *v = KERNEL_FLOOR;
            }
        }
        Ok(KernelMatrix { delta, meta })
    }

    pub fn len(&self) -> usize {
        self.delta.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn matrix(&self) -> &Mat {
        &self.delta
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.delta[(a, b)]
    }

    /// Kernel-density estimate `D(a) = sum_b Delta(a,b)`.
    pub fn density(&self) -> Vec<f64> {
        self.delta.row_sums()
    }
}

/// Euclidean distance between every pair of points.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut d = Mat::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let dist = sqrt(
                cloud
                    .point(a)
                    .iter()
                    .zip(cloud.point(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum(),
            );
            d[(a, b)] = dist;
            d[(b, a)] = dist;
        }
    }
    DistanceMatrix { d }
}

/// The `pct`-th percentile of the off-diagonal pairwise distances,
/// nearest-rank (ceiling) convention over the strict upper triangle.
///
/// `pct` must lie in `(0, 100]`; `pct = 100` returns the maximum distance.
pub fn bandwidth_percentile(d: &DistanceMatrix, pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Parameter(format!(
            "percentile must be in (0, 100], got {pct}"
        )));
    }
    let n = d.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            pairs.push(d.get(a, b));
        }
    }
    pairs.sort_unstable_by(|x, y| x.total_cmp(y));
    let m = pairs.len();
    let rank = libm::ceil(pct / 100.0 * m as f64) as usize;
    let eps = pairs[rank.clamp(1, m) - 1];
    if eps <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "the {pct}-th percentile pairwise distance is zero (duplicate points dominate)"
        )));
    }
    Ok(eps)
}

/// Gaussian kernel `exp(-d(a,b)^2 / (2 eps^2))`.
pub fn gaussian_kernel(d: &DistanceMatrix, epsilon: f64) -> Result<KernelMatrix> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!(
            "bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    let n = d.len();
    let mut delta = Mat::zeros(n, n);
    let denom = 2.0 * epsilon * epsilon;
    for a in 0..n {
        delta[(a, a)] = 1.0;
        for b in (a + 1)..n {
            let dist = d.get(a, b);
            let v = exp(-dist * dist / denom).max(KERNEL_FLOOR);
            delta[(a, b)] = v;
            delta[(b, a)] = v;
        }
    }
    Ok(KernelMatrix {
        delta,
        meta: KernelMeta {
            family: KernelFamily::Gaussian { epsilon },
            alpha: 0.0,
        },
    })
}

/// Density-corrected kernel `Delta(a,b) / (D(a)^alpha D(b)^alpha)` with
/// `D(a) = sum_b Delta(a,b)`. `alpha = 0` returns the input unchanged;
/// `alpha = 1` divides out the density estimate entirely.
pub fn anisotropic_kernel(kernel: &KernelMatrix, alpha: f64) -> Result<KernelMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(kernel.clone());
    }
    let n = kernel.len();
    let scale: Vec<f64> = kernel.density().iter().map(|d| pow(*d, alpha)).collect();
    let mut delta = Mat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = (kernel.get(a, b) / (scale[a] * scale[b])).max(KERNEL_FLOOR);
            delta[(a, b)] = v;
            delta[(b, a)] = v;
        }
    }
    Ok(KernelMatrix {
        delta,
        meta: KernelMeta {
            family: kernel.meta.family.clone(),
            alpha,
        },
    })
}

/// Distance from each point to its `k`-th nearest neighbor (self excluded).
/// Ties are broken by point index so results are reproducible.
fn knn_bandwidths(d: &DistanceMatrix, k: usize) -> Result<Vec<f64>> {
    let n = d.len();
    let mut out = Vec::with_capacity(n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for a in 0..n {
        order.clear();
        order.extend((0..n).filter(|b| *b != a));
        order.sort_unstable_by(|&x, &y| d.get(a, x).total_cmp(&d.get(a, y)).then(x.cmp(&y)));
        let eps = d.get(a, order[k - 1]);
        if eps <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "point {a}: k-th nearest neighbor is a duplicate point (eps_k = 0)"
            )));
        }
        out.push(eps);
    }
    Ok(out)
}

/// Adaptive-bandwidth kernel
/// `exp(-(d/eps_k(a))^beta) + exp(-(d/eps_k(b))^beta)` where `eps_k(a)` is
/// the distance from `a` to its `k`-th nearest neighbor. Diagonal is 2.
pub fn phate_kernel(d: &DistanceMatrix, k: usize, beta: f64) -> Result<KernelMatrix> {
    let n = d.len();
    if k < 1 || k > n - 1 {
        return Err(Error::Parameter(format!(
            "k must be in [1, {}], got {k}",
            n - 1
        )));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let bandwidths = knn_bandwidths(d, k)?;
    let mut delta = Mat::zeros(n, n);
    for a in 0..n {
        delta[(a, a)] = 2.0;
        for b in (a + 1)..n {
            let dist = d.get(a, b);
            let v = (exp(-pow(dist / bandwidths[a], beta)) + exp(-pow(dist / bandwidths[b], beta)))
                .max(KERNEL_FLOOR);
            delta[(a, b)] = v;
            delta[(b, a)] = v;
        }
    }
    Ok(KernelMatrix {
        delta,
        meta: KernelMeta {
            family: KernelFamily::Phate { k, beta, bandwidths },
            alpha: 0.0,
        },
    })
}
