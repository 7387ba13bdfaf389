//! Single-spin-flip Metropolis sampler for the 2-D Ising model.
//!
//! Ferromagnetic convention `E = -sum_nn s_i s_j` on an `L x L` square
//! lattice with periodic boundaries, each bond counted once through the
//! right and down neighbors. States are weighted by `exp(-E / k_B T)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::exp;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mat::Mat;
use crate::{Error, Result};

/// Square lattice of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinLattice {
    l: usize,
    spins: Vec<i8>,
    rng_seed: u64,
}

impl SpinLattice {
    /// All-spins-up lattice; the sampler's deterministic start.
    pub fn all_up(l: usize, rng_seed: u64) -> Result<Self> {
        if l < 2 {
            return Err(Error::Parameter(format!("lattice side must be >= 2, got {l}")));
        }
        Ok(SpinLattice { l, spins: vec![1; l * l], rng_seed })
    }

    /// Wraps explicit spins (row-major, length `l * l`, entries ±1).
    pub fn from_spins(l: usize, spins: Vec<i8>, rng_seed: u64) -> Result<Self> {
        if l < 2 {
            return Err(Error::Parameter(format!("lattice side must be >= 2, got {l}")));
        }
        if spins.len() != l * l {
            return Err(Error::DimensionMismatch(format!(
                "{} spins for an {l}x{l} lattice",
                spins.len()
            )));
        }
        if spins.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::Input("spins must be +1 or -1".into()));
        }
        Ok(SpinLattice { l, spins, rng_seed })
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.l + col
    }

    #[inline]
    fn spin(&self, row: usize, col: usize) -> i8 {
        self.spins[self.idx(row, col)]
    }

    /// Mean spin, in `[-1, 1]`.
    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|s| *s as f64).sum::<f64>() / (self.l * self.l) as f64
    }
}

/// Total energy `-sum_nn s_i s_j` over right and down bonds with periodic
/// wrap: `2 L^2` bond terms, ground state energy `-2 L^2`.
pub fn energy(lattice: &SpinLattice) -> f64 {
    let l = lattice.l;
    let mut acc = 0i64;
    for row in 0..l {
        for col in 0..l {
            let s = lattice.spin(row, col) as i64;
            let right = lattice.spin(row, (col + 1) % l) as i64;
            let down = lattice.spin((row + 1) % l, col) as i64;
            acc += s * (right + down);
        }
    }
    -(acc as f64)
}

/// A set of sampled spin configurations with their observables.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingSample {
    /// One flattened `L^2` spin vector per sample.
    pub configurations: Vec<Vec<i8>>,
    pub energies: Vec<f64>,
    /// Mean spin per sample.
    pub magnetizations: Vec<f64>,
    /// `k_B T` the chain ran at.
    pub temperature: f64,
    pub side: usize,
    pub seed: u64,
}

impl IsingSample {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// Samples as an `n x L^2` coordinate matrix of ±1 values, ready to be
    /// treated as a point cloud.
    pub fn configurations_matrix(&self) -> Mat {
        let n = self.configurations.len();
        let dim = self.side * self.side;
        let mut m = Mat::zeros(n, dim);
        for (i, config) in self.configurations.iter().enumerate() {
            for (j, s) in config.iter().enumerate() {
                m[(i, j)] = *s as f64;
            }
        }
        m
    }
}

/// Single-spin-flip Metropolis from an all-up start: `burn_in` sweeps are
/// discarded, then one sample is recorded every `thinning` sweeps (one sweep
/// is `L^2` proposed flips at uniformly random sites). Acceptance is
/// `min(1, exp(-dE / k_B T))`. Deterministic for a given seed.
pub fn metropolis_sample(
    l: usize,
    k_bt: f64,
    n_samples: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<IsingSample> {
    if !(k_bt > 0.0) || !k_bt.is_finite() {
        return Err(Error::Parameter(format!(
            "temperature must be positive and finite, got {k_bt}"
        )));
    }
    if n_samples < 1 {
        return Err(Error::Parameter("need at least 1 sample".into()));
    }
    if thinning < 1 {
        return Err(Error::Parameter("thinning must be at least 1 sweep".into()));
    }
    let mut lattice = SpinLattice::all_up(l, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut configurations = Vec::with_capacity(n_samples);
    let mut energies = Vec::with_capacity(n_samples);
    let mut magnetizations = Vec::with_capacity(n_samples);

    for _ in 0..burn_in {
        sweep(&mut lattice, k_bt, &mut rng);
    }
    for _ in 0..n_samples {
        for _ in 0..thinning {
            sweep(&mut lattice, k_bt, &mut rng);
        }
        configurations.push(lattice.spins.clone());
        energies.push(energy(&lattice));
        magnetizations.push(lattice.magnetization());
    }
    Ok(IsingSample {
        configurations,
        energies,
        magnetizations,
        temperature: k_bt,
        side: l,
        seed,
    })
}

fn sweep(lattice: &mut SpinLattice, k_bt: f64, rng: &mut ChaCha8Rng) {
    let l = lattice.l;
    for _ in 0..l * l {
        let row = rng.gen_range(0..l);
        let col = rng.gen_range(0..l);
        let s = lattice.spin(row, col) as i32;
        let neighbors = lattice.spin(row, (col + 1) % l) as i32
            + lattice.spin(row, (col + l - 1) % l) as i32
            + lattice.spin((row + 1) % l, col) as i32
            + lattice.spin((row + l - 1) % l, col) as i32;
        // Flipping s changes E = -s * neighbors to +s * neighbors.
        let delta_e = (2 * s * neighbors) as f64;
        if delta_e <= 0.0 || rng.gen::<f64>() < exp(-delta_e / k_bt) {
            let idx = lattice.idx(row, col);
            lattice.spins[idx] = -lattice.spins[idx];
        }
    }
}
