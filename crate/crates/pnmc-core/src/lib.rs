//! Markov chains on point clouds.
//!
//! Starting from an affinity kernel over `N` data points, this crate builds
//! row-stochastic Markov chains two ways:
//!
//! - **RNMC** (row-normalized Markov chain): divide each kernel row by its
//!   sum. Local, fully determined by the kernel.
//! - **PNMC** (path-normalized Markov chain): maximize the entropy of long
//!   stationary trajectories subject to constraints — a mean squared step
//!   length, optionally a user-prescribed stationary distribution, and
//!   optionally minimal deformation from a prior chain.
//!
//! Chains feed into [`embedding::diffusion_map`] for spectral coordinates.
//! [`ising`] provides a desk-scale Metropolis sampler used by the worked
//! examples, [`targets`] builds prescribed stationary distributions, and
//! [`oracle`] holds brute-force reference optimizers used to anchor the
//! analytic constructions in tests.
//!
//! The crate is `no_std` + `alloc`; all IO lives in the companion `pnmc`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chains;
pub mod eigen;
pub mod embedding;
mod error;
pub mod geometry;
pub mod ising;
pub mod mat;
pub mod maxent;
pub mod oracle;
pub mod targets;

pub use error::{Error, Result};
pub use mat::Mat;
