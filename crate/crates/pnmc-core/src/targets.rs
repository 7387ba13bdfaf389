//! Prescribed stationary distributions.
//!
//! Two recipes beyond the uniform one: reweighting samples drawn at one
//! inverse temperature so they represent another (energy bias), and
//! favoring points whose feature profiles have high Shannon entropy
//! (logistic entropy weighting).

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::mat::Mat;
use crate::{Error, Result};

/// Floor applied to target entries after normalization; keeps the "strictly
/// positive" invariant when exponential weights underflow.
const TARGET_FLOOR: f64 = 1e-300;

/// How a target was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetProvenance {
    Uniform,
    EnergyBias,
    EntropyLogistic,
    Custom,
}

impl TargetProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetProvenance::Uniform => "uniform",
            TargetProvenance::EnergyBias => "energy_bias",
            TargetProvenance::EntropyLogistic => "entropy_logistic",
            TargetProvenance::Custom => "custom",
        }
    }
}

/// A strictly positive probability vector over the data points.
#[derive(Debug, Clone)]
pub struct StationaryTarget {
    p: Vec<f64>,
    provenance: TargetProvenance,
}

impl StationaryTarget {
    fn from_weights(mut weights: Vec<f64>, provenance: TargetProvenance) -> Self {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w = (*w / total).max(TARGET_FLOOR);
        }
        StationaryTarget { p: weights, provenance }
    }

    /// Wraps caller-supplied positive weights, normalizing them to sum 1.
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Input(format!(
                "target needs at least 2 entries, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Input(
                "target weights must be strictly positive and finite".into(),
            ));
        }
        Ok(StationaryTarget::from_weights(weights, TargetProvenance::Custom))
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn provenance(&self) -> TargetProvenance {
        self.provenance
    }

    pub fn get(&self, a: usize) -> f64 {
        self.p[a]
    }
}

/// `p_a = 1/N`.
pub fn uniform_target(n: usize) -> Result<StationaryTarget> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 states, got {n}")));
    }
    Ok(StationaryTarget {
        p: alloc::vec![1.0 / n as f64; n],
        provenance: TargetProvenance::Uniform,
    })
}

/// `p_a ∝ exp(-(beta_new - beta_old) E_a)`: the extra weight each sample
/// drawn at inverse temperature `beta_old` must receive to represent the
/// ensemble at `beta_new`. Exponents are max-shifted before exponentiation.
pub fn energy_bias_target(
    energies: &[f64],
    beta_new: f64,
    beta_old: f64,
) -> Result<StationaryTarget> {
    if energies.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 energies, got {}",
            energies.len()
        )));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Input("energies must be finite".into()));
    }
    if !(beta_new > 0.0) || !(beta_old > 0.0) {
        return Err(Error::Parameter(
            "inverse temperatures must be positive".into(),
        ));
    }
    let dbeta = beta_new - beta_old;
    let exponents: Vec<f64> = energies.iter().map(|e| -dbeta * e).collect();
    let shift = exponents.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let weights: Vec<f64> = exponents.iter().map(|x| exp(x - shift)).collect();
    Ok(StationaryTarget::from_weights(
        weights,
        TargetProvenance::EnergyBias,
    ))
}

/// Shannon entropy of each row after normalizing it to a probability
/// profile, then `p_i ∝ logistic(s_i)`: points with more even profiles get
/// more stationary mass.
pub fn entropy_logistic_target(profiles: &Mat) -> Result<StationaryTarget> {
    let n = profiles.rows();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 profiles, got {n}")));
    }
    if !profiles.all_finite() || profiles.iter().any(|v| *v < 0.0) {
        return Err(Error::Input(
            "profiles must be nonnegative and finite".into(),
        ));
    }
    let entropies = profile_entropies(profiles)?;
    let weights: Vec<f64> = entropies.iter().map(|s| 1.0 / (1.0 + exp(-s))).collect();
    Ok(StationaryTarget::from_weights(
        weights,
        TargetProvenance::EntropyLogistic,
    ))
}

/// Per-row Shannon entropies (rows normalized first, `0 log 0 = 0`); the
/// weights behind [`entropy_logistic_target`], exposed for reporting.
pub fn profile_entropies(profiles: &Mat) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(profiles.rows());
    for i in 0..profiles.rows() {
        let row = profiles.row(i);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "profile row {i} sums to zero"
            )));
        }
        let mut s = 0.0;
        for x in row {
            let x = x / total;
            if x > 0.0 {
                s -= x * log(x);
            }
        }
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn check_target_sum(target: &StationaryTarget) -> bool {
        (target.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    #[test]
    fn uniform_target_values() {
        let t = uniform_target(4).unwrap();
        assert_eq!(t.probabilities(), &[0.25; 4]);
        let t = uniform_target(2).unwrap();
        assert_eq!(t.probabilities(), &[0.5, 0.5]);
        let t = uniform_target(7).unwrap();
        assert!((t.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(uniform_target(1).is_err());
    }

    #[test]
    fn energy_bias_equal_betas_is_uniform() {
        let t = energy_bias_target(&[3.0, -1.0, 0.5], 0.7, 0.7).unwrap();
        for p in t.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_bias_two_level_ratio() {
        // Energies (0, ln2/dbeta) give weights (1, 1/2).
        let dbeta = 0.25;
        let t = energy_bias_target(&[0.0, 2.0f64.ln() / dbeta], 0.5, 0.25).unwrap();
        assert!((t.get(0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((t.get(1) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn energy_bias_matches_direct_formula() {
        let mut rng = StdRng::seed_from_u64(43);
        let energies: Vec<f64> = (0..50).map(|_| rng.gen_range(-600.0..-200.0)).collect();
        let beta_old = 1.0 / 2.4;
        let beta_new = 1.0 / 2.25;
        let t = energy_bias_target(&energies, beta_new, beta_old).unwrap();
        // Direct evaluation, offset by the first energy for comparability.
        let raw: Vec<f64> = energies
            .iter()
            .map(|e| (-(beta_new - beta_old) * (e - energies[0])).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        for (a, r) in raw.iter().enumerate() {
            assert!((t.get(a) - r / total).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_bias_invariant_to_energy_offset() {
        let energies = vec![1.0, 4.0, -2.0, 0.0];
        let shifted: Vec<f64> = energies.iter().map(|e| e + 123.0).collect();
        let a = energy_bias_target(&energies, 0.44, 0.41).unwrap();
        let b = energy_bias_target(&shifted, 0.44, 0.41).unwrap();
        for i in 0..4 {
            assert!((a.get(i) - b.get(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_logistic_hand_cases() {
        // One-hot row: s = 0, weight 1/2. Uniform row over F = 4:
        // s = ln 4, weight 4/5. Normalized: (5/13, 8/13).
        let profiles = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.25, 0.25, 0.25, 0.25],
        ])
        .unwrap();
        let t = entropy_logistic_target(&profiles).unwrap();
        assert!((t.get(0) - 5.0 / 13.0).abs() < 1e-14);
        assert!((t.get(1) - 8.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_logistic_row_scaling_invariance() {
        let mut rng = StdRng::seed_from_u64(47);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.gen_range(0.0..3.0)).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|x| x * (i as f64 + 0.5)).collect())
            .collect();
        let a = entropy_logistic_target(&Mat::from_rows(&rows).unwrap()).unwrap();
        let b = entropy_logistic_target(&Mat::from_rows(&scaled).unwrap()).unwrap();
        for i in 0..6 {
            assert!((a.get(i) - b.get(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_logistic_monotone_in_entropy() {
        // Progressively flatter profiles must receive nondecreasing mass.
        let profiles = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.7, 0.2, 0.1],
            vec![0.5, 0.3, 0.2],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        ])
        .unwrap();
        let entropies = profile_entropies(&profiles).unwrap();
        assert!(entropies.windows(2).all(|w| w[0] < w[1]));
        let t = entropy_logistic_target(&profiles).unwrap();
        for i in 0..3 {
            assert!(t.get(i) <= t.get(i + 1));
        }
    }

    #[test]
    fn entropy_logistic_rejects_zero_row() {
        let profiles =
            Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 1.0]]).unwrap();
        match entropy_logistic_target(&profiles) {
            Err(Error::DegenerateInput(msg)) => assert!(msg.contains("row 1")),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn custom_normalizes_and_validates() {
        let t = StationaryTarget::custom(vec![2.0, 1.0, 1.0]).unwrap();
        assert!((t.get(0) - 0.5).abs() < 1e-15);
        assert!(check_target_sum(&t));
        assert!(StationaryTarget::custom(vec![1.0, 0.0]).is_err());
        assert!(StationaryTarget::custom(vec![1.0, -1.0]).is_err());
    }
}
