//! The embed pipeline: point cloud -> distances -> kernel -> chain ->
//! diffusion map, with all artifacts written as CSV/JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pnmc_core::chains::{rnmc, validate, MarkovChain};
use pnmc_core::embedding::{diffusion_map, Embedding};
use pnmc_core::geometry::{
    anisotropic_kernel, bandwidth_percentile, gaussian_kernel, pairwise_distances,
    phate_kernel, KernelMatrix, PointCloud,
};
use pnmc_core::maxent::{
    pnmc_free_with_pair, pnmc_prescribed_with_scaling, pnmc_update_free,
    pnmc_update_prescribed_with_scaling,
};
use pnmc_core::targets::{
    energy_bias_target, entropy_logistic_target, uniform_target, StationaryTarget,
};

use crate::report::{EigenReport, SolverTelemetry, ValidationReport};
use crate::{io, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Gaussian,
    Phate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ChainChoice {
    Rnmc,
    PnmcFree,
    PnmcPrescribed,
    PnmcUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TargetChoice {
    Uniform,
    EnergyBias,
    Entropy,
    Custom,
}

/// Partial pipeline configuration: every field optional so a config file
/// and command-line flags can be merged, flags winning.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub kernel: Option<KernelChoice>,
    pub epsilon: Option<f64>,
    pub epsilon_percentile: Option<f64>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub chain: Option<ChainChoice>,
    pub target: Option<TargetChoice>,
    pub target_file: Option<PathBuf>,
    pub energy_file: Option<PathBuf>,
    pub energy_col: Option<String>,
    pub beta_old: Option<f64>,
    pub beta_new: Option<f64>,
    pub prior_q: Option<PathBuf>,
    pub prior_p: Option<PathBuf>,
    pub m: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub exclude: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub emit_chain: Option<bool>,
    pub emit_telemetry: Option<bool>,
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    /// Field-wise merge; `self` (the flags) wins over `base` (the file).
    pub fn merge_over(self, base: PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            kernel: self.kernel.or(base.kernel),
            epsilon: self.epsilon.or(base.epsilon),
            epsilon_percentile: self.epsilon_percentile.or(base.epsilon_percentile),
            alpha: self.alpha.or(base.alpha),
            k: self.k.or(base.k),
            beta: self.beta.or(base.beta),
            chain: self.chain.or(base.chain),
            target: self.target.or(base.target),
            target_file: self.target_file.or(base.target_file),
            energy_file: self.energy_file.or(base.energy_file),
            energy_col: self.energy_col.or(base.energy_col),
            beta_old: self.beta_old.or(base.beta_old),
            beta_new: self.beta_new.or(base.beta_new),
            prior_q: self.prior_q.or(base.prior_q),
            prior_p: self.prior_p.or(base.prior_p),
            m: self.m.or(base.m),
            tol: self.tol.or(base.tol),
            max_iter: self.max_iter.or(base.max_iter),
            exclude: self.exclude.or(base.exclude),
            seed: self.seed.or(base.seed),
            emit_chain: self.emit_chain.or(base.emit_chain),
            emit_telemetry: self.emit_telemetry.or(base.emit_telemetry),
        }
    }

    /// Fills defaults and cross-checks the combination.
    pub fn resolve(self) -> Result<EffectiveConfig> {
        let kernel = self.kernel.unwrap_or(KernelChoice::Gaussian);
        let chain = self.chain.unwrap_or(ChainChoice::Rnmc);
        if self.epsilon.is_some() && self.epsilon_percentile.is_some() {
            return Err(Error::input(
                "give either a fixed bandwidth or a percentile, not both",
            ));
        }
        let target = self.target;
        match chain {
            ChainChoice::PnmcPrescribed => {
                if target.is_none() {
                    return Err(Error::input(
                        "chain variant pnmc-prescribed requires a stationary target",
                    ));
                }
            }
            ChainChoice::PnmcUpdate => {
                if self.prior_q.is_none() || self.prior_p.is_none() {
                    return Err(Error::input(
                        "chain variant pnmc-update requires prior chain files (prior-q, prior-p)",
                    ));
                }
            }
            ChainChoice::Rnmc | ChainChoice::PnmcFree => {
                if target.is_some() {
                    return Err(Error::input(
                        "a stationary target only applies to the prescribed and update variants",
                    ));
                }
            }
        }
        match target {
            Some(TargetChoice::Custom) if self.target_file.is_none() => {
                return Err(Error::input("target custom requires a target file"));
            }
            Some(TargetChoice::EnergyBias)
                if self.beta_old.is_none() || self.beta_new.is_none() =>
            {
                return Err(Error::input(
                    "target energy-bias requires beta-old and beta-new",
                ));
            }
            _ => {}
        }
        Ok(EffectiveConfig {
            kernel,
            epsilon: self.epsilon,
            epsilon_percentile: self
                .epsilon_percentile
                .unwrap_or(if self.epsilon.is_some() { 0.0 } else { 10.0 }),
            alpha: self.alpha.unwrap_or(0.0),
            k: self.k.unwrap_or(5),
            beta: self.beta.unwrap_or(8.0),
            chain,
            target,
            target_file: self.target_file,
            energy_file: self.energy_file,
            energy_col: self.energy_col.unwrap_or_else(|| "energy".to_string()),
            beta_old: self.beta_old,
            beta_new: self.beta_new,
            prior_q: self.prior_q,
            prior_p: self.prior_p,
            m: self.m.unwrap_or(2),
            tol: self.tol.unwrap_or(pnmc_core::maxent::DEFAULT_TOL),
            max_iter: self.max_iter.unwrap_or(pnmc_core::maxent::DEFAULT_MAX_ITER),
            exclude: self.exclude.unwrap_or_default(),
            seed: self.seed.unwrap_or(0),
            emit_chain: self.emit_chain.unwrap_or(false),
            emit_telemetry: self.emit_telemetry.unwrap_or(false),
        })
    }
}

/// Fully resolved configuration; echoed into the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConfig {
    pub kernel: KernelChoice,
    pub epsilon: Option<f64>,
    pub epsilon_percentile: f64,
    pub alpha: f64,
    pub k: usize,
    pub beta: f64,
    pub chain: ChainChoice,
    pub target: Option<TargetChoice>,
    pub target_file: Option<PathBuf>,
    pub energy_file: Option<PathBuf>,
    pub energy_col: String,
    pub beta_old: Option<f64>,
    pub beta_new: Option<f64>,
    pub prior_q: Option<PathBuf>,
    pub prior_p: Option<PathBuf>,
    pub m: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub exclude: Vec<String>,
    pub seed: u64,
    pub emit_chain: bool,
    pub emit_telemetry: bool,
}

/// What `embed` computed and where it wrote it.
pub struct EmbedOutcome {
    pub chain: MarkovChain,
    pub embedding: Embedding,
    pub validation: ValidationReport,
    pub files: Vec<PathBuf>,
}

/// Runs the full pipeline and writes `embedding.csv`, `eigenvalues.json`,
/// `validation.json`, and `effective_config.json` into `out_dir` (plus
/// `q.csv`/`p.csv` and `telemetry.json` when requested).
pub fn run_embed(input: &Path, cfg: &EffectiveConfig, out_dir: &Path) -> Result<EmbedOutcome> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::input(format!("{}: {e}", out_dir.display())))?;
    let cloud = io::read_point_cloud(input, &cfg.exclude)?;
    let kernel = build_kernel(&cloud, cfg)?;
    let target = build_target(&cloud, input, cfg)?;
    let (chain, telemetry) = build_chain(&kernel, target.as_ref(), cfg)?;
    let embedding = diffusion_map(&chain, cfg.m, cfg.tol)?;
    let diagnostics = validate(&chain, pnmc_core::chains::DEFAULT_VALIDATE_TOL);
    let validation = ValidationReport::new(&diagnostics, Some(cloud.ids()));

    let mut files = Vec::new();
    let coords_path = out_dir.join("embedding.csv");
    io::write_embedding_csv(&coords_path, cloud.ids(), &embedding.coords)?;
    files.push(coords_path);

    let eigen_path = out_dir.join("eigenvalues.json");
    write_json(&eigen_path, &EigenReport::new(&embedding))?;
    files.push(eigen_path);

    let validation_path = out_dir.join("validation.json");
    write_json(&validation_path, &validation)?;
    files.push(validation_path);

    let config_path = out_dir.join("effective_config.json");
    write_json(&config_path, cfg)?;
    files.push(config_path);

    if cfg.emit_chain {
        let q_path = out_dir.join("q.csv");
        io::write_matrix_csv(&q_path, cloud.ids(), chain.transitions())?;
        files.push(q_path);
        let p_path = out_dir.join("p.csv");
        io::write_vector_csv(&p_path, cloud.ids(), chain.stationary(), "p")?;
        files.push(p_path);
    }
    if cfg.emit_telemetry {
        if let Some(telemetry) = &telemetry {
            let path = out_dir.join("telemetry.json");
            write_json(&path, telemetry)?;
            files.push(path);
        }
    }

    Ok(EmbedOutcome { chain, embedding, validation, files })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Contract(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn build_kernel(cloud: &PointCloud, cfg: &EffectiveConfig) -> Result<KernelMatrix> {
    let distances = pairwise_distances(cloud);
    let base = match cfg.kernel {
        KernelChoice::Gaussian => {
            let epsilon = match cfg.epsilon {
                Some(eps) => eps,
                None => bandwidth_percentile(&distances, cfg.epsilon_percentile)?,
            };
            gaussian_kernel(&distances, epsilon)?
        }
        KernelChoice::Phate => phate_kernel(&distances, cfg.k, cfg.beta)?,
    };
    Ok(anisotropic_kernel(&base, cfg.alpha)?)
}

fn build_target(
    cloud: &PointCloud,
    input: &Path,
    cfg: &EffectiveConfig,
) -> Result<Option<StationaryTarget>> {
    let choice = match cfg.target {
        Some(choice) => choice,
        None => return Ok(None),
    };
    let target = match choice {
        TargetChoice::Uniform => uniform_target(cloud.len())?,
        TargetChoice::EnergyBias => {
            let source = cfg.energy_file.as_deref().unwrap_or(input);
            let energies = aligned_values(source, &cfg.energy_col, cloud.ids())?;
            energy_bias_target(
                &energies,
                cfg.beta_new.expect("checked in resolve"),
                cfg.beta_old.expect("checked in resolve"),
            )?
        }
        TargetChoice::Entropy => entropy_logistic_target(cloud.points())?,
        TargetChoice::Custom => {
            let path = cfg.target_file.as_deref().expect("checked in resolve");
            let weights = aligned_vector(path, cloud.ids())?;
            StationaryTarget::custom(weights)?
        }
    };
    Ok(Some(target))
}

/// Reads the named column of `path` and orders it by `ids`.
fn aligned_values(path: &Path, column: &str, ids: &[String]) -> Result<Vec<f64>> {
    let (file_ids, values) = io::read_vector_csv(path, Some(column))?;
    align(path, &file_ids, &values, ids)
}

/// Reads a 2-column vector file and orders it by `ids`.
fn aligned_vector(path: &Path, ids: &[String]) -> Result<Vec<f64>> {
    let (file_ids, values) = io::read_vector_csv(path, None)?;
    align(path, &file_ids, &values, ids)
}

fn align(path: &Path, file_ids: &[String], values: &[f64], ids: &[String]) -> Result<Vec<f64>> {
    let lookup: std::collections::HashMap<&str, f64> = file_ids
        .iter()
        .map(String::as_str)
        .zip(values.iter().copied())
        .collect();
    ids.iter()
        .map(|id| {
            lookup.get(id.as_str()).copied().ok_or_else(|| {
                Error::input(format!("{}: no value for point id '{id}'", path.display()))
            })
        })
        .collect()
}

fn build_chain(
    kernel: &KernelMatrix,
    target: Option<&StationaryTarget>,
    cfg: &EffectiveConfig,
) -> Result<(MarkovChain, Option<SolverTelemetry>)> {
    match cfg.chain {
        ChainChoice::Rnmc => Ok((rnmc(kernel), None)),
        ChainChoice::PnmcFree => {
            let (chain, pair) = pnmc_free_with_pair(kernel, cfg.tol)?;
            Ok((chain, Some(SolverTelemetry::from_perron(&pair))))
        }
        ChainChoice::PnmcPrescribed => {
            let target = target.expect("checked in resolve");
            let (chain, scaling) =
                pnmc_prescribed_with_scaling(kernel, target, cfg.tol, cfg.max_iter)?;
            Ok((chain, Some(SolverTelemetry::from_scaling(&scaling))))
        }
        ChainChoice::PnmcUpdate => {
            let prior = read_prior(cfg)?;
            match target {
                Some(target) => {
                    let (chain, scaling) = pnmc_update_prescribed_with_scaling(
                        kernel,
                        &prior,
                        target,
                        cfg.tol,
                        cfg.max_iter,
                    )?;
                    Ok((chain, Some(SolverTelemetry::from_scaling(&scaling))))
                }
                None => {
                    let chain = pnmc_update_free(kernel, &prior, cfg.tol)?;
                    Ok((chain, None))
                }
            }
        }
    }
}

fn read_prior(cfg: &EffectiveConfig) -> Result<MarkovChain> {
    let q_path = cfg.prior_q.as_deref().expect("checked in resolve");
    let p_path = cfg.prior_p.as_deref().expect("checked in resolve");
    let (q_ids, q) = io::read_matrix_csv(q_path)?;
    let (p_ids, p) = io::read_vector_csv(p_path, None)?;
    if q_ids != p_ids {
        return Err(Error::input(format!(
            "{} and {} disagree on point ids",
            q_path.display(),
            p_path.display()
        )));
    }
    Ok(MarkovChain::for_audit(q, p)?)
}
