use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use pnmc::core::chains::{validate, MarkovChain};
use pnmc::core::ising::metropolis_sample;
use pnmc::core::targets::{
    energy_bias_target, entropy_logistic_target, uniform_target, StationaryTarget,
};
use pnmc::pipeline::{ChainChoice, KernelChoice, PipelineConfig, TargetChoice};
use pnmc::report::{error_json, ValidationReport};
use pnmc::{io, Error};

/// Environment variable holding the default output directory.
const OUT_DIR_ENV: &str = "PNMC_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "pnmc",
    version,
    about = "Markov chains on point clouds: kernels, row/path-entropy normalization, diffusion maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run distances -> kernel -> chain -> diffusion map on a point-cloud CSV
    Embed(EmbedArgs),
    /// Sample 2-D Ising spin configurations with a Metropolis chain
    Ising(IsingArgs),
    /// Audit a chain (transition CSV + stationary CSV) against its invariants
    Validate(ValidateArgs),
    /// Build stationary-target files
    Target(TargetArgs),
}

#[derive(Args)]
struct EmbedArgs {
    /// Point-cloud CSV: id column first, coordinates after, optional header
    #[arg(long)]
    input: PathBuf,
    /// Output directory (default: $PNMC_OUT_DIR, then ".")
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Optional JSON config; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kernel: Option<KernelChoice>,
    /// Fixed Gaussian bandwidth (overrides the percentile rule)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Percentile of pairwise distances used as the bandwidth (default 10)
    #[arg(long)]
    epsilon_percentile: Option<f64>,
    /// Density-normalization exponent in [0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Neighbor count for the adaptive-bandwidth kernel
    #[arg(long)]
    k: Option<usize>,
    /// Decay exponent for the adaptive-bandwidth kernel
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    chain: Option<ChainChoice>,
    #[arg(long, value_enum)]
    target: Option<TargetChoice>,
    /// 2-column (id, weight) CSV for --target custom
    #[arg(long)]
    target_file: Option<PathBuf>,
    /// CSV holding per-point energies (defaults to the input file)
    #[arg(long)]
    energy_file: Option<PathBuf>,
    /// Column name holding energies (default "energy")
    #[arg(long)]
    energy_col: Option<String>,
    /// Inverse temperature the samples were drawn at
    #[arg(long)]
    beta_old: Option<f64>,
    /// Inverse temperature the target distribution should represent
    #[arg(long)]
    beta_new: Option<f64>,
    /// Prior chain transition matrix CSV (pnmc-update)
    #[arg(long)]
    prior_q: Option<PathBuf>,
    /// Prior chain stationary CSV (pnmc-update)
    #[arg(long)]
    prior_p: Option<PathBuf>,
    /// Number of diffusion coordinates
    #[arg(long)]
    m: Option<usize>,
    /// Solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for the scaling solver
    #[arg(long)]
    max_iter: Option<usize>,
    /// Comma-separated column names to drop from the coordinates
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    /// Seed echoed into the effective config (the pipeline is deterministic)
    #[arg(long)]
    seed: Option<u64>,
    /// Also write q.csv and p.csv
    #[arg(long)]
    emit_chain: bool,
    /// Also write telemetry.json with solver iteration traces
    #[arg(long)]
    emit_telemetry: bool,
}

#[derive(Args)]
struct IsingArgs {
    /// Lattice side length
    #[arg(long, default_value_t = 16)]
    l: usize,
    /// Temperature k_B T
    #[arg(long, default_value_t = 2.4)]
    kbt: f64,
    /// Number of recorded configurations
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Discarded equilibration sweeps
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    /// Sweeps between recorded configurations
    #[arg(long, default_value_t = 10)]
    thinning: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Transition matrix CSV (id header row and column)
    #[arg(long)]
    q: PathBuf,
    /// Stationary vector CSV (2 columns)
    #[arg(long)]
    p: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct TargetArgs {
    #[command(subcommand)]
    kind: TargetKind,
}

#[derive(Subcommand)]
enum TargetKind {
    /// Equal mass on every point
    Uniform {
        /// Point-cloud CSV supplying the ids
        #[arg(long, conflicts_with = "n")]
        input: Option<PathBuf>,
        /// Number of points (ids become 0..n-1)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reweight samples from one inverse temperature to another
    EnergyBias {
        /// CSV holding per-point energies
        #[arg(long)]
        energy_file: PathBuf,
        #[arg(long, default_value = "energy")]
        energy_col: String,
        #[arg(long)]
        beta_old: f64,
        #[arg(long)]
        beta_new: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weight points by the Shannon entropy of their feature profile
    Entropy {
        /// Point-cloud CSV whose coordinates are the profiles
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated column names to drop first
        #[arg(long, value_delimiter = ',')]
        exclude: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate and normalize an existing 2-column weight file
    Custom {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            match err {
                Error::Input { .. } => 2,
                Error::Contract(_) => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> pnmc::Result<i32> {
    match cli.command {
        Command::Embed(args) => run_embed(args),
        Command::Ising(args) => run_ising(args),
        Command::Validate(args) => run_validate(args),
        Command::Target(args) => run_target(args),
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run_embed(args: EmbedArgs) -> pnmc::Result<i32> {
    let out_dir = args.out_dir.clone().unwrap_or_else(default_out_dir);
    let from_flags = PipelineConfig {
        kernel: args.kernel,
        epsilon: args.epsilon,
        epsilon_percentile: args.epsilon_percentile,
        alpha: args.alpha,
        k: args.k,
        beta: args.beta,
        chain: args.chain,
        target: args.target,
        target_file: args.target_file,
        energy_file: args.energy_file,
        energy_col: args.energy_col,
        beta_old: args.beta_old,
        beta_new: args.beta_new,
        prior_q: args.prior_q,
        prior_p: args.prior_p,
        m: args.m,
        tol: args.tol,
        max_iter: args.max_iter,
        exclude: args.exclude,
        seed: args.seed,
        emit_chain: if args.emit_chain { Some(true) } else { None },
        emit_telemetry: if args.emit_telemetry { Some(true) } else { None },
    };
    let merged = match &args.config {
        Some(path) => from_flags.merge_over(PipelineConfig::from_json_file(path)?),
        None => from_flags,
    };
    let cfg = merged.resolve()?;
    let outcome = pnmc::pipeline::run_embed(&args.input, &cfg, &out_dir)?;
    for path in &outcome.files {
        println!("{}", path.display());
    }
    Ok(0)
}

fn run_ising(args: IsingArgs) -> pnmc::Result<i32> {
    let sample = metropolis_sample(
        args.l,
        args.kbt,
        args.samples,
        args.burn_in,
        args.thinning,
        args.seed,
    )?;
    io::write_ising_csv(&args.out, &sample)?;
    println!("{}", args.out.display());
    Ok(0)
}

fn run_validate(args: ValidateArgs) -> pnmc::Result<i32> {
    let (q_ids, q) = io::read_matrix_csv(&args.q)?;
    let (p_ids, p) = io::read_vector_csv(&args.p, None)?;
    if q_ids != p_ids {
        return Err(Error::input(format!(
            "{} and {} disagree on point ids",
            args.q.display(),
            args.p.display()
        )));
    }
    let chain = MarkovChain::for_audit(q, p)?;
    let diagnostics = validate(&chain, args.tol);
    let report = ValidationReport::new(&diagnostics, Some(&q_ids));
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Contract(e.to_string()))?
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn run_target(args: TargetArgs) -> pnmc::Result<i32> {
    match args.kind {
        TargetKind::Uniform { input, n, out } => {
            let ids = match (input, n) {
                (Some(path), None) => read_ids(&path)?,
                (None, Some(n)) => (0..n).map(|i| format!("{i}")).collect(),
                _ => {
                    return Err(Error::input(
                        "give exactly one of --input or --n".to_string(),
                    ))
                }
            };
            let target = uniform_target(ids.len())?;
            write_target(&out, &ids, &target)
        }
        TargetKind::EnergyBias { energy_file, energy_col, beta_old, beta_new, out } => {
            let (ids, energies) = io::read_vector_csv(&energy_file, Some(&energy_col))?;
            let target = energy_bias_target(&energies, beta_new, beta_old)?;
            write_target(&out, &ids, &target)
        }
        TargetKind::Entropy { input, exclude, out } => {
            let cloud = io::read_point_cloud(&input, &exclude.unwrap_or_default())?;
            let target = entropy_logistic_target(cloud.points())?;
            write_target(&out, cloud.ids(), &target)
        }
        TargetKind::Custom { input, out } => {
            let (ids, weights) = io::read_vector_csv(&input, None)?;
            let target = StationaryTarget::custom(weights)?;
            write_target(&out, &ids, &target)
        }
    }
}

fn write_target(out: &Path, ids: &[String], target: &StationaryTarget) -> pnmc::Result<i32> {
    io::write_vector_csv(out, ids, target.probabilities(), "p")?;
    println!("{}", out.display());
    Ok(0)
}

/// First column of any CSV, skipping a header row when one is present.
fn read_ids(path: &Path) -> pnmc::Result<Vec<String>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.is_empty() {
            continue;
        }
        let looks_like_header =
            i == 0 && record.iter().skip(1).any(|cell| cell.parse::<f64>().is_err());
        if looks_like_header {
            continue;
        }
        ids.push(record[0].to_string());
    }
    if ids.is_empty() {
        return Err(Error::input(format!("{}: no data rows", path.display())));
    }
    Ok(ids)
}
