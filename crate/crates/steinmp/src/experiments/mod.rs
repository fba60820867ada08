//! Experiment drivers. Each driver computes its independent jobs in
//! parallel, then writes outputs from a single thread in a fixed order, so
//! reruns with the same config and seed produce byte-identical files.

mod bandwidth;
mod collapse;
mod denoise;
mod grid;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use steinmp_core::hmc::{run_chain, HmcConfig, SampleBank};
use steinmp_core::metrics::DiagnosticsRecord;
use steinmp_core::mpsvgd::{self, local_decomposition, MpSvgdConfig};
use steinmp_core::svgd::{self, compute_phi, SvgdConfig, UpdateDecomposition};
use steinmp_core::{FactorGraph, GrayImage, KernelSpec, Locality, Matrix};
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig, HmcSettings, Method};
use crate::manifest::{input_hash, RunManifest};
use crate::pgm;
use crate::streams::Streams;
use crate::table::Table;

pub use denoise::synthetic_image;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read input {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("inference failed: {0}")]
    Core(#[from] steinmp_core::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl RunError {
    /// 1 for configuration and input problems, 2 for failures during the run.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Input { .. } => 1,
            RunError::Output { .. } | RunError::Core(_) | RunError::Pool(_) => 2,
        }
    }

    pub(crate) fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        RunError::Input {
            path: path.to_owned(),
            message: err.to_string(),
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;

pub const THREADS_ENV: &str = "STEINMP_THREADS";

/// Worker count from `STEINMP_THREADS`; `None` lets the pool decide.
pub fn thread_limit() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub(crate) struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub streams: Streams,
    dir: PathBuf,
    outputs: Vec<String>,
}

impl RunContext<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str, result: io::Result<()>) -> RunResult<()> {
        result.map_err(|source| RunError::Output {
            path: self.path(name),
            source,
        })?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> RunResult<()> {
        let r = table.write(self.path(name));
        self.record(name, r)
    }

    pub fn write_pgm(&mut self, name: &str, image: &GrayImage) -> RunResult<()> {
        let r = pgm::write_pgm(self.path(name), image);
        self.record(name, r)
    }
}

/// Runs the configured experiment and writes its manifest last.
pub fn run_experiment(config: &ExperimentConfig) -> RunResult<RunManifest> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;

    let hash = input_hash(config).map_err(|e| {
        let path = config.input_files().into_iter().find(|p| !p.exists()).unwrap_or_default();
        RunError::input(&path, e)
    })?;
    fs::create_dir_all(&config.output_dir).map_err(|source| RunError::Output {
        path: config.output_dir.clone(),
        source,
    })?;
    let start = Instant::now();
    let mut ctx = RunContext {
        config,
        streams: Streams::new(config.seed),
        dir: config.output_dir.clone(),
        outputs: Vec::new(),
    };
    pool.install(|| match config.experiment {
        Experiment::GaussianCollapse => collapse::run(&mut ctx),
        Experiment::GridMrf => grid::run(&mut ctx),
        Experiment::BandwidthStudy => bandwidth::run(&mut ctx),
        Experiment::Denoise => denoise::run(&mut ctx),
    })?;
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: config.clone(),
        input_hash: hash,
        inputs: config.input_files(),
        duration_seconds: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs,
    };
    manifest.write(&config.output_dir).map_err(|source| RunError::Output {
        path: config.output_dir.clone(),
        source,
    })?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// shared pieces

pub(crate) struct ParticleRun {
    pub particles: Matrix,
    pub trajectory: Vec<DiagnosticsRecord>,
}

/// Runs a particle method (`svgd`, `mpsvgd-s`, `mpsvgd-m`) from `init`.
pub(crate) fn run_particles(
    config: &ExperimentConfig,
    kernel: KernelSpec,
    graph: &FactorGraph,
    init: &Matrix,
    iterations: usize,
) -> steinmp_core::Result<ParticleRun> {
    let mut trajectory = Vec::with_capacity(iterations);
    let sink = |r: &DiagnosticsRecord| trajectory.push(*r);
    let particles = if kernel.locality == Locality::Global {
        svgd::run(&SvgdConfig::new(iterations, kernel), graph, init, sink)?
    } else {
        let mut cfg = MpSvgdConfig::new(iterations, kernel);
        cfg.sweep = config.sweep.into();
        mpsvgd::run(&cfg, graph, init, sink)?
    };
    Ok(ParticleRun { particles, trajectory })
}

/// `G` and `R` at `particles` as the method itself would compute them.
pub(crate) fn forces_at(kernel: &KernelSpec, graph: &FactorGraph, particles: &Matrix) -> steinmp_core::Result<UpdateDecomposition> {
    if kernel.locality == Locality::Global {
        compute_phi(particles, graph, kernel)
    } else {
        local_decomposition(particles, graph, kernel)
    }
}

/// Diagnostics of a particle set with no move attached.
pub(crate) fn snapshot(kernel: &KernelSpec, graph: &FactorGraph, particles: &Matrix) -> steinmp_core::Result<DiagnosticsRecord> {
    let f = forces_at(kernel, graph, particles)?;
    Ok(DiagnosticsRecord::new(0, &f.smoothed_gradient, &f.repulsive, particles, 0.0))
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, mean: &[f64], std: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, c| mean[c] + std * rng.sample::<f64, _>(StandardNormal))
}

/// HMC chains run in parallel, each on its own named stream
/// (`{prefix}hmc-chain-{i}`), starting from `N(0, init_std²)`.
pub(crate) fn hmc_bank(
    settings: &HmcSettings,
    samples_per_chain: usize,
    graph: &FactorGraph,
    streams: &Streams,
    prefix: &str,
    init_std: f64,
) -> steinmp_core::Result<SampleBank> {
    let chains = (0..settings.chains)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(&format!("{prefix}hmc-chain-{i}"));
            let init = gaussian_matrix(1, graph.dimension(), &vec![0.0; graph.dimension()], init_std, &mut rng);
            let cfg = HmcConfig {
                chains: settings.chains,
                samples_per_chain,
                burn_in: settings.burn_in,
                leapfrog_steps: settings.leapfrog_steps,
                target_accept: settings.target_accept,
                seed: rng.gen(),
            };
            run_chain(&cfg, graph, init.row(0), i)
        })
        .collect::<steinmp_core::Result<Vec<_>>>()?;
    SampleBank::from_chains(&chains)
}

pub(crate) fn method_kernel(config: &ExperimentConfig, method: Method) -> Option<KernelSpec> {
    method.locality().map(|loc| config.kernel_spec(loc))
}

/// Least-squares slope of `ln y` against `ln x`; NaN with fewer than two
/// distinct abscissae.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}
