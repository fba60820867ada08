//! Experiment configuration: the JSON file format, per-experiment defaults
//! and validation.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use steinmp_core::mpsvgd::SweepOrder;
use steinmp_core::{BandwidthPolicy, KernelFamily, KernelSpec, Locality};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("config is not valid JSON for this schema: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config names experiment {found} but {requested} was requested")]
    ExperimentMismatch { requested: Experiment, found: Experiment },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GaussianCollapse,
    GridMrf,
    BandwidthStudy,
    Denoise,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GaussianCollapse => "gaussian-collapse",
            Experiment::GridMrf => "grid-mrf",
            Experiment::BandwidthStudy => "bandwidth-study",
            Experiment::Denoise => "denoise",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "svgd")]
    Svgd,
    #[serde(rename = "mpsvgd-s")]
    MpSvgdSingle,
    #[serde(rename = "mpsvgd-m")]
    MpSvgdMulti,
    #[serde(rename = "hmc")]
    Hmc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Svgd, Method::MpSvgdSingle, Method::MpSvgdMulti, Method::Hmc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svgd => "svgd",
            Method::MpSvgdSingle => "mpsvgd-s",
            Method::MpSvgdMulti => "mpsvgd-m",
            Method::Hmc => "hmc",
        }
    }

    /// Kernel locality for particle methods; `None` for HMC.
    pub fn locality(self) -> Option<Locality> {
        match self {
            Method::Svgd => Some(Locality::Global),
            Method::MpSvgdSingle => Some(Locality::SingleKernel),
            Method::MpSvgdMulti => Some(Locality::MultiKernel),
            Method::Hmc => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected svgd, mpsvgd-s, mpsvgd-m or hmc)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Rbf,
    Imq,
}

impl From<Family> for KernelFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Rbf => KernelFamily::Rbf,
            Family::Imq => KernelFamily::Imq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    #[default]
    Sequential,
    Jacobi,
}

impl From<Sweep> for SweepOrder {
    fn from(s: Sweep) -> Self {
        match s {
            Sweep::Sequential => SweepOrder::Sequential,
            Sweep::Jacobi => SweepOrder::Jacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollapseConfig {
    pub dimensions: Vec<usize>,
    pub particle_counts: Vec<usize>,
    pub init_std: f64,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            dimensions: vec![1, 2, 5, 10, 20, 50, 100],
            particle_counts: vec![50, 100, 200],
            init_std: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSettings {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub burn_in: usize,
    pub leapfrog_steps: usize,
    pub target_accept: f64,
}

impl Default for HmcSettings {
    fn default() -> Self {
        Self {
            chains: 4,
            samples_per_chain: 10_000,
            burn_in: 1000,
            leapfrog_steps: 10,
            target_accept: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub init_std: f64,
    /// Ground-truth sample CSV; generated with HMC when absent.
    pub truth_file: Option<PathBuf>,
    pub hmc: HmcSettings,
    pub test_function_draws: usize,
    /// Square grid sizes for the PAMRF sweep; empty disables it.
    pub pamrf_sweep: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            init_std: 1.0,
            truth_file: None,
            hmc: HmcSettings::default(),
            test_function_draws: 10,
            pamrf_sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthConfig {
    pub exponents: Vec<f64>,
    pub dimensions: Vec<usize>,
    pub init_std: f64,
    /// A run counts as converged when `var_avg` moved by less than this
    /// relative amount over its last tenth.
    pub convergence_tol: f64,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            exponents: vec![0.75, 1.0, 1.25, 1.5],
            dimensions: vec![1, 2, 5, 10, 20, 50, 100],
            init_std: 5.0,
            convergence_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    /// Clean reference PGM; a synthetic image is generated when absent.
    pub clean: Option<PathBuf>,
    /// Pre-noised PGM; bypasses noise addition.
    pub noisy: Option<PathBuf>,
    /// GSM parameter JSON; the bundled prior when absent.
    pub prior: Option<PathBuf>,
    /// Overrides the parameter file's `noise_sigma`.
    pub noise_sigma: Option<f64>,
    pub synthetic_size: usize,
    /// Particles start at the noisy image plus `N(0, init_std²)` jitter.
    pub init_std: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            clean: None,
            noisy: None,
            prior: None,
            noise_sigma: None,
            synthetic_size: 64,
            init_std: 1.0,
        }
    }
}

/// The on-disk format. Unset top-level fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub methods: Option<Vec<Method>>,
    pub particles: Option<usize>,
    pub iterations: Option<usize>,
    pub kernel: Option<Family>,
    pub bandwidth_exponent: Option<f64>,
    pub sweep: Option<Sweep>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub gaussian_collapse: CollapseConfig,
    pub grid_mrf: GridConfig,
    pub bandwidth_study: BandwidthConfig,
    pub denoise: DenoiseConfig,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Fully resolved configuration; this is what the run manifest echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub methods: Vec<Method>,
    pub particles: usize,
    pub iterations: usize,
    pub kernel: Family,
    pub bandwidth_exponent: f64,
    pub sweep: Sweep,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub gaussian_collapse: CollapseConfig,
    pub grid_mrf: GridConfig,
    pub bandwidth_study: BandwidthConfig,
    pub denoise: DenoiseConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub grid: Option<(usize, usize)>,
    pub particles: Option<usize>,
    pub iterations: Option<usize>,
}

fn default_methods(e: Experiment) -> Vec<Method> {
    match e {
        Experiment::GaussianCollapse | Experiment::BandwidthStudy => vec![Method::Svgd],
        Experiment::GridMrf => Method::ALL.to_vec(),
        Experiment::Denoise => vec![Method::MpSvgdMulti],
    }
}

fn default_particles(e: Experiment) -> usize {
    match e {
        Experiment::GaussianCollapse | Experiment::GridMrf | Experiment::Denoise => 50,
        Experiment::BandwidthStudy => 100,
    }
}

fn default_iterations(e: Experiment) -> usize {
    match e {
        Experiment::GaussianCollapse | Experiment::GridMrf => 2000,
        Experiment::BandwidthStudy => 10_000,
        Experiment::Denoise => 50,
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        Self::resolve(experiment, ConfigFile::default(), &Overrides::default()).expect("defaults are valid")
    }

    pub fn resolve(experiment: Experiment, file: ConfigFile, cli: &Overrides) -> Result<Self, ConfigError> {
        if let Some(found) = file.experiment {
            if found != experiment {
                return Err(ConfigError::ExperimentMismatch {
                    requested: experiment,
                    found,
                });
            }
        }
        let explicit_particles = cli.particles.or(file.particles);
        let mut cfg = Self {
            experiment,
            methods: cli
                .methods
                .clone()
                .or(file.methods)
                .unwrap_or_else(|| default_methods(experiment)),
            particles: explicit_particles.unwrap_or_else(|| default_particles(experiment)),
            iterations: cli
                .iterations
                .or(file.iterations)
                .unwrap_or_else(|| default_iterations(experiment)),
            kernel: file.kernel.unwrap_or_default(),
            bandwidth_exponent: file.bandwidth_exponent.unwrap_or(1.0),
            sweep: file.sweep.unwrap_or_default(),
            seed: cli.seed.or(file.seed).unwrap_or(0),
            output_dir: cli
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
            gaussian_collapse: file.gaussian_collapse,
            grid_mrf: file.grid_mrf,
            bandwidth_study: file.bandwidth_study,
            denoise: file.denoise,
        };
        if experiment == Experiment::GaussianCollapse {
            if let Some(m) = explicit_particles {
                cfg.gaussian_collapse.particle_counts = vec![m];
            }
        }
        if let Some((rows, cols)) = cli.grid {
            cfg.grid_mrf.rows = rows;
            cfg.grid_mrf.cols = cols;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(invalid(format!("method {m} listed twice")));
            }
        }
        let hmc = self.methods.contains(&Method::Hmc);
        match self.experiment {
            Experiment::BandwidthStudy | Experiment::GaussianCollapse | Experiment::Denoise if hmc => {
                return Err(invalid(format!("method hmc is not valid for {}", self.experiment)));
            }
            Experiment::Denoise if self.methods.len() != 1 => {
                return Err(invalid("denoise runs exactly one method"));
            }
            _ => {}
        }
        if self.particles == 0 {
            return Err(invalid("particles must be at least 1"));
        }
        if !(self.bandwidth_exponent.is_finite() && self.bandwidth_exponent > 0.0) {
            return Err(invalid("bandwidth_exponent must be positive"));
        }
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive")))
            }
        };
        let nonempty = |v: &[usize], what: &str| {
            if v.is_empty() || v.contains(&0) {
                Err(invalid(format!("{what} must be a non-empty list of positive integers")))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            Experiment::GaussianCollapse => {
                let c = &self.gaussian_collapse;
                nonempty(&c.dimensions, "gaussian_collapse.dimensions")?;
                nonempty(&c.particle_counts, "gaussian_collapse.particle_counts")?;
                positive(c.init_std, "gaussian_collapse.init_std")?;
            }
            Experiment::GridMrf => {
                let g = &self.grid_mrf;
                if g.rows == 0 || g.cols == 0 {
                    return Err(invalid("grid dimensions must be positive"));
                }
                positive(g.init_std, "grid_mrf.init_std")?;
                if g.test_function_draws == 0 {
                    return Err(invalid("grid_mrf.test_function_draws must be positive"));
                }
                if g.pamrf_sweep.contains(&0) {
                    return Err(invalid("grid_mrf.pamrf_sweep sizes must be positive"));
                }
                let h = &g.hmc;
                if h.chains == 0 || h.samples_per_chain == 0 || h.leapfrog_steps == 0 {
                    return Err(invalid("hmc chains, samples_per_chain and leapfrog_steps must be positive"));
                }
                if !(h.target_accept > 0.0 && h.target_accept < 1.0) {
                    return Err(invalid("hmc.target_accept must lie in (0, 1)"));
                }
            }
            Experiment::BandwidthStudy => {
                let b = &self.bandwidth_study;
                if b.exponents.is_empty() || b.exponents.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(invalid("bandwidth_study.exponents must be positive"));
                }
                nonempty(&b.dimensions, "bandwidth_study.dimensions")?;
                positive(b.init_std, "bandwidth_study.init_std")?;
                positive(b.convergence_tol, "bandwidth_study.convergence_tol")?;
            }
            Experiment::Denoise => {
                let d = &self.denoise;
                if let Some(s) = d.noise_sigma {
                    positive(s, "denoise.noise_sigma")?;
                }
                positive(d.init_std, "denoise.init_std")?;
                if d.clean.is_none() && d.noisy.is_none() && d.synthetic_size < 11 {
                    return Err(invalid("denoise.synthetic_size must be at least 11"));
                }
            }
        }
        Ok(())
    }

    pub fn kernel_spec(&self, locality: Locality) -> KernelSpec {
        self.kernel_spec_with(locality, self.bandwidth_exponent)
    }

    pub fn kernel_spec_with(&self, locality: Locality, exponent: f64) -> KernelSpec {
        KernelSpec::new(
            self.kernel.into(),
            BandwidthPolicy::MedianHeuristic { exponent },
            locality,
        )
    }

    /// Paths of input files the run reads.
    pub fn input_files(&self) -> Vec<PathBuf> {
        match self.experiment {
            Experiment::GridMrf => self.grid_mrf.truth_file.iter().cloned().collect(),
            Experiment::Denoise => [&self.denoise.clean, &self.denoise.noisy, &self.denoise.prior]
                .into_iter()
                .flatten()
                .cloned()
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Parses `RxC`, e.g. `10x10`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("expected RxC, got {s:?}"));
    Ok((parse(r)?, parse(c)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_experiment_defaults() {
        let g = ExperimentConfig::defaults(Experiment::GridMrf);
        assert_eq!((g.grid_mrf.rows, g.grid_mrf.cols, g.particles), (3, 3, 50));
        assert_eq!(g.methods.len(), 4);
        let b = ExperimentConfig::defaults(Experiment::BandwidthStudy);
        assert_eq!((b.particles, b.iterations), (100, 10_000));
        assert_eq!(b.bandwidth_study.exponents, vec![0.75, 1.0, 1.25, 1.5]);
        let c = ExperimentConfig::defaults(Experiment::GaussianCollapse);
        assert_eq!(c.gaussian_collapse.particle_counts, vec![50, 100, 200]);
        assert_eq!(ExperimentConfig::defaults(Experiment::Denoise).methods, vec![Method::MpSvgdMulti]);
    }

    #[test]
    fn overrides_take_precedence() {
        let file = ConfigFile::from_json(r#"{"seed": 3, "particles": 20, "methods": ["svgd"]}"#).unwrap();
        let cli = Overrides {
            seed: Some(9),
            grid: Some((10, 10)),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Experiment::GridMrf, file, &cli).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.particles, 20);
        assert_eq!(cfg.methods, vec![Method::Svgd]);
        assert_eq!((cfg.grid_mrf.rows, cfg.grid_mrf.cols), (10, 10));

        let file = ConfigFile::from_json(r#"{"particles": 7}"#).unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::GaussianCollapse, file, &Overrides::default()).unwrap();
        assert_eq!(cfg.gaussian_collapse.particle_counts, vec![7]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let resolve = |e, json: &str| ExperimentConfig::resolve(e, ConfigFile::from_json(json)?, &Overrides::default());
        assert!(matches!(
            resolve(Experiment::BandwidthStudy, r#"{"methods": ["hmc"]}"#),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(resolve(Experiment::GridMrf, r#"{"particles": 0}"#), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            resolve(Experiment::GridMrf, r#"{"experiment": "denoise"}"#),
            Err(ConfigError::ExperimentMismatch { .. })
        ));
        assert!(matches!(resolve(Experiment::GridMrf, r#"{"bogus": 1}"#), Err(ConfigError::Json(_))));
        assert!(matches!(
            resolve(Experiment::Denoise, r#"{"methods": ["svgd", "mpsvgd-m"]}"#),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(resolve(Experiment::GridMrf, r#"{"methods": ["nope"]}"#), Err(ConfigError::Json(_))));
    }

    #[test]
    fn grid_and_method_parsing() {
        assert_eq!(parse_grid("10x12"), Ok((10, 12)));
        assert!(parse_grid("10").is_err());
        assert_eq!("mpsvgd-m".parse::<Method>(), Ok(Method::MpSvgdMulti));
        assert!("foo".parse::<Method>().is_err());
    }
}
