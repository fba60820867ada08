//! File formats, configuration and experiment drivers around
//! [`steinmp_core`]. The `stein-mp` binary is a thin CLI over
//! [`experiments::run_experiment`].

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod params;
pub mod pgm;
pub mod streams;
pub mod table;

pub use config::{ConfigError, ConfigFile, Experiment, ExperimentConfig, Method, Overrides};
pub use experiments::{run_experiment, RunError};
pub use manifest::RunManifest;
