//! GSM Fields-of-Experts parameter files.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use steinmp_core::models::GsmPrior;
use thiserror::Error;

/// The bundled prior. It is hand-constructed, not learned; see the `note`
/// field in the file.
pub const DEFAULT_GSM_JSON: &str = include_str!("../data/gsm_default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsmParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub filters: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub scales: Vec<f64>,
    pub epsilon: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid parameters: {0}")]
    Invalid(#[from] steinmp_core::Error),
    #[error("noise_sigma must be positive, got {0}")]
    NoiseSigma(f64),
}

impl GsmParams {
    pub fn bundled() -> Self {
        Self::from_json(DEFAULT_GSM_JSON).expect("bundled GSM parameters are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ParamsError> {
        let params: Self = serde_json::from_str(text)?;
        params.prior().validate()?;
        if !(params.noise_sigma > 0.0) {
            return Err(ParamsError::NoiseSigma(params.noise_sigma));
        }
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParamsError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn prior(&self) -> GsmPrior {
        GsmPrior {
            filters: self.filters.clone(),
            weights: self.weights.clone(),
            sigma2: self.sigma2.clone(),
            scales: self.scales.clone(),
            epsilon: self.epsilon,
        }
    }
}
