//! Run manifests. The manifest is written last and atomically, so a
//! directory whose manifest exists holds a complete, valid set of outputs.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: ExperimentConfig,
    /// SHA-256 over the resolved config (minus its output directory) and
    /// the bytes of every input file.
    pub input_hash: String,
    pub inputs: Vec<PathBuf>,
    pub duration_seconds: f64,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn input_hash(config: &ExperimentConfig) -> io::Result<String> {
    let mut echo = config.clone();
    echo.output_dir = PathBuf::new();
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&echo).expect("config serializes"));
    for path in config.input_files() {
        let bytes = fs::read(&path)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let tmp = dir.join(format!(".{MANIFEST_NAME}.tmp"));
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn hash_ignores_output_dir_but_not_settings() {
        let mut a = ExperimentConfig::defaults(Experiment::GridMrf);
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(input_hash(&a).unwrap(), input_hash(&b).unwrap());
        a.seed = 1;
        assert_ne!(input_hash(&a).unwrap(), input_hash(&b).unwrap());
        assert_eq!(input_hash(&b).unwrap().len(), 64);
    }

    #[test]
    fn write_is_atomic_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            code_version: "0".into(),
            config: ExperimentConfig::defaults(Experiment::Denoise),
            input_hash: "abc".into(),
            inputs: vec![],
            duration_seconds: 1.5,
            outputs: vec!["a.csv".into()],
        };
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from(MANIFEST_NAME)]);
    }
}
