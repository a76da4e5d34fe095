//! Run manifest: config echo, seed, completion flag and SHA-256 digests of
//! every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiment::Experiment;
use crate::report::{artifacts, to_json, write_file, MANIFEST_JSON};
use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub failure: Option<String>,
    pub scenario: String,
    pub seed: u64,
    pub iterations: usize,
    pub config: ExperimentConfig,
    /// File name to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes all artifacts and then the manifest into `dir`.
pub fn write_run(exp: &Experiment, dir: &Path) -> Result<Manifest, RunError> {
    fs::create_dir_all(dir).map_err(RunError::io(format!("cannot create {}", dir.display())))?;
    let mut digests = BTreeMap::new();
    for (name, bytes) in artifacts(exp) {
        write_file(&dir.join(&name), &bytes)?;
        digests.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        complete: exp.complete(),
        failure: exp.failure.as_ref().map(|e| e.to_string()),
        scenario: exp.scenario.name.clone(),
        seed: exp.config.seed,
        iterations: exp.config.iterations,
        config: exp.config.clone(),
        artifacts: digests,
    };
    write_file(&dir.join(MANIFEST_JSON), &to_json(&manifest))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, RunError> {
    let path = dir.join(MANIFEST_JSON);
    let text = fs::read(&path).map_err(RunError::io(format!("cannot read {}", path.display())))?;
    serde_json::from_slice(&text).map_err(|e| RunError::Artifact { path: path.display().to_string(), message: e.to_string() })
}
