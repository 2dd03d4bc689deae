//! Run manifests: enough to re-run a command and check its inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::mutation::MutantEnsemble;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }

    pub fn verify(&self) -> Result<()> {
        let actual = sha256_file(&self.path)?;
        if actual != self.sha256 {
            return Err(Error::DigestMismatch {
                path: self.path.display().to_string(),
                expected: self.sha256.clone(),
                actual,
            });
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    /// Echo of every setting the command used, including seeds.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn verify_inputs(&self) -> Result<()> {
        self.inputs.iter().try_for_each(FileDigest::verify)
    }

    pub fn verify(&self) -> Result<()> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .try_for_each(FileDigest::verify)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    /// Read without checking digests.
    pub fn read_unverified(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Read and check every input digest against the files on disk.
    pub fn load(path: &Path) -> Result<Self> {
        let m = Self::read_unverified(path)?;
        m.verify_inputs()?;
        Ok(m)
    }
}

/// Per-mutant provenance written next to a mutant prediction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub base_accuracy: f64,
    pub accuracy_threshold: f64,
    pub mutants: Vec<EnsembleEntry>,
    pub rejected: Vec<EnsembleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub attempt: usize,
    pub operator: String,
    pub seed: u64,
    pub gate_accuracy: f64,
    pub touched: usize,
}

impl EnsembleManifest {
    pub fn from_ensemble(e: &MutantEnsemble) -> Self {
        let mut accepted = e.provenance.iter();
        let mut mutants = Vec::new();
        let mut rejected = Vec::new();
        for g in &e.gate_report {
            let touched = if g.accepted {
                accepted.next().map_or(0, |r| r.touched.len())
            } else {
                0
            };
            let entry = EnsembleEntry {
                attempt: g.attempt,
                operator: g.operator.to_string(),
                seed: g.seed,
                gate_accuracy: g.accuracy,
                touched,
            };
            if g.accepted {
                mutants.push(entry);
            } else {
                rejected.push(entry);
            }
        }
        Self {
            base_accuracy: e.base_accuracy,
            accuracy_threshold: e.accuracy_threshold,
            mutants,
            rejected,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }
}
