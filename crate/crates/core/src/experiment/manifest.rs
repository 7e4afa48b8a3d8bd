use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::file_hash;
use crate::models::ModelKind;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock timings live beside the manifest so that the manifest itself
/// stays identical between reruns.
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub kind: ModelKind,
    pub artifact: String,
    /// Trace the final hyperparameters came from, if tuned.
    pub tuning: Option<String>,
    pub refit_on_full_train: bool,
    /// Content hash of the training set.
    pub dataset_hash: String,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Content hash per dataset name.
    pub datasets: BTreeMap<String, String>,
    pub models: BTreeMap<String, ModelEntry>,
    /// Every artifact written by the run, keyed by path relative to the run directory.
    pub files: BTreeMap<String, FileEntry>,
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64) -> Manifest {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            datasets: BTreeMap::new(),
            models: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn add_file(&mut self, root: &Path, rel: &str) -> Result<()> {
        let path = root.join(rel);
        let bytes = std::fs::metadata(&path)
            .map_err(|e| crate::error::Error::io(&path, e))?
            .len();
        self.files.insert(
            rel.to_string(),
            FileEntry {
                sha256: file_hash(&path)?,
                bytes,
            },
        );
        Ok(())
    }

    /// Paths whose current content differs from the recorded hash (or that are gone).
    pub fn stale_files(&self, root: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for (rel, entry) in &self.files {
            let path = root.join(rel);
            if !path.exists() || file_hash(&path)? != entry.sha256 {
                stale.push(rel.clone());
            }
        }
        Ok(stale)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Seconds per stage of the most recent invocation.
    pub stages: BTreeMap<String, f64>,
}
