//! Run records: what was run, on which inputs, and what it produced.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::commands::Artifact;
use crate::error::{Error, Result};

pub const RECORD_FILE: &str = "run.json";
const LOCK_FILE: &str = ".lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Digest of command, config and inputs; equal ids mean equal runs.
    pub run_id: String,
    pub command: String,
    /// Everything needed to re-run the command.
    pub config: serde_json::Value,
    /// Input file path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact name → sha256.
    pub outputs: BTreeMap<String, String>,
    pub exit_code: i32,
    /// Milliseconds since the Unix epoch.
    pub started_ms: u64,
    pub finished_ms: u64,
}

impl RunRecord {
    pub fn start(command: &str, config: serde_json::Value, input_paths: &[PathBuf]) -> Result<Self> {
        let mut inputs = BTreeMap::new();
        for p in input_paths {
            let bytes = fs::read(p)?;
            inputs.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(serde_json::to_vec(&config).expect("config serializes"));
        for (k, v) in &inputs {
            h.update(k.as_bytes());
            h.update(v.as_bytes());
        }
        let run_id = hex::encode(&h.finalize()[..8]);
        Ok(RunRecord {
            run_id,
            command: command.to_string(),
            config,
            inputs,
            outputs: BTreeMap::new(),
            exit_code: 0,
            started_ms: unix_millis(),
            finished_ms: 0,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Writes `artifacts` and the record into `dir` under an exclusive lock.
    pub fn persist(&mut self, dir: &Path, artifacts: &[Artifact], exit_code: i32) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let _lock = DirLock::acquire(dir)?;
        self.outputs.clear();
        for a in artifacts {
            if a.name == RECORD_FILE || a.name == LOCK_FILE || a.name.contains(['/', '\\']) {
                return Err(Error::InvalidInput(format!("bad artifact name {:?}", a.name)));
            }
            fs::write(dir.join(&a.name), a.contents.as_bytes())?;
            self.outputs.insert(a.name.clone(), sha256_hex(a.contents.as_bytes()));
        }
        self.exit_code = exit_code;
        self.finished_ms = unix_millis();
        let path = dir.join(RECORD_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("record serializes");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Inputs whose current content differs from the recorded digest.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(p, d)| fs::read(p).map(|b| &sha256_hex(&b) != *d).unwrap_or(true))
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Outputs of `other` that differ from this record's, by name.
    pub fn output_mismatches(&self, other: &RunRecord) -> Vec<String> {
        let mut names: Vec<&String> = self.outputs.keys().chain(other.outputs.keys()).collect();
        names.sort();
        names.dedup();
        names
            .into_iter()
            .filter(|n| self.outputs.get(*n) != other.outputs.get(*n))
            .cloned()
            .collect()
    }
}

/// Advisory lock on a run directory, released on drop.
pub struct DirLock {
    path: PathBuf,
    _file: File,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path, _file: f })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::InvalidInput(format!(
                "run directory {} is locked by another writer (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
