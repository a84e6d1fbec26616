//! Run manifests: settings snapshot, content hashes and timing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub sha256: String,
    pub bytes: u64,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(Self {
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub versions: BTreeMap<String, String>,
    pub settings: serde_json::Value,
    /// Keyed by absolute path.
    pub inputs: BTreeMap<String, FileHash>,
    /// Keyed by file name inside the output directory.
    pub outputs: BTreeMap<String, FileHash>,
    pub wall_seconds: f64,
}

/// Collects the files a command reads and writes.
pub struct Recorder {
    command: String,
    out: PathBuf,
    inputs: BTreeMap<String, FileHash>,
    outputs: Vec<String>,
    start: std::time::Instant,
}

impl Recorder {
    pub fn new(command: &str, out: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
        Ok(Self {
            command: command.to_string(),
            out: out.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            start: std::time::Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let abs = std::fs::canonicalize(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        self.inputs.insert(abs.display().to_string(), FileHash::of(&abs)?);
        Ok(())
    }

    /// Path for an output file, registered for hashing.
    pub fn output(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|n| n == name) {
            self.outputs.push(name.to_string());
        }
        self.out.join(name)
    }

    pub fn finish<S: Serialize>(self, settings: &S) -> Result<Manifest, CliError> {
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            let p = self.out.join(name);
            if p.exists() {
                outputs.insert(name.clone(), FileHash::of(&p)?);
            }
        }
        let versions = BTreeMap::from([
            ("issuepoint".to_string(), issuepoint::VERSION.to_string()),
            ("issuepoint-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        let m = Manifest {
            command: self.command,
            versions,
            settings: serde_json::to_value(settings).map_err(|e| CliError::data(e.to_string()))?,
            inputs: self.inputs,
            outputs,
            wall_seconds: self.start.elapsed().as_secs_f64(),
        };
        let path = self.out.join(FILE_NAME);
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(m)
    }
}

/// Re-hashes every recorded file; returns the paths that differ or are
/// missing.
pub fn verify(manifest_path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| CliError::data(format!("{}: {e}", manifest_path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", manifest_path.display())))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut bad = Vec::new();
    let files = m
        .inputs
        .iter()
        .map(|(p, h)| (PathBuf::from(p), h))
        .chain(m.outputs.iter().map(|(n, h)| (dir.join(n), h)));
    for (path, want) in files {
        match FileHash::of(&path) {
            Ok(got) if &got == want => {}
            _ => bad.push(path.display().to_string()),
        }
    }
    Ok(bad)
}
