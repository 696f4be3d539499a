use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use riskcast_core::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one command run. Timings live here and nowhere else, so every
/// other output file is a pure function of config and seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub fleet_digest: String,
    pub timings_ms: BTreeMap<String, f64>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("manifest_{command}.json")
    }
}

/// Collects the files a command writes under its output directory.
pub(crate) struct OutputDir {
    root: PathBuf,
    written: Vec<OutputEntry>,
    timings: BTreeMap<String, f64>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Data(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new(), timings: BTreeMap::new() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Prepare the parent directory of `rel` and return the full path. The
    /// caller writes the file and then calls [`OutputDir::record`].
    pub fn prepare(&self, rel: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
        Ok(path)
    }

    pub fn record(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.path(rel);
        let bytes =
            std::fs::read(&path).map_err(|e| CliError::Data(format!("cannot read back {}: {e}", path.display())))?;
        self.written.push(OutputEntry { path: rel.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(())
    }

    pub fn write(&mut self, rel: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.prepare(rel)?;
        std::fs::write(&path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        self.record(rel)
    }

    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(label.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn finish(self, command: &str, config: &RunConfig, fleet_digest: &str) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            seed: config.seed,
            fleet_digest: fleet_digest.to_string(),
            timings_ms: self.timings,
            outputs: self.written,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.root.join(RunManifest::file_name(command));
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

/// Serialize rows to CSV in memory.
pub(crate) fn csv_bytes<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
