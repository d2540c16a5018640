//! Run manifest written next to every artifact a command produces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::{write_json, CliResult};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub args: BTreeMap<String, String>,
    pub config: Option<BTreeMap<String, String>>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub duration_ms: u128,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(started: Instant) -> Self {
        RunManifest {
            command: String::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            args: BTreeMap::new(),
            config: None,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_ms: 0,
            started: Some(started),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn arg(&mut self, key: &str, value: impl Into<String>) {
        self.args.insert(key.to_string(), value.into());
    }

    pub fn seed(&mut self, key: &str, seed: u64) {
        self.seeds.insert(key.to_string(), seed);
    }

    /// Stamps the duration and writes the manifest to `path`.
    pub fn finish(&mut self, path: PathBuf) -> CliResult {
        if let Some(started) = self.started {
            self.duration_ms = started.elapsed().as_millis();
        }
        self.outputs.push(path.clone());
        write_json(&path, self)
    }
}
