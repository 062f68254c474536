use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Record of one invocation: enough to re-run it and find what it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    /// Seed of any randomised sweep; none of the current commands draw
    /// random numbers.
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// Collects output files for one command and writes them with a manifest.
pub struct Run {
    command: String,
    parameters: Value,
    out_dir: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &str, parameters: Value, out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            command: command.to_string(),
            parameters,
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `contents` to `name` inside the output directory. Names may
    /// include subdirectories.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, exit_code: i32) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.clone(),
            parameters: self.parameters,
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
            exit_code,
        };
        let path = self.out_dir.join(format!("{}.manifest.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
