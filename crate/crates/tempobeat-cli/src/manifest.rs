//! Run manifest: input digests, config snapshot, tool version, per-stage
//! timings, and the emitted artifact list with content digests. The manifest
//! is the one artifact allowed to differ between reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct StageTiming {
    stage: String,
    seconds: f64,
}

#[derive(Serialize)]
pub struct Manifest {
    tool: String,
    version: String,
    subcommand: String,
    generated_at_utc: String,
    threads: usize,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    timings: Vec<StageTiming>,
}

pub struct ManifestBuilder {
    manifest: Manifest,
    stage_started: Instant,
}

fn digest(path: &Path) -> std::io::Result<FileDigest> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let hash = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in hash {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex,
        bytes: bytes.len() as u64,
    })
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, threads: usize) -> Self {
        ManifestBuilder {
            manifest: Manifest {
                tool: "tempobeat".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                subcommand: subcommand.into(),
                generated_at_utc: chrono::Utc::now().to_rfc3339(),
                threads,
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
            },
            stage_started: Instant::now(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) {
        self.manifest.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    }

    pub fn input(&mut self, path: &Path) {
        if let Ok(d) = digest(path) {
            self.manifest.inputs.push(d);
        }
    }

    pub fn output(&mut self, path: &Path) {
        if let Ok(d) = digest(path) {
            self.manifest.outputs.push(d);
        }
    }

    /// Records the time since the previous stage boundary.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.manifest.timings.push(StageTiming {
            stage: name.into(),
            seconds: now.duration_since(self.stage_started).as_secs_f64(),
        });
        self.stage_started = now;
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
