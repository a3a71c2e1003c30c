//! Run manifests.
//!
//! Every batch command writes `manifest.toml` into its output directory
//! *before* any numeric output, listing the files it is about to produce
//! and the resolved numeric parameters; the manifest is rewritten with
//! wall-clock stage timings once the run completes. No output file exists
//! without a manifest referencing it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub out_dir: String,
    /// Content hash of the parsed config; stable across re-parses of an
    /// identical config regardless of file formatting.
    pub spec_hash: String,
    pub grid_step: f64,
    pub picard_tol: f64,
    pub outer_tol: f64,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Files this run produces, relative to `out_dir`.
    pub outputs: Vec<String>,
    pub status: String,
    #[serde(default)]
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.toml";

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(Self::FILE_NAME);
        let body =
            toml::to_string_pretty(self).map_err(|e| crate::error::Error::Config(e.to_string()))?;
        std::fs::write(&path, body)?;
        Ok(path)
    }

    pub fn read(out_dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(out_dir.join(Self::FILE_NAME))?;
        toml::from_str(&text).map_err(|e| crate::error::Error::Config(e.to_string()))
    }
}

/// Stage stopwatch feeding manifest timings.
pub struct StageClock {
    started: Instant,
    timings: Vec<StageTiming>,
}

impl StageClock {
    pub fn start() -> Self {
        StageClock {
            started: Instant::now(),
            timings: Vec::new(),
        }
    }

    /// Close the current stage under `name` and start the next one.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: name.to_string(),
            millis: now.duration_since(self.started).as_secs_f64() * 1e3,
        });
        self.started = now;
    }

    pub fn into_timings(self) -> Vec<StageTiming> {
        self.timings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest {
            command: "solve".into(),
            config_path: "demo.toml".into(),
            out_dir: dir.path().display().to_string(),
            spec_hash: "abc123".into(),
            grid_step: 2e-3,
            picard_tol: 1e-10,
            outer_tol: 1e-8,
            eps: vec![0.1, 0.01],
            outputs: vec!["trajectory.csv".into()],
            status: "running".into(),
            timings: vec![],
        };
        manifest.write(dir.path()).unwrap();
        let read = RunManifest::read(dir.path()).unwrap();
        assert_eq!(read, manifest);
    }
}
