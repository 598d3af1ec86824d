use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub dataset_hash: Option<String>,
    pub cache_template_hash: Option<String>,
    pub seed: Option<u64>,
    pub artifacts: Vec<PathBuf>,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: None,
                dataset_hash: None,
                cache_template_hash: None,
                seed: None,
                artifacts: Vec::new(),
                wall_clock_secs: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn config_hash(&mut self, h: String) -> &mut Self {
        self.manifest.config_hash = Some(h);
        self
    }

    pub fn dataset_hash(&mut self, h: String) -> &mut Self {
        self.manifest.dataset_hash = Some(h);
        self
    }

    pub fn template_hash(&mut self, h: Option<String>) -> &mut Self {
        self.manifest.cache_template_hash = h;
        self
    }

    pub fn seed(&mut self, s: u64) -> &mut Self {
        self.manifest.seed = Some(s);
        self
    }

    pub fn artifact(&mut self, p: impl Into<PathBuf>) -> &mut Self {
        self.manifest.artifacts.push(p.into());
        self
    }

    /// Writes `manifest_{stem}.json` into `dir` and returns the manifest.
    pub fn finish(mut self, dir: &Path, stem: &str) -> anyhow::Result<RunManifest> {
        self.manifest.wall_clock_secs = self.started.elapsed().as_secs_f64();
        let path = dir.join(format!("manifest_{stem}.json"));
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}
