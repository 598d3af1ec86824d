use std::path::Path;

use anyhow::Context;
use laac_core::data::SyntheticConfig;
use laac_core::engine::LaacConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

/// A run configuration file: optimiser settings under `[train]` and the
/// synthetic generator under `[synthetic]`. Both sections are optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: LaacConfig,
    pub synthetic: SyntheticConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| UsageError(format!("config: {}", e.message())))?;
        cfg.train.validate()?;
        cfg.synthetic.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Reads `path` if given, otherwise defaults.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::read(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml().as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
