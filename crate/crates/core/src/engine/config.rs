use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::hex16;

/// How the bootstrapped successor value `T(s')` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdTargetMode {
    /// `f(s', a')` with one `a' ~ pi(s')` per transition.
    Sampled,
    /// `sum_a' pi(a'|s') f(s', a')`.
    Exact,
}

/// Which critic supplies the successor value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoubleQMode {
    /// Each critic bootstraps from itself.
    PerCritic,
    /// Both critics bootstrap from `min(f1, f2)`.
    MinTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaacConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta_critic: f64,
    pub eta_actor: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub td_target_mode: TdTargetMode,
    pub double_q_mode: DoubleQMode,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Learning rate of the supervised next-item baseline.
    pub eta_baseline: f64,
    /// Any unweighted loss component above this aborts training.
    pub divergence_threshold: f64,
}

impl Default for LaacConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.99,
            eta_critic: 0.01,
            eta_actor: 0.001,
            batch_size: 128,
            steps: 10_000,
            seed: 0,
            td_target_mode: TdTargetMode::Sampled,
            double_q_mode: DoubleQMode::PerCritic,
            embed_dim: 64,
            hidden_dim: 64,
            eta_baseline: 0.005,
            divergence_threshold: 1e6,
        }
    }
}

impl LaacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return bad(format!("alpha and beta must be nonnegative (got {}, {})", self.alpha, self.beta));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} must be in [0, 1]", self.gamma));
        }
        for (name, v) in [
            ("eta_critic", self.eta_critic),
            ("eta_actor", self.eta_actor),
            ("eta_baseline", self.eta_baseline),
            ("divergence_threshold", self.divergence_threshold),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.batch_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("batch_size, embed_dim and hidden_dim must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LaacConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Fingerprint of the canonical serialisation.
    pub fn hash(&self) -> String {
        hex16(&Sha256::digest(self.to_toml().as_bytes()))
    }
}
