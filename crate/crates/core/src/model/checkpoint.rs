use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::network::{CriticPair, PolicyNetwork};

pub const CHECKPOINT_FORMAT: &str = "laac-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Laac,
    Baseline,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Laac => "laac",
            Variant::Baseline => "baseline",
        })
    }
}

/// Every trained tensor plus the catalog fingerprint it was trained on.
///
/// Stored as JSON; floats are written in shortest round-trip form and read
/// back exactly, so a save/load cycle is bitwise lossless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub variant: Variant,
    pub catalog_hash: String,
    pub actor: PolicyNetwork,
    pub critics: Option<CriticPair>,
}

impl Checkpoint {
    pub fn new(variant: Variant, catalog_hash: String, actor: PolicyNetwork, critics: Option<CriticPair>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            variant,
            catalog_hash,
            actor,
            critics,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("unsupported checkpoint {} v{}", ck.format, ck.version),
            });
        }
        Ok(ck)
    }

    /// Refuses a checkpoint trained on a different catalog.
    pub fn check_catalog(&self, catalog_hash: &str) -> Result<()> {
        if self.catalog_hash != catalog_hash {
            return Err(Error::CatalogMismatch {
                expected: self.catalog_hash.clone(),
                found: catalog_hash.to_string(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Parameterized, SeededRng};
    use crate::model::network::NetworkDims;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = SeededRng::new(11);
        let dims = NetworkDims::new(7, 3, 4);
        let actor = PolicyNetwork::new(dims, &mut rng);
        let critics = CriticPair::new(dims, &mut rng);
        let ck = Checkpoint::new(Variant::Laac, "abc".into(), actor, Some(critics));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ck.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        for (a, b) in ck.actor.params().iter().zip(back.actor.params()) {
            let x: Vec<u64> = a.value.data().iter().map(|v| v.to_bits()).collect();
            let y: Vec<u64> = b.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(x, y, "{}", a.name);
        }
        assert_eq!(ck, back);
        assert!(back.check_catalog("abc").is_ok());
        assert!(matches!(back.check_catalog("xyz"), Err(Error::CatalogMismatch { .. })));
    }
}
