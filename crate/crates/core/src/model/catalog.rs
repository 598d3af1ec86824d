use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Length of the history window fed to the state encoder.
pub const WINDOW: usize = 5;

/// Item ids of the most recent interactions, oldest first. Id 0 pads.
pub type Window = [u32; WINDOW];

/// Reserved padding id.
pub const PAD: u32 = 0;

/// Canonical text form of a window, e.g. `"0,0,3,9,12"`.
pub fn state_key(window: &Window) -> String {
    let parts: Vec<String> = window.iter().map(u32::to_string).collect();
    parts.join(",")
}

pub fn parse_state_key(key: &str) -> Result<Window> {
    let ids: Vec<u32> = key
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad state key `{key}`: {e}")))?;
    ids.try_into()
        .map_err(|_| Error::InvalidArgument(format!("state key `{key}` must have {WINDOW} ids")))
}

/// Shifts `window` left by one and appends `item`.
pub fn shift_append(window: &Window, item: u32) -> Window {
    let mut next = [PAD; WINDOW];
    next[..WINDOW - 1].copy_from_slice(&window[1..]);
    next[WINDOW - 1] = item;
    next
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub id: u32,
    /// Identifier in the source data (e.g. a MovieLens movie id).
    pub source_id: u64,
    pub title: String,
    /// Number of training transitions whose action is this item.
    pub count: u64,
}

/// Dense item catalog. Ids run `1..=len()`; id 0 is padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemCatalog {
    items: Vec<CatalogItem>,
    #[serde(skip)]
    by_title: HashMap<String, u32>,
    #[serde(skip)]
    by_lower_title: HashMap<String, u32>,
}

impl ItemCatalog {
    /// Builds a catalog from `(source_id, title)` pairs; ids are assigned
    /// densely in the order given.
    pub fn new(entries: Vec<(u64, String)>) -> Self {
        let items = entries
            .into_iter()
            .enumerate()
            .map(|(i, (source_id, title))| CatalogItem {
                id: i as u32 + 1,
                source_id,
                title,
                count: 0,
            })
            .collect();
        let mut c = Self {
            items,
            by_title: HashMap::new(),
            by_lower_title: HashMap::new(),
        };
        c.reindex();
        c
    }

    /// Catalog of `n` items titled `"item {id}"`.
    pub fn synthetic(n: usize) -> Self {
        Self::new((1..=n as u64).map(|i| (i, format!("item {i}"))).collect())
    }

    fn reindex(&mut self) {
        self.by_title.clear();
        self.by_lower_title.clear();
        for it in &self.items {
            self.by_title.entry(it.title.clone()).or_insert(it.id);
            self.by_lower_title.entry(it.title.to_lowercase()).or_insert(it.id);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[CatalogItem] {
        &self.items
    }

    pub fn contains(&self, id: u32) -> bool {
        id >= 1 && (id as usize) <= self.items.len()
    }

    pub fn get(&self, id: u32) -> Option<&CatalogItem> {
        if self.contains(id) {
            Some(&self.items[id as usize - 1])
        } else {
            None
        }
    }

    pub fn title(&self, id: u32) -> Option<&str> {
        self.get(id).map(|i| i.title.as_str())
    }

    pub fn id_by_title(&self, title: &str) -> Option<u32> {
        self.by_title.get(title).copied()
    }

    pub fn id_by_title_ci(&self, title: &str) -> Option<u32> {
        self.by_lower_title.get(&title.to_lowercase()).copied()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.items.iter().map(|i| i.count).collect()
    }

    /// Replaces per-item counts; `counts[i]` belongs to id `i + 1`.
    pub fn set_counts(&mut self, counts: &[u64]) -> Result<()> {
        if counts.len() != self.items.len() {
            return Err(Error::shape("set_counts", &[self.items.len()], &[counts.len()]));
        }
        for (it, &c) in self.items.iter_mut().zip(counts) {
            it.count = c;
        }
        Ok(())
    }

    /// Stable fingerprint of ids and titles; counts are excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for it in &self.items {
            h.update(it.id.to_le_bytes());
            h.update(it.title.as_bytes());
            h.update([0u8]);
        }
        hex16(&h.finalize())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: ItemCatalog = serde_json::from_str(&text)?;
        for (i, it) in c.items.iter().enumerate() {
            if it.id as usize != i + 1 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    message: format!("catalog ids must be dense, item {} has id {}", i + 1, it.id),
                });
            }
        }
        c.reindex();
        Ok(c)
    }
}

pub(crate) fn hex16(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
