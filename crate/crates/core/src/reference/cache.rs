use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{parse_state_key, Window};
use crate::reference::table::ReferencePolicyTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    /// The reply arrived but none of its lines matched a candidate.
    Unmatched,
    /// Transport or protocol failure after all retries.
    Failed,
}

/// One prompt/response exchange as persisted in the cache file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderRecord {
    pub state_key: String,
    pub candidate_ids: Vec<u32>,
    pub parsed_ids: Vec<u32>,
    pub provider: String,
    pub template_hash: String,
    pub raw_response: String,
    pub timestamp: u64,
    pub status: RecordStatus,
    pub candidate_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reads every record of a JSONL cache; a missing file is an empty cache.
pub fn read_cache(path: &Path) -> Result<Vec<ProviderRecord>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Append-only writer; each record is flushed as soon as it is written.
pub struct CacheWriter {
    file: std::fs::File,
    path: std::path::PathBuf,
}

impl CacheWriter {
    pub fn open(path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, record: &ProviderRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_cache(path: &Path, records: &[ProviderRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableStats {
    pub states: usize,
    pub unmatched: usize,
    pub failed: usize,
}

/// Latest record per state key; later lines supersede earlier ones.
pub fn latest_records(records: &[ProviderRecord]) -> BTreeMap<String, &ProviderRecord> {
    let mut out = BTreeMap::new();
    for r in records {
        out.insert(r.state_key.clone(), r);
    }
    out
}

/// Builds the reference table from cached exchanges.
///
/// Every record must carry `template_hash`. Unmatched and failed states are
/// left out of the table and counted.
pub fn table_from_records(
    records: &[ProviderRecord],
    item_count: usize,
    n_c: usize,
    seed: u64,
    template_hash: &str,
) -> Result<(ReferencePolicyTable, TableStats)> {
    let mut table = ReferencePolicyTable::new(item_count, n_c, seed)?;
    let mut stats = TableStats::default();
    for r in records {
        if r.template_hash != template_hash {
            return Err(Error::TemplateMismatch {
                expected: template_hash.to_string(),
                found: r.template_hash.clone(),
            });
        }
    }
    for (key, r) in latest_records(records) {
        match r.status {
            RecordStatus::Ok if !r.parsed_ids.is_empty() => {
                let window: Window = parse_state_key(&key)?;
                table.insert(window, r.candidate_ids.clone(), r.parsed_ids.clone())?;
            }
            RecordStatus::Failed => stats.failed += 1,
            _ => stats.unmatched += 1,
        }
    }
    stats.states = table.len();
    if stats.unmatched + stats.failed > 0 {
        log::warn!(
            "reference table omits {} unmatched and {} failed states",
            stats.unmatched,
            stats.failed
        );
    }
    Ok((table, stats))
}

/// Raw responses by state key, for replay.
pub fn responses_by_key(records: &[ProviderRecord]) -> HashMap<String, String> {
    latest_records(records)
        .into_iter()
        .filter(|(_, r)| r.status != RecordStatus::Failed)
        .map(|(k, r)| (k, r.raw_response.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key: &str, parsed: Vec<u32>, status: RecordStatus) -> ProviderRecord {
        ProviderRecord {
            state_key: key.into(),
            candidate_ids: vec![1, 2, 3],
            parsed_ids: parsed,
            provider: "stub".into(),
            template_hash: "t".into(),
            raw_response: "line \"quoted\"\nnext\ttab".into(),
            timestamp: 0,
            status,
            candidate_seed: 0,
            error: None,
        }
    }

    #[test]
    fn round_trip_and_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let recs = vec![
            record("0,0,0,0,1", vec![2, 3], RecordStatus::Ok),
            record("0,0,0,0,2", vec![], RecordStatus::Unmatched),
            record("0,0,0,0,3", vec![], RecordStatus::Failed),
        ];
        let mut w = CacheWriter::open(&path).unwrap();
        for r in &recs {
            w.append(r).unwrap();
        }
        let back = read_cache(&path).unwrap();
        assert_eq!(back, recs);
        let (t, stats) = table_from_records(&back, 3, 3, 0, "t").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(stats, TableStats { states: 1, unmatched: 1, failed: 1 });
        let (t2, _) = table_from_records(&read_cache(&path).unwrap(), 3, 3, 0, "t").unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn mixed_templates_are_rejected() {
        let recs = vec![record("0,0,0,0,1", vec![2], RecordStatus::Ok)];
        assert!(matches!(
            table_from_records(&recs, 3, 3, 0, "other"),
            Err(Error::TemplateMismatch { .. })
        ));
    }

    #[test]
    fn missing_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_cache(&dir.path().join("none.jsonl")).unwrap().is_empty());
    }
}
