//! MovieLens-1M `::`-delimited ingestion.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::SeededRng;
use crate::error::{Error, Result};
use crate::model::ItemCatalog;

/// One rating event, in source ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
    pub timestamp: i64,
}

/// Demographic tags from `users.dat`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserInfo {
    pub source_id: u64,
    pub gender: Option<char>,
    pub age: Option<u32>,
}

/// A user's chronologically ordered interactions, items already mapped to
/// dense catalog ids.
#[derive(Clone, Debug, PartialEq)]
pub struct UserSequence {
    pub user: UserInfo,
    pub items: Vec<u32>,
    pub ratings: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub malformed_lines: usize,
    pub ratings_without_title: usize,
    pub ratings_read: usize,
    pub items_removed: usize,
    pub users_removed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Minimum interactions an item needs to be kept.
    pub min_item_interactions: usize,
    /// Minimum interactions a user needs (after item filtering).
    pub min_user_interactions: usize,
    /// Keep a seeded random subset of this many users; `None` keeps all.
    pub user_sample: Option<usize>,
    pub sample_seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            min_item_interactions: 3,
            min_user_interactions: 3,
            user_sample: None,
            sample_seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub catalog: ItemCatalog,
    pub sequences: Vec<UserSequence>,
    pub stats: IngestStats,
}

/// Decodes a line as UTF-8, falling back to Latin-1 byte-per-char.
fn decode_line(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .split(|&b| b == b'\n')
        .map(|l| decode_line(l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|l| !l.trim().is_empty())
        .collect())
}

pub fn parse_ratings(lines: &[String], stats: &mut IngestStats) -> Vec<Interaction> {
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let f: Vec<&str> = line.split("::").collect();
        let parsed = (f.len() == 4)
            .then(|| {
                Some(Interaction {
                    user: f[0].trim().parse().ok()?,
                    item: f[1].trim().parse().ok()?,
                    rating: f[2].trim().parse().ok()?,
                    timestamp: f[3].trim().parse().ok()?,
                })
            })
            .flatten()
            .filter(|i| (1.0..=5.0).contains(&i.rating));
        match parsed {
            Some(i) => out.push(i),
            None => stats.malformed_lines += 1,
        }
    }
    out
}

pub fn parse_movies(lines: &[String], stats: &mut IngestStats) -> BTreeMap<u64, String> {
    let mut out = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.splitn(3, "::").collect();
        match (f.len(), f.first().and_then(|s| s.trim().parse::<u64>().ok())) {
            (3, Some(id)) if !f[1].trim().is_empty() => {
                out.insert(id, f[1].trim().to_string());
            }
            _ => stats.malformed_lines += 1,
        }
    }
    out
}

pub fn parse_users(lines: &[String], stats: &mut IngestStats) -> HashMap<u64, UserInfo> {
    let mut out = HashMap::new();
    for line in lines {
        let f: Vec<&str> = line.split("::").collect();
        match f.first().and_then(|s| s.trim().parse::<u64>().ok()) {
            Some(id) if f.len() >= 2 => {
                let gender = f[1].trim().chars().next().map(|c| c.to_ascii_uppercase());
                let age = f.get(2).and_then(|s| s.trim().parse().ok());
                out.insert(
                    id,
                    UserInfo {
                        source_id: id,
                        gender,
                        age,
                    },
                );
            }
            _ => stats.malformed_lines += 1,
        }
    }
    out
}

/// Reads and filters a MovieLens corpus. `users` is optional; without it
/// users carry no demographic tags.
pub fn ingest_movielens(
    ratings: &Path,
    movies: &Path,
    users: Option<&Path>,
    options: &IngestOptions,
) -> Result<Ingested> {
    let mut stats = IngestStats::default();
    let rating_lines = read_lines(ratings)?;
    let movie_lines = read_lines(movies)?;
    let user_lines = match users {
        Some(p) => read_lines(p)?,
        None => Vec::new(),
    };
    let interactions = parse_ratings(&rating_lines, &mut stats);
    let titles = parse_movies(&movie_lines, &mut stats);
    let user_info = parse_users(&user_lines, &mut stats);
    if stats.malformed_lines > 0 {
        log::warn!("skipped {} malformed lines", stats.malformed_lines);
    }
    ingest_interactions(interactions, &titles, &user_info, options, stats)
}

/// Filtering and sequencing on parsed records.
///
/// Items with fewer than `min_item_interactions` ratings are dropped first,
/// then users left with fewer than `min_user_interactions`. Each user's
/// ratings are sorted by timestamp; ties keep input order.
pub fn ingest_interactions(
    interactions: Vec<Interaction>,
    titles: &BTreeMap<u64, String>,
    users: &HashMap<u64, UserInfo>,
    options: &IngestOptions,
    mut stats: IngestStats,
) -> Result<Ingested> {
    let mut kept: Vec<Interaction> = Vec::with_capacity(interactions.len());
    for i in interactions {
        if titles.contains_key(&i.item) {
            kept.push(i);
        } else {
            stats.ratings_without_title += 1;
        }
    }
    stats.ratings_read = kept.len();

    let mut item_counts: HashMap<u64, usize> = HashMap::new();
    for i in &kept {
        *item_counts.entry(i.item).or_default() += 1;
    }
    stats.items_removed = item_counts
        .values()
        .filter(|&&c| c < options.min_item_interactions)
        .count();
    kept.retain(|i| item_counts[&i.item] >= options.min_item_interactions);

    let mut user_counts: BTreeMap<u64, usize> = BTreeMap::new();
    for i in &kept {
        *user_counts.entry(i.user).or_default() += 1;
    }
    stats.users_removed = user_counts
        .values()
        .filter(|&&c| c < options.min_user_interactions)
        .count();
    let mut eligible: Vec<u64> = user_counts
        .iter()
        .filter(|(_, &c)| c >= options.min_user_interactions)
        .map(|(&u, _)| u)
        .collect();
    if let Some(n) = options.user_sample {
        if n < eligible.len() {
            let mut rng = SeededRng::derive(options.sample_seed, "user-sample");
            let mut picked = rng.sample_without_replacement(eligible.len(), n);
            picked.sort_unstable();
            eligible = picked.into_iter().map(|i| eligible[i]).collect();
        }
    }
    let eligible_set: HashSet<u64> = eligible.iter().copied().collect();
    kept.retain(|i| eligible_set.contains(&i.user));
    if kept.is_empty() {
        return Err(Error::Empty("dataset after filtering"));
    }

    let item_ids: std::collections::BTreeSet<u64> = kept.iter().map(|i| i.item).collect();
    let catalog = ItemCatalog::new(item_ids.iter().map(|&id| (id, titles[&id].clone())).collect());
    let dense: HashMap<u64, u32> = item_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32 + 1))
        .collect();

    let mut per_user: BTreeMap<u64, Vec<(i64, usize, u32, f64)>> = BTreeMap::new();
    for (order, i) in kept.iter().enumerate() {
        per_user
            .entry(i.user)
            .or_default()
            .push((i.timestamp, order, dense[&i.item], i.rating));
    }
    let sequences = per_user
        .into_iter()
        .map(|(uid, mut events)| {
            events.sort_by_key(|&(ts, order, _, _)| (ts, order));
            UserSequence {
                user: users.get(&uid).cloned().unwrap_or(UserInfo {
                    source_id: uid,
                    gender: None,
                    age: None,
                }),
                items: events.iter().map(|e| e.2).collect(),
                ratings: events.iter().map(|e| e.3).collect(),
            }
        })
        .collect();

    Ok(Ingested {
        catalog,
        sequences,
        stats,
    })
}
