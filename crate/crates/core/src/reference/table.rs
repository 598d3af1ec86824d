use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{hex16, state_key, Window};
use crate::reference::candidates::state_candidates;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub candidates: Vec<u32>,
    pub suggestions: Vec<u32>,
}

/// The frozen reference policy: for each known state a uniform distribution
/// over its suggested ids.
///
/// States without an entry fall back to a uniform distribution over the
/// candidate set that state would have been prompted with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencePolicyTable {
    item_count: usize,
    n_c: usize,
    seed: u64,
    entries: BTreeMap<Window, Suggestion>,
}

impl ReferencePolicyTable {
    pub fn new(item_count: usize, n_c: usize, seed: u64) -> Result<Self> {
        if n_c == 0 || n_c > item_count {
            return Err(Error::InvalidArgument(format!(
                "candidate count {n_c} must be in 1..={item_count}"
            )));
        }
        Ok(Self {
            item_count,
            n_c,
            seed,
            entries: BTreeMap::new(),
        })
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn candidate_count(&self) -> usize {
        self.n_c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<Window, Suggestion> {
        &self.entries
    }

    pub fn get(&self, window: &Window) -> Option<&Suggestion> {
        self.entries.get(window)
    }

    /// Adds a state. Suggestions must be nonempty, distinct, and drawn from
    /// the candidates, which in turn must be catalog ids.
    pub fn insert(&mut self, window: Window, candidates: Vec<u32>, suggestions: Vec<u32>) -> Result<()> {
        let key = state_key(&window);
        if suggestions.is_empty() {
            return Err(Error::InvalidArgument(format!("state {key} has no suggestions")));
        }
        for &id in &candidates {
            if id == 0 || id as usize > self.item_count {
                return Err(Error::IndexOutOfRange {
                    what: "candidate id",
                    index: id as usize,
                    size: self.item_count + 1,
                });
            }
        }
        for (i, id) in suggestions.iter().enumerate() {
            if !candidates.contains(id) {
                return Err(Error::InvalidArgument(format!(
                    "state {key}: suggestion {id} is not a candidate"
                )));
            }
            if suggestions[..i].contains(id) {
                return Err(Error::InvalidArgument(format!("state {key}: duplicate suggestion {id}")));
            }
        }
        self.entries.insert(window, Suggestion { candidates, suggestions });
        Ok(())
    }

    /// Candidate ids for a state: the recorded ones when known, otherwise the
    /// deterministic per-state draw.
    pub fn candidates(&self, window: &Window) -> Result<Vec<u32>> {
        match self.entries.get(window) {
            Some(s) => Ok(s.candidates.clone()),
            None => state_candidates(window, self.item_count, self.n_c, self.seed),
        }
    }

    /// Uniform distribution over the suggestions of a known state, indexed
    /// by `id - 1`. `None` when the state has no entry.
    pub fn policy_vector(&self, window: &Window) -> Option<Vec<f64>> {
        self.entries
            .get(window)
            .map(|s| uniform_over(&s.suggestions, self.item_count))
    }

    /// As [`policy_vector`](Self::policy_vector) but substituting the
    /// candidate-set fallback for unknown states.
    pub fn policy_or_fallback(&self, window: &Window) -> Result<Vec<f64>> {
        match self.policy_vector(window) {
            Some(p) => Ok(p),
            None => Ok(uniform_over(&self.candidates(window)?, self.item_count)),
        }
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.item_count.to_le_bytes());
        h.update(self.n_c.to_le_bytes());
        h.update(self.seed.to_le_bytes());
        for (w, s) in &self.entries {
            h.update(state_key(w).as_bytes());
            for id in s.candidates.iter().chain(&[0]).chain(&s.suggestions) {
                h.update(id.to_le_bytes());
            }
            h.update([0xff]);
        }
        hex16(&h.finalize())
    }
}

fn uniform_over(ids: &[u32], item_count: usize) -> Vec<f64> {
    let mut p = vec![0.0; item_count];
    let w = 1.0 / ids.len() as f64;
    for &id in ids {
        p[id as usize - 1] = w;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_suggestions_are_uniform() {
        let mut t = ReferencePolicyTable::new(30, 20, 1).unwrap();
        let cands: Vec<u32> = (1..=20).collect();
        t.insert([0, 0, 0, 1, 2], cands.clone(), (5..15).collect()).unwrap();
        let p = t.policy_vector(&[0, 0, 0, 1, 2]).unwrap();
        assert_eq!(p.iter().filter(|&&x| x == 0.1).count(), 10);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum();
        assert!((h - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_suggestion_is_one_hot() {
        let mut t = ReferencePolicyTable::new(5, 5, 1).unwrap();
        t.insert([1; 5], vec![1, 2, 3], vec![3]).unwrap();
        assert_eq!(t.policy_vector(&[1; 5]).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_state_falls_back_to_candidates() {
        let t = ReferencePolicyTable::new(40, 8, 3).unwrap();
        let w = [0, 0, 4, 5, 6];
        assert!(t.policy_vector(&w).is_none());
        let p = t.policy_or_fallback(&w).unwrap();
        assert_eq!(p.iter().filter(|&&x| x > 0.0).count(), 8);
        assert_eq!(p, t.policy_or_fallback(&w).unwrap());
    }

    #[test]
    fn closed_world_is_enforced() {
        let mut t = ReferencePolicyTable::new(5, 3, 1).unwrap();
        assert!(t.insert([1; 5], vec![1, 2], vec![3]).is_err());
        assert!(t.insert([1; 5], vec![1, 9], vec![1]).is_err());
        assert!(t.insert([1; 5], vec![1, 2], vec![1, 1]).is_err());
        assert!(t.insert([1; 5], vec![1, 2], vec![]).is_err());
    }
}
