//! Small fully specified MDPs whose logged data, reference suggestions and
//! true values are all known.
//!
//! Item ids are laid out in blocks: popular (logged) items first, then
//! novel-good, then novel-bad, then filler items that are neither logged nor
//! suggested. Each abstract state is shown to the networks as a fixed
//! window of popular ids.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::autodiff::SeededRng;
use crate::data::movielens::UserInfo;
use crate::data::transitions::{OfflineDataset, Split, Transition};
use crate::error::{Error, Result};
use crate::model::{ItemCatalog, Window, WINDOW};
use crate::reference::ReferencePolicyTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub states: usize,
    pub items: usize,
    pub popular: usize,
    pub novel_good: usize,
    pub novel_bad: usize,
    /// Popular rewards are drawn uniformly from `popular_reward ± reward_spread`.
    pub popular_reward: f64,
    pub reward_spread: f64,
    pub good_reward: f64,
    pub bad_reward: f64,
    pub filler_reward: f64,
    /// Behavior policy is `softmax(r(s, .) / temperature)` over popular items.
    pub behavior_temperature: f64,
    pub samples: usize,
    pub episode_length: usize,
    pub gamma: f64,
    pub eval_fraction: f64,
    pub good_per_state: usize,
    pub bad_per_state: usize,
    pub logged_per_state: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            states: 20,
            items: 50,
            popular: 25,
            novel_good: 5,
            novel_bad: 5,
            popular_reward: 3.0,
            reward_spread: 0.1,
            good_reward: 5.0,
            bad_reward: 1.0,
            filler_reward: 2.0,
            behavior_temperature: 0.5,
            samples: 3000,
            episode_length: 30,
            gamma: 0.9,
            eval_fraction: 0.2,
            good_per_state: 4,
            bad_per_state: 2,
            logged_per_state: 4,
            seed: 2024,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.states == 0 || self.popular == 0 {
            return bad("need at least one state and one popular item".into());
        }
        if self.popular + self.novel_good + self.novel_bad > self.items {
            return bad(format!(
                "popular ({}) + novel-good ({}) + novel-bad ({}) items overlap within a catalog of {}",
                self.popular, self.novel_good, self.novel_bad, self.items
            ));
        }
        for (name, r) in [
            ("good_reward", self.good_reward),
            ("bad_reward", self.bad_reward),
            ("filler_reward", self.filler_reward),
            ("popular_reward - reward_spread", self.popular_reward - self.reward_spread),
            ("popular_reward + reward_spread", self.popular_reward + self.reward_spread),
        ] {
            if !(1.0..=5.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [1, 5]"));
            }
        }
        if self.reward_spread < 0.0 {
            return bad("reward_spread must be nonnegative".into());
        }
        if !(self.behavior_temperature > 0.0) {
            return bad("behavior_temperature must be positive".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} must be in [0, 1)", self.gamma));
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return bad("eval_fraction must be in [0, 1)".into());
        }
        if self.episode_length == 0 || self.samples == 0 {
            return bad("samples and episode_length must be positive".into());
        }
        if self.good_per_state + self.bad_per_state + self.logged_per_state == 0 {
            return bad("reference suggestions per state must be positive".into());
        }
        let windows = (self.popular as f64).powi(WINDOW as i32);
        if windows < self.states as f64 {
            return bad(format!("{} popular items cannot give {} distinct windows", self.popular, self.states));
        }
        Ok(())
    }

    pub fn popular_ids(&self) -> Range<u32> {
        1..self.popular as u32 + 1
    }

    pub fn good_ids(&self) -> Range<u32> {
        let start = self.popular as u32 + 1;
        start..start + self.novel_good as u32
    }

    pub fn bad_ids(&self) -> Range<u32> {
        let start = (self.popular + self.novel_good) as u32 + 1;
        start..start + self.novel_bad as u32
    }
}

/// A finite MDP; actions are item ids, stored at index `id - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMDP {
    /// `transition[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub gamma: f64,
    /// Window shown for each state; empty for purely tabular MDPs.
    pub windows: Vec<Window>,
    /// Logging policy `behavior[s][a]`.
    pub behavior: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} is not a distribution (sum {sum})")));
    }
    Ok(())
}

impl SyntheticMDP {
    /// Tabular MDP with a uniform behavior policy and no windows.
    pub fn tabular(transition: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<f64>>, initial: Vec<f64>, gamma: f64) -> Result<Self> {
        let actions = reward.first().map_or(0, Vec::len);
        let behavior = vec![vec![1.0 / actions as f64; actions]; reward.len()];
        let mdp = Self {
            transition,
            reward,
            initial,
            gamma,
            windows: Vec::new(),
            behavior,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn states(&self) -> usize {
        self.reward.len()
    }

    pub fn actions(&self) -> usize {
        self.reward.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (s_n, a_n) = (self.states(), self.actions());
        if s_n == 0 || a_n == 0 {
            return Err(Error::Empty("MDP"));
        }
        if self.transition.len() != s_n || self.initial.len() != s_n || self.behavior.len() != s_n {
            return Err(Error::shape("mdp", &[s_n], &[self.transition.len(), self.initial.len()]));
        }
        check_distribution(&self.initial, "initial distribution")?;
        for s in 0..s_n {
            if self.reward[s].len() != a_n || self.transition[s].len() != a_n {
                return Err(Error::shape("mdp", &[s_n, a_n], &[s, self.reward[s].len()]));
            }
            check_distribution(&self.behavior[s], "behavior policy")?;
            for a in 0..a_n {
                if self.transition[s][a].len() != s_n {
                    return Err(Error::shape("mdp", &[s_n], &[self.transition[s][a].len()]));
                }
                check_distribution(&self.transition[s][a], "transition row")?;
                if !(1.0..=5.0).contains(&self.reward[s][a]) {
                    return Err(Error::InvalidArgument(format!(
                        "reward r({s}, {a}) = {} outside [1, 5]",
                        self.reward[s][a]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn state_of(&self, window: &Window) -> Option<usize> {
        self.windows.iter().position(|w| w == window)
    }

    /// Index from windows to states.
    pub fn state_index(&self) -> HashMap<Window, usize> {
        self.windows.iter().enumerate().map(|(s, w)| (*w, s)).collect()
    }

    /// True reward for showing item `id` at `window`, if the window is a state.
    pub fn true_reward(&self, window: &Window, id: u32) -> Option<f64> {
        let s = self.state_of(window)?;
        self.reward[s].get(id.checked_sub(1)? as usize).copied()
    }
}

/// Everything produced by [`generate_synthetic`].
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub mdp: SyntheticMDP,
    pub dataset: OfflineDataset,
    pub reference: ReferencePolicyTable,
    pub catalog: ItemCatalog,
}

fn pick(rng: &mut SeededRng, ids: Range<u32>, amount: usize) -> Vec<u32> {
    let pool: Vec<u32> = ids.collect();
    let amount = amount.min(pool.len());
    rng.sample_without_replacement(pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let c = config;
    let (s_n, a_n) = (c.states, c.items);
    let mut rng = SeededRng::derive(c.seed, "synthetic-mdp");

    let mut reward = vec![vec![c.filler_reward; a_n]; s_n];
    for row in &mut reward {
        for id in c.popular_ids() {
            row[id as usize - 1] = c.popular_reward + c.reward_spread * (2.0 * rng.uniform() - 1.0);
        }
        for id in c.good_ids() {
            row[id as usize - 1] = c.good_reward;
        }
        for id in c.bad_ids() {
            row[id as usize - 1] = c.bad_reward;
        }
    }

    let transition: Vec<Vec<Vec<f64>>> = (0..s_n)
        .map(|_| {
            (0..a_n)
                .map(|_| {
                    // Flat Dirichlet draw via normalised exponentials.
                    let e: Vec<f64> = (0..s_n).map(|_| -(1.0 - rng.uniform()).ln()).collect();
                    let total: f64 = e.iter().sum();
                    e.into_iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();

    let behavior: Vec<Vec<f64>> = reward
        .iter()
        .map(|row| {
            let mut p = vec![0.0; a_n];
            let top = c
                .popular_ids()
                .map(|id| row[id as usize - 1])
                .fold(f64::NEG_INFINITY, f64::max);
            for id in c.popular_ids() {
                p[id as usize - 1] = ((row[id as usize - 1] - top) / c.behavior_temperature).exp();
            }
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= total);
            p
        })
        .collect();

    let mut seen = BTreeSet::new();
    let mut windows = Vec::with_capacity(s_n);
    while windows.len() < s_n {
        let mut w = [0u32; WINDOW];
        for slot in &mut w {
            *slot = 1 + rng.below(c.popular) as u32;
        }
        if seen.insert(w) {
            windows.push(w);
        }
    }

    let mdp = SyntheticMDP {
        transition,
        reward,
        initial: vec![1.0 / s_n as f64; s_n],
        gamma: c.gamma,
        windows,
        behavior,
    };
    mdp.validate()?;

    let mut log_rng = SeededRng::derive(c.seed, "synthetic-log");
    let mut transitions = Vec::with_capacity(c.samples);
    let mut users = Vec::new();
    let mut remaining = c.samples;
    while remaining > 0 {
        let len = remaining.min(c.episode_length);
        let user = users.len() as u32;
        users.push(UserInfo {
            source_id: user as u64 + 1,
            gender: None,
            age: None,
        });
        let mut s = log_rng.categorical(&mdp.initial);
        let n_eval = (len as f64 * c.eval_fraction).round() as usize;
        for t in 0..len {
            let a = log_rng.categorical(&mdp.behavior[s]);
            let next = log_rng.categorical(&mdp.transition[s][a]);
            transitions.push(Transition {
                window: mdp.windows[s],
                action: a as u32 + 1,
                reward: mdp.reward[s][a],
                next_window: mdp.windows[next],
                terminal: false,
                split: if t + n_eval >= len { Split::Eval } else { Split::Train },
                user,
            });
            s = next;
        }
        remaining -= len;
    }
    let dataset = OfflineDataset {
        transitions,
        item_count: a_n,
        users,
    };

    let mut ref_rng = SeededRng::derive(c.seed, "synthetic-reference");
    let mut reference = ReferencePolicyTable::new(a_n, a_n, c.seed)?;
    let all: Vec<u32> = (1..=a_n as u32).collect();
    for w in &mdp.windows {
        let mut ids = pick(&mut ref_rng, c.good_ids(), c.good_per_state);
        ids.extend(pick(&mut ref_rng, c.bad_ids(), c.bad_per_state));
        ids.extend(pick(&mut ref_rng, c.popular_ids(), c.logged_per_state));
        reference.insert(*w, all.clone(), ids)?;
    }

    let mut catalog = ItemCatalog::synthetic(a_n);
    catalog.set_counts(&dataset.train_counts())?;
    Ok(SyntheticData {
        mdp,
        dataset,
        reference,
        catalog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dataset_logs_only_popular_items() {
        let cfg = SyntheticConfig::default();
        let d = generate_synthetic(&cfg).unwrap();
        assert_eq!(d.dataset.transitions.len(), cfg.samples);
        assert!(d.dataset.transitions.iter().all(|t| cfg.popular_ids().contains(&t.action)));
        let (train, eval) = d.dataset.split_counts();
        assert_eq!(train + eval, cfg.samples);
        assert!(eval > 0);
    }

    #[test]
    fn no_novel_items_means_logged_suggestions() {
        let cfg = SyntheticConfig {
            novel_good: 0,
            novel_bad: 0,
            ..SyntheticConfig::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        for s in d.reference.entries().values() {
            assert!(s.suggestions.iter().all(|id| cfg.popular_ids().contains(id)));
        }
    }

    #[test]
    fn reference_mixes_good_bad_and_logged() {
        let cfg = SyntheticConfig::default();
        let d = generate_synthetic(&cfg).unwrap();
        assert_eq!(d.reference.len(), cfg.states);
        for s in d.reference.entries().values() {
            let good = s.suggestions.iter().filter(|id| cfg.good_ids().contains(id)).count();
            let bad = s.suggestions.iter().filter(|id| cfg.bad_ids().contains(id)).count();
            assert_eq!((good, bad), (cfg.good_per_state, cfg.bad_per_state));
            assert_eq!(s.suggestions.len(), 10);
        }
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let cfg = SyntheticConfig {
            popular: 45,
            ..SyntheticConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.mdp, b.mdp);
        assert_eq!(a.reference, b.reference);
    }
}
