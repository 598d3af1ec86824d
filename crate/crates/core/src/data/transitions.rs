//! Offline transitions, the train/eval partition and the canonical
//! tab-separated transitions file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::movielens::{UserInfo, UserSequence};
use crate::error::{Error, Result};
use crate::model::{hex16, shift_append, Window, PAD, WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

/// One `(s, a, r, s')` sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub window: Window,
    pub action: u32,
    pub reward: f64,
    pub next_window: Window,
    pub terminal: bool,
    pub split: Split,
    /// Index into [`OfflineDataset::users`]; 0 when users are unknown.
    #[serde(default)]
    pub user: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionOptions {
    /// Fraction of each user's transitions (the most recent ones) held out.
    pub eval_fraction: f64,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        Self { eval_fraction: 0.2 }
    }
}

/// Ordered transitions with a per-transition split.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineDataset {
    pub transitions: Vec<Transition>,
    pub item_count: usize,
    pub users: Vec<UserInfo>,
}

/// Window of the `WINDOW` items preceding position `t`, left-padded.
fn window_before(items: &[u32], t: usize) -> Window {
    let mut w = [PAD; WINDOW];
    let start = t.saturating_sub(WINDOW);
    let hist = &items[start..t];
    w[WINDOW - hist.len()..].copy_from_slice(hist);
    w
}

/// Emits transitions for one sequence of length `L`.
///
/// With `L >= WINDOW + 1`, every `t` in `[WINDOW, L-1]` yields one sample
/// with a full window. Shorter sequences are left-padded and start at
/// `t = 1`. The sample at `t = L-1` is terminal.
pub fn sequence_transitions(items: &[u32], ratings: &[f64], user: u32) -> Vec<Transition> {
    let len = items.len();
    if len < 2 {
        return Vec::new();
    }
    let start = if len > WINDOW { WINDOW } else { 1 };
    (start..len)
        .map(|t| {
            let window = window_before(items, t);
            Transition {
                window,
                action: items[t],
                reward: ratings[t],
                next_window: shift_append(&window, items[t]),
                terminal: t == len - 1,
                split: Split::Train,
                user,
            }
        })
        .collect()
}

/// Builds the dataset from sorted user sequences and assigns each user's
/// last `eval_fraction` of transitions (rounded) to evaluation.
pub fn build_transitions(sequences: &[UserSequence], item_count: usize, options: &TransitionOptions) -> OfflineDataset {
    let mut transitions = Vec::new();
    let mut users = Vec::with_capacity(sequences.len());
    for (u, seq) in sequences.iter().enumerate() {
        users.push(seq.user.clone());
        let mut ts = sequence_transitions(&seq.items, &seq.ratings, u as u32);
        let n_eval = (ts.len() as f64 * options.eval_fraction).round() as usize;
        let cut = ts.len() - n_eval.min(ts.len());
        for t in &mut ts[cut..] {
            t.split = Split::Eval;
        }
        transitions.extend(ts);
    }
    OfflineDataset {
        transitions,
        item_count,
        users,
    }
}

impl OfflineDataset {
    pub fn train(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.split == Split::Train)
    }

    pub fn eval(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.split == Split::Eval)
    }

    pub fn train_transitions(&self) -> Vec<Transition> {
        self.train().cloned().collect()
    }

    pub fn eval_transitions(&self) -> Vec<Transition> {
        self.eval().cloned().collect()
    }

    pub fn split_counts(&self) -> (usize, usize) {
        let train = self.train().count();
        (train, self.transitions.len() - train)
    }

    /// Action counts per item over training transitions; index `i` is id
    /// `i + 1`.
    pub fn train_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.item_count];
        for t in self.train() {
            counts[t.action as usize - 1] += 1;
        }
        counts
    }

    /// Keeps training transitions whose user satisfies `keep`; evaluation is
    /// left untouched.
    pub fn skewed_subset(&self, keep: impl Fn(&UserInfo) -> bool) -> Result<OfflineDataset> {
        if self.users.is_empty() {
            return Err(Error::InvalidArgument("dataset carries no user tags".into()));
        }
        let transitions: Vec<Transition> = self
            .transitions
            .iter()
            .filter(|t| t.split == Split::Eval || keep(&self.users[t.user as usize]))
            .cloned()
            .collect();
        let out = OfflineDataset {
            transitions,
            item_count: self.item_count,
            users: self.users.clone(),
        };
        if out.train().next().is_none() {
            return Err(Error::Empty("training split after skew filter"));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.transitions {
            if t.action == PAD || t.action as usize > self.item_count {
                return Err(Error::IndexOutOfRange {
                    what: "action id",
                    index: t.action as usize,
                    size: self.item_count + 1,
                });
            }
            for &id in t.window.iter().chain(&t.next_window) {
                if id as usize > self.item_count {
                    return Err(Error::IndexOutOfRange {
                        what: "window id",
                        index: id as usize,
                        size: self.item_count + 1,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for t in &self.transitions {
            for id in &t.window {
                let _ = write!(out, "{id}\t");
            }
            let _ = write!(out, "{}\t{}\t", t.action, t.reward);
            for id in &t.next_window {
                let _ = write!(out, "{id}\t");
            }
            let _ = writeln!(out, "{}\t{}", u8::from(t.terminal), t.split.as_str());
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn hash(&self) -> String {
        hex16(&Sha256::digest(self.to_tsv().as_bytes()))
    }

    pub fn from_tsv(text: &str, item_count: usize, origin: &str) -> Result<OfflineDataset> {
        let mut transitions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 2 * WINDOW + 4 {
                return Err(bad(format!("expected {} fields, got {}", 2 * WINDOW + 4, f.len())));
            }
            let id = |s: &str| s.parse::<u32>().map_err(|e| bad(format!("bad id `{s}`: {e}")));
            let mut window = [PAD; WINDOW];
            let mut next_window = [PAD; WINDOW];
            for i in 0..WINDOW {
                window[i] = id(f[i])?;
                next_window[i] = id(f[WINDOW + 2 + i])?;
            }
            let action = id(f[WINDOW])?;
            let reward = f[WINDOW + 1]
                .parse::<f64>()
                .map_err(|e| bad(format!("bad reward: {e}")))?;
            let terminal = match f[2 * WINDOW + 2] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("bad terminal flag `{other}`"))),
            };
            let split = match f[2 * WINDOW + 3] {
                "train" => Split::Train,
                "eval" => Split::Eval,
                other => return Err(bad(format!("bad split `{other}`"))),
            };
            transitions.push(Transition {
                window,
                action,
                reward,
                next_window,
                terminal,
                split,
                user: 0,
            });
        }
        let ds = OfflineDataset {
            transitions,
            item_count,
            users: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn read_tsv(path: &Path, item_count: usize) -> Result<OfflineDataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, item_count, &path.display().to_string())
    }
}

pub const TSV_HEADER: &str =
    "#w1\tw2\tw3\tw4\tw5\taction\treward\tn1\tn2\tn3\tn4\tn5\tterminal\tsplit";
