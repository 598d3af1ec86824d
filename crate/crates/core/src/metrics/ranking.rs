//! Top-k accuracy, reward, coverage and entropy metrics.
//!
//! A recommendation list holds item ids in rank order. Every metric takes
//! `k` and reads only the first `k` entries of each list.

use std::collections::{BTreeSet, HashMap};

use crate::data::{SyntheticMDP, Transition};
use crate::error::{Error, Result};
use crate::model::Window;

/// Ids of the `k` most probable items, probability descending and ties by
/// ascending id. `probs[i]` belongs to id `i + 1`.
pub fn top_k(probs: &[f64], k: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (1..=probs.len() as u32).collect();
    let key = |id: u32| probs[id as usize - 1];
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn check_k(lists: &[Vec<u32>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if let Some(l) = lists.iter().find(|l| l.len() < k) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds a recommendation list of length {}",
            l.len()
        )));
    }
    Ok(())
}

fn check_truth(lists: &[Vec<u32>], truth: &[u32]) -> Result<()> {
    if lists.len() != truth.len() {
        return Err(Error::shape("metrics", &[lists.len()], &[truth.len()]));
    }
    if lists.is_empty() {
        return Err(Error::Empty("recommendation set"));
    }
    Ok(())
}

/// Fraction of lists whose ground-truth item is in the top `k`.
pub fn hit_ratio(lists: &[Vec<u32>], truth: &[u32], k: usize) -> Result<f64> {
    check_truth(lists, truth)?;
    check_k(lists, k)?;
    let hits = lists.iter().zip(truth).filter(|(l, t)| l[..k].contains(t)).count();
    Ok(hits as f64 / lists.len() as f64)
}

/// Mean of `1 / log2(rank + 1)` for hits at rank `<= k`, zero otherwise.
pub fn ndcg(lists: &[Vec<u32>], truth: &[u32], k: usize) -> Result<f64> {
    check_truth(lists, truth)?;
    check_k(lists, k)?;
    let total: f64 = lists
        .iter()
        .zip(truth)
        .map(|(l, t)| match l[..k].iter().position(|x| x == t) {
            Some(pos) => 1.0 / ((pos + 2) as f64).log2(),
            None => 0.0,
        })
        .sum();
    Ok(total / lists.len() as f64)
}

/// Resolves the reward of recommending `item` at `window`.
pub trait RatingLookup {
    fn rating(&self, window: &Window, item: u32) -> Option<f64>;
}

/// Ratings observed in a set of transitions; unobserved pairs are absent.
#[derive(Clone, Debug, Default)]
pub struct ObservedRatings {
    ratings: HashMap<(Window, u32), f64>,
}

impl ObservedRatings {
    /// Keeps the first rating seen for each `(window, item)` pair.
    pub fn new<'a>(transitions: impl IntoIterator<Item = &'a Transition>) -> Self {
        let mut ratings = HashMap::new();
        for t in transitions {
            ratings.entry((t.window, t.action)).or_insert(t.reward);
        }
        Self { ratings }
    }
}

impl RatingLookup for ObservedRatings {
    fn rating(&self, window: &Window, item: u32) -> Option<f64> {
        self.ratings.get(&(*window, item)).copied()
    }
}

impl RatingLookup for SyntheticMDP {
    fn rating(&self, window: &Window, item: u32) -> Option<f64> {
        self.true_reward(window, item)
    }
}

/// Sum of resolvable ratings over every top-`k` list.
pub fn cumulative_reward(lists: &[Vec<u32>], windows: &[Window], lookup: &dyn RatingLookup, k: usize) -> Result<f64> {
    if lists.len() != windows.len() {
        return Err(Error::shape("cumulative_reward", &[lists.len()], &[windows.len()]));
    }
    check_k(lists, k)?;
    Ok(lists
        .iter()
        .zip(windows)
        .map(|(l, w)| l[..k].iter().filter_map(|&id| lookup.rating(w, id)).sum::<f64>())
        .sum())
}

fn union_top_k(lists: &[Vec<u32>], k: usize) -> Result<BTreeSet<u32>> {
    if lists.is_empty() {
        return Err(Error::Empty("recommendation set"));
    }
    check_k(lists, k)?;
    Ok(lists.iter().flat_map(|l| l[..k].iter().copied()).collect())
}

/// `|union of top-k ids| / |A|`.
pub fn coverage(lists: &[Vec<u32>], item_count: usize, k: usize) -> Result<f64> {
    if k > item_count {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds catalog size {item_count}")));
    }
    Ok(union_top_k(lists, k)?.len() as f64 / item_count as f64)
}

/// Distinct novel items appearing in any top-`k` list.
pub fn novel_count(lists: &[Vec<u32>], novel: &BTreeSet<u32>, k: usize) -> Result<usize> {
    Ok(union_top_k(lists, k)?.intersection(novel).count())
}

/// `|union of top-k ids ∩ novel| / |novel|`; zero when there are no novel
/// items.
pub fn novel_coverage(lists: &[Vec<u32>], novel: &BTreeSet<u32>, k: usize) -> Result<f64> {
    let n = novel_count(lists, novel, k)?;
    Ok(if novel.is_empty() { 0.0 } else { n as f64 / novel.len() as f64 })
}

/// Entropy in nats of one distribution; rejects vectors not summing to 1.
pub fn entropy(p: &[f64]) -> Result<f64> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument(format!("distribution sums to {sum}")));
    }
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
}

/// Mean per-state entropy.
pub fn policy_entropy(distributions: &[Vec<f64>]) -> Result<f64> {
    if distributions.is_empty() {
        return Err(Error::Empty("evaluation states"));
    }
    let mut total = 0.0;
    for p in distributions {
        total += entropy(p)?;
    }
    Ok(total / distributions.len() as f64)
}
