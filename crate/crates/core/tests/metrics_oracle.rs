use std::collections::{BTreeSet, HashMap};

use laac_core::autodiff::SeededRng;
use laac_core::metrics::*;
use laac_core::model::Window;
use proptest::prelude::*;

struct Instance {
    probs: Vec<Vec<f64>>,
    truth: Vec<u32>,
    windows: Vec<Window>,
    ratings: HashMap<(Window, u32), f64>,
    novel: BTreeSet<u32>,
    items: usize,
}

struct Table<'a>(&'a HashMap<(Window, u32), f64>);

impl RatingLookup for Table<'_> {
    fn rating(&self, window: &Window, item: u32) -> Option<f64> {
        self.0.get(&(*window, item)).copied()
    }
}

fn instance(rng: &mut SeededRng) -> Instance {
    let items = 2 + rng.below(29);
    let n = 1 + rng.below(50);
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            // Coarse values so ties are common.
            let raw: Vec<f64> = (0..items).map(|_| (1 + rng.below(6)) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    let truth = (0..n).map(|_| 1 + rng.below(items) as u32).collect();
    let windows: Vec<Window> = (0..n).map(|_| [0, 0, 0, rng.below(3) as u32, rng.below(4) as u32]).collect();
    let mut ratings = HashMap::new();
    for w in &windows {
        for id in 1..=items as u32 {
            if rng.uniform() < 0.3 {
                ratings.insert((*w, id), (1 + rng.below(5)) as f64);
            }
        }
    }
    let novel = (1..=items as u32).filter(|_| rng.uniform() < 0.4).collect();
    Instance {
        probs,
        truth,
        windows,
        ratings,
        novel,
        items,
    }
}

/// 1-based rank of `id`: items with higher probability, or equal probability
/// and a smaller id, come first.
fn rank(p: &[f64], id: u32) -> usize {
    let me = p[id as usize - 1];
    1 + (1..=p.len() as u32)
        .filter(|&j| j != id && (p[j as usize - 1] > me || (p[j as usize - 1] == me && j < id)))
        .count()
}

fn in_top(p: &[f64], id: u32, k: usize) -> bool {
    rank(p, id) <= k
}

#[test]
fn metrics_equal_brute_force() {
    let mut rng = SeededRng::new(123);
    for case in 0..100 {
        let x = instance(&mut rng);
        let n = x.probs.len() as f64;
        let lists: Vec<Vec<u32>> = x.probs.iter().map(|p| top_k(p, x.items)).collect();
        for k in [1, x.items / 2 + 1, x.items] {
            let hr = x.probs.iter().zip(&x.truth).filter(|(p, &t)| in_top(p, t, k)).count() as f64 / n;
            let dcg: f64 = x
                .probs
                .iter()
                .zip(&x.truth)
                .filter(|(p, &t)| in_top(p, t, k))
                .map(|(p, &t)| 1.0 / (1.0 + rank(p, t) as f64).log2())
                .sum::<f64>()
                / n;
            let mut reward = 0.0;
            let mut seen = BTreeSet::new();
            for (p, w) in x.probs.iter().zip(&x.windows) {
                for id in 1..=x.items as u32 {
                    if in_top(p, id, k) {
                        seen.insert(id);
                        reward += x.ratings.get(&(*w, id)).copied().unwrap_or(0.0);
                    }
                }
            }
            let nov = seen.iter().filter(|i| x.novel.contains(i)).count();
            assert!((hit_ratio(&lists, &x.truth, k).unwrap() - hr).abs() < 1e-12, "case {case} hr");
            assert!((ndcg(&lists, &x.truth, k).unwrap() - dcg).abs() < 1e-12, "case {case} ndcg");
            let got = cumulative_reward(&lists, &x.windows, &Table(&x.ratings), k).unwrap();
            assert!((got - reward).abs() < 1e-12, "case {case} reward");
            let cv = seen.len() as f64 / x.items as f64;
            assert!((coverage(&lists, x.items, k).unwrap() - cv).abs() < 1e-12, "case {case} cv");
            assert_eq!(novel_count(&lists, &x.novel, k).unwrap(), nov, "case {case} nc");
            let ncv = if x.novel.is_empty() { 0.0 } else { nov as f64 / x.novel.len() as f64 };
            assert!((novel_coverage(&lists, &x.novel, k).unwrap() - ncv).abs() < 1e-12, "case {case} ncv");
        }
        let h: f64 = x
            .probs
            .iter()
            .map(|p| p.iter().map(|&q| if q > 0.0 { -q * q.ln() } else { 0.0 }).sum::<f64>())
            .sum::<f64>()
            / n;
        assert!((policy_entropy(&x.probs).unwrap() - h).abs() < 1e-12, "case {case} entropy");
    }
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..5, 2..30).prop_map(|raw| {
        let raw: Vec<f64> = raw.iter().map(|&x| x as f64 + 1.0).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn bounded_and_monotone_in_k(p in distribution(), t in 1u32..30) {
        let items = p.len();
        let truth = vec![1 + (t - 1) % items as u32];
        let lists = vec![top_k(&p, items)];
        let novel: BTreeSet<u32> = (1..=items as u32).filter(|i| i % 2 == 0).collect();
        let mut prev = (0.0, 0.0, 0.0, 0.0);
        for k in 1..=items {
            let cur = (
                hit_ratio(&lists, &truth, k).unwrap(),
                ndcg(&lists, &truth, k).unwrap(),
                coverage(&lists, items, k).unwrap(),
                novel_coverage(&lists, &novel, k).unwrap(),
            );
            for v in [cur.0, cur.1, cur.2, cur.3] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2 && cur.3 >= prev.3);
            prev = cur;
        }
        let h = entropy(&p).unwrap();
        prop_assert!(h >= 0.0 && h <= (items as f64).ln() + 1e-12);
    }

    #[test]
    fn ties_are_deterministic(n in 2usize..30, k in 1usize..30) {
        let p = vec![1.0 / n as f64; n];
        let k = k.min(n);
        let expect: Vec<u32> = (1..=k as u32).collect();
        prop_assert_eq!(top_k(&p, k), expect);
    }
}
