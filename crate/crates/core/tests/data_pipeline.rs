use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use laac_core::autodiff::SeededRng;
use laac_core::data::*;
use laac_core::model::shift_append;

struct Corpus {
    ratings: Vec<(u64, u64, u32, i64)>,
    titles: BTreeMap<u64, String>,
}

fn corpus() -> Corpus {
    let mut rng = SeededRng::new(77);
    let titles: BTreeMap<u64, String> = (1..=15u64).map(|m| (m * 10, format!("Film {m} ({})", 1980 + m))).collect();
    let ids: Vec<u64> = titles.keys().copied().collect();
    let mut ratings = Vec::new();
    for user in 1..=10u64 {
        let n = 2 + rng.below(9);
        for _ in 0..n {
            let item = ids[rng.below(ids.len())];
            ratings.push((user, item, 1 + rng.below(5) as u32, rng.below(1000) as i64));
        }
    }
    Corpus { ratings, titles }
}

fn write(dir: &Path, c: &Corpus, extra: &[&str]) -> (std::path::PathBuf, std::path::PathBuf) {
    let r = dir.join("ratings.dat");
    let m = dir.join("movies.dat");
    let mut text: String = c.ratings.iter().map(|(u, i, s, t)| format!("{u}::{i}::{s}::{t}\n")).collect();
    for e in extra {
        text.push_str(e);
        text.push('\n');
    }
    std::fs::write(&r, text).unwrap();
    let movies: String = c.titles.iter().map(|(id, t)| format!("{id}::{t}::Drama\n")).collect();
    std::fs::write(&m, movies).unwrap();
    (r, m)
}

#[test]
fn ingest_matches_independent_recount() {
    let c = corpus();
    let dir = tempfile::tempdir().unwrap();
    let (r, m) = write(dir.path(), &c, &["not a rating line"]);
    let opts = IngestOptions {
        min_item_interactions: 3,
        min_user_interactions: 4,
        ..IngestOptions::default()
    };
    let got = ingest_movielens(&r, &m, None, &opts).unwrap();
    assert_eq!(got.stats.malformed_lines, 1);

    // Item filter then user filter, computed from scratch.
    let mut item_n: HashMap<u64, usize> = HashMap::new();
    for &(_, i, _, _) in &c.ratings {
        *item_n.entry(i).or_default() += 1;
    }
    let after_items: Vec<_> = c.ratings.iter().filter(|r| item_n[&r.1] >= 3).collect();
    let mut user_n: HashMap<u64, usize> = HashMap::new();
    for r in &after_items {
        *user_n.entry(r.0).or_default() += 1;
    }
    let kept: Vec<_> = after_items.into_iter().filter(|r| user_n[&r.0] >= 4).collect();
    let items: BTreeSet<u64> = kept.iter().map(|r| r.1).collect();
    let users: BTreeSet<u64> = kept.iter().map(|r| r.0).collect();

    assert_eq!(got.catalog.len(), items.len());
    assert_eq!(got.sequences.len(), users.len());
    let dense: HashMap<u64, u32> = items.iter().enumerate().map(|(k, &v)| (v, k as u32 + 1)).collect();
    for (seq, &uid) in got.sequences.iter().zip(&users) {
        assert_eq!(seq.user.source_id, uid);
        let mut mine: Vec<_> = kept.iter().enumerate().filter(|(_, r)| r.0 == uid).collect();
        mine.sort_by_key(|(k, r)| (r.3, *k));
        let expect: Vec<u32> = mine.iter().map(|(_, r)| dense[&r.1]).collect();
        assert_eq!(seq.items, expect);
        let expect_r: Vec<f64> = mine.iter().map(|(_, r)| r.2 as f64).collect();
        assert_eq!(seq.ratings, expect_r);
    }
    for (&src, &id) in &dense {
        assert_eq!(got.catalog.title(id), Some(c.titles[&src].as_str()));
    }
}

#[test]
fn transitions_chain_and_partition() {
    let c = corpus();
    let dir = tempfile::tempdir().unwrap();
    let (r, m) = write(dir.path(), &c, &[]);
    let opts = IngestOptions {
        min_item_interactions: 1,
        min_user_interactions: 1,
        ..IngestOptions::default()
    };
    let got = ingest_movielens(&r, &m, None, &opts).unwrap();
    let ds = build_transitions(&got.sequences, got.catalog.len(), &TransitionOptions::default());
    ds.validate().unwrap();
    for (u, seq) in got.sequences.iter().enumerate() {
        let ts: Vec<&Transition> = ds.transitions.iter().filter(|t| t.user == u as u32).collect();
        let expect_len = if seq.items.len() > 5 { seq.items.len() - 5 } else { seq.items.len() - 1 };
        assert_eq!(ts.len(), expect_len, "user {u}");
        for pair in ts.windows(2) {
            assert_eq!(pair[0].next_window, pair[1].window);
            assert!(!pair[0].terminal);
        }
        if let Some(last) = ts.last() {
            assert!(last.terminal);
        }
        for t in &ts {
            assert_eq!(t.next_window, shift_append(&t.window, t.action));
        }
        let n_eval = (0.2 * ts.len() as f64).round() as usize;
        let first_eval = ts.len() - n_eval;
        for (k, t) in ts.iter().enumerate() {
            assert_eq!(t.split == Split::Eval, k >= first_eval);
        }
    }
    let (tr, ev) = ds.split_counts();
    assert_eq!(tr + ev, ds.transitions.len());
    let text = ds.to_tsv();
    let back = OfflineDataset::from_tsv(&text, got.catalog.len(), "mem").unwrap();
    assert_eq!(back.to_tsv(), text);
    for (a, b) in back.transitions.iter().zip(&ds.transitions) {
        assert_eq!(Transition { user: b.user, ..a.clone() }, *b);
    }
}

#[test]
fn gender_skew_keeps_only_tagged_users() {
    let dir = tempfile::tempdir().unwrap();
    let mut ratings = String::new();
    for u in 1..=5 {
        for (k, item) in [1, 2, 3, 1, 2, 3, 2, 1, 3, 2].iter().enumerate() {
            ratings.push_str(&format!("{u}::{item}::{}::{}\n", 1 + (u + k) % 5, k));
        }
    }
    let r = dir.path().join("ratings.dat");
    let m = dir.path().join("movies.dat");
    let us = dir.path().join("users.dat");
    std::fs::write(&r, ratings).unwrap();
    std::fs::write(&m, "1::A (1990)::Drama\n2::B (1991)::Drama\n3::C (1992)::Drama\n").unwrap();
    std::fs::write(&us, "1::M::25::1::111\n2::F::18::2::222\n3::M::35::3::333\n4::F::45::4::444\n5::M::56::5::555\n").unwrap();
    let got = ingest_movielens(&r, &m, Some(&us), &IngestOptions::default()).unwrap();
    let ds = build_transitions(&got.sequences, got.catalog.len(), &TransitionOptions::default());
    let male = ds.skewed_subset(|u| u.gender == Some('M')).unwrap();
    let kept: BTreeSet<u64> = male.train().map(|t| male.users[t.user as usize].source_id).collect();
    assert_eq!(kept, [1, 3, 5].into_iter().collect());
    // Five transitions per user (10 items), one of them eval; evaluation is
    // shared across skewed and full datasets.
    let (tr, ev) = male.split_counts();
    assert_eq!((tr, ev), (12, 5));
    assert_eq!(male.eval_transitions(), ds.eval_transitions());
    assert!(ds.skewed_subset(|u| u.age == Some(99)).is_err());
}

#[test]
fn novel_items_are_the_lower_half() {
    for n in [1usize, 2, 7, 50, 51] {
        let mut rng = SeededRng::new(n as u64);
        let counts: Vec<u64> = (0..n).map(|_| rng.below(20) as u64).collect();
        let novel = popularity_split(&counts);
        assert_eq!(novel.len(), n / 2);
        let head_min = (1..=n as u32).filter(|i| !novel.contains(i)).map(|i| counts[i as usize - 1]).min();
        let tail_max = novel.iter().map(|&i| counts[i as usize - 1]).max();
        if let (Some(h), Some(t)) = (head_min, tail_max) {
            assert!(t <= h);
        }
    }
}

#[test]
fn synthetic_log_follows_its_mdp() {
    let cfg = SyntheticConfig {
        samples: 20_000,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let mdp = &data.mdp;
    mdp.validate().unwrap();
    assert_eq!(data.dataset.transitions.len(), cfg.samples);
    let index = mdp.state_index();
    let mut visits = vec![0usize; mdp.states()];
    let mut picks = vec![vec![0usize; mdp.actions()]; mdp.states()];
    for t in &data.dataset.transitions {
        let s = index[&t.window];
        let a = t.action as usize - 1;
        assert_eq!(t.reward, mdp.reward[s][a]);
        assert!(mdp.behavior[s][a] > 0.0, "logged action outside the behaviour support");
        assert!(index.contains_key(&t.next_window));
        visits[s] += 1;
        picks[s][a] += 1;
    }
    let mut worst: f64 = 0.0;
    for s in 0..mdp.states() {
        if visits[s] < 500 {
            continue;
        }
        for a in 0..mdp.actions() {
            let p = mdp.behavior[s][a];
            let freq = picks[s][a] as f64 / visits[s] as f64;
            let sd = (p * (1.0 - p) / visits[s] as f64).sqrt();
            worst = worst.max((freq - p).abs() / sd.max(1e-12));
        }
    }
    assert!(worst < 5.0, "action frequency {worst} standard deviations away");
    let novel = popularity_split(&data.dataset.train_counts());
    assert_eq!(novel.len(), cfg.items / 2);
    let fresh: BTreeSet<u32> = cfg.good_ids().chain(cfg.bad_ids()).collect();
    assert!(fresh.is_subset(&novel));
}
