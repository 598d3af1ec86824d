use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn laac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laac")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = laac(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = "[train]\nsteps = 15\nbatch_size = 8\nembed_dim = 4\nhidden_dim = 6\n\n[synthetic]\nsamples = 300\nepisode_length = 30\n";

fn synth(dir: &Path) -> PathBuf {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let data = dir.join("data");
    ok(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    data
}

fn toy_movielens(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    // Users 1..=4 rate items 10, 20, 30; user 5 rates only item 40, which has
    // two ratings in total and is dropped with user 5.
    let mut ratings = String::new();
    for u in 1..=4 {
        for (k, item) in [10, 20, 30, 10, 20, 30, 20].iter().enumerate() {
            ratings.push_str(&format!("{u}::{item}::{}::{}\n", 1 + (u + k) % 5, 100 * k + u));
        }
    }
    ratings.push_str("5::40::4::1\n5::40::5::2\n");
    let r = dir.join("ratings.dat");
    let m = dir.join("movies.dat");
    let us = dir.join("users.dat");
    std::fs::write(&r, ratings).unwrap();
    std::fs::write(&m, "10::Alpha (1990)::Drama\n20::Beta (1991)::Comedy\n30::Gamma (1992)::Drama\n40::Delta (1993)::Horror\n").unwrap();
    std::fs::write(&us, "1::F::25::1::1\n2::M::25::1::1\n3::F::25::1::1\n4::M::25::1::1\n5::M::25::1::1\n").unwrap();
    (r, m, us)
}

#[test]
fn ingest_counts_match_hand_count_and_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (r, m, u) = toy_movielens(dir.path());
    let out1 = dir.path().join("a");
    let printed = ok(&["ingest", "--ratings", s(&r), "--movies", s(&m), "--users", s(&u), "--out", s(&out1)]);
    // 4 users x 7 ratings: 2 transitions each, round(0.4) = 0 of them eval.
    for line in ["users 4", "items 3", "transitions 8", "train 8", "eval 0"] {
        assert!(printed.lines().any(|l| l == line), "missing `{line}` in\n{printed}");
    }
    let out2 = dir.path().join("b");
    ok(&["ingest", "--ratings", s(&r), "--movies", s(&m), "--users", s(&u), "--out", s(&out2)]);
    for f in ["transitions.tsv", "catalog.json"] {
        assert_eq!(std::fs::read(out1.join(f)).unwrap(), std::fs::read(out2.join(f)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest_ingest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
    let skew = dir.path().join("f");
    let printed = ok(&[
        "ingest", "--ratings", s(&r), "--movies", s(&m), "--users", s(&u), "--out", s(&skew), "--keep-gender", "F",
    ]);
    assert!(printed.lines().any(|l| l == "train 4"), "{printed}");
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (r, _, _) = toy_movielens(dir.path());
    let out = laac(&["ingest", "--ratings", s(&r), "--movies", "/nonexistent/movies.dat", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("movies"));
    assert_eq!(laac(&["train", "--bogus"]).status.code(), Some(2));
}

#[test]
fn bad_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = 0.1\n").unwrap();
    let out = laac(&[
        "train", "--transitions", s(&data.join("transitions.tsv")), "--catalog", s(&data.join("catalog.json")),
        "--cache", s(&data.join("cache.jsonl")), "--config", s(&cfg), "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn laac_without_cache_and_live_without_endpoint_give_guidance() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let t = data.join("transitions.tsv");
    let c = data.join("catalog.json");
    let out = laac(&["train", "--transitions", s(&t), "--catalog", s(&c), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("build-cache"));
    let out = Command::new(env!("CARGO_BIN_EXE_laac"))
        .args(["build-cache", "--transitions", s(&t), "--catalog", s(&c), "--provider", "live"])
        .args(["--cache", s(&dir.path().join("live.jsonl"))])
        .env_remove("LAAC_LLM_ENDPOINT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LAAC_LLM_ENDPOINT"));
}

#[test]
fn stub_cache_resumes_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let t = data.join("transitions.tsv");
    let c = data.join("catalog.json");
    let cache = dir.path().join("stub.jsonl");
    let args = ["build-cache", "--transitions", s(&t), "--catalog", s(&c), "--provider", "stub", "--cache", s(&cache), "--n-c", "20"];
    let first = ok(&args);
    assert!(first.contains("resumed 0"), "{first}");
    let bytes = std::fs::read(&cache).unwrap();
    let second = ok(&args);
    assert!(second.contains("ok 0"), "{second}");
    assert_eq!(std::fs::read(&cache).unwrap(), bytes);
    let replayed = dir.path().join("replay.jsonl");
    ok(&[
        "build-cache", "--transitions", s(&t), "--catalog", s(&c), "--provider", "cache", "--replay", s(&cache),
        "--cache", s(&replayed), "--n-c", "20",
    ]);
    let a = laac_cli::pipeline::load_reference(&cache, 50).unwrap().0;
    let b = laac_cli::pipeline::load_reference(&replayed, 50).unwrap().0;
    assert_eq!(a, b);
    for (_, sug) in a.entries() {
        assert_eq!(sug.suggestions, sug.candidates[..10].to_vec());
    }
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let cfg = dir.path().join("tiny.toml");
    let common = |v: &str, out: &Path| -> Vec<String> {
        [
            "train", "--variant", v, "--transitions", s(&data.join("transitions.tsv")),
            "--catalog", s(&data.join("catalog.json")), "--cache", s(&data.join("cache.jsonl")),
            "--config", s(&cfg), "--seed", "3", "--out", s(out),
        ]
        .map(String::from)
        .to_vec()
    };
    let run = |v: &str, out: &Path| ok(&common(v, out).iter().map(String::as_str).collect::<Vec<_>>());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run("laac", &a);
    run("laac", &b);
    run("baseline", &a);
    for f in ["train_log_laac_seed3.csv", "laac_seed3.ckpt.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let log = std::fs::read_to_string(a.join("train_log_laac_seed3.csv")).unwrap();
    assert_eq!(log.lines().count(), 16);

    let eval = |out: &Path| {
        ok(&[
            "eval", "--checkpoint", s(&a.join("laac_seed3.ckpt.json")), "--checkpoint", s(&a.join("baseline_seed3.ckpt.json")),
            "--transitions", s(&data.join("transitions.tsv")), "--catalog", s(&data.join("catalog.json")),
            "--cache", s(&data.join("cache.jsonl")), "--truth", s(&data.join("truth.json")), "--out", s(out),
        ])
    };
    let e1 = dir.path().join("e1");
    let e2 = dir.path().join("e2");
    let table = eval(&e1);
    eval(&e2);
    assert_eq!(table.lines().count(), 4, "{table}");
    for f in ["metrics_seed0_laac_seed3.csv", "metrics_seed0_baseline_seed3.json", "metrics_seed0_reference.csv", "comparison.csv"] {
        assert_eq!(std::fs::read(e1.join(f)).unwrap(), std::fs::read(e2.join(f)).unwrap(), "{f}");
    }

    // A checkpoint trained on another catalog is refused.
    let other = dir.path().join("other");
    let cfg2 = dir.path().join("other.toml");
    std::fs::write(&cfg2, format!("{TINY}items = 40\n")).unwrap();
    ok(&["synth", "--config", s(&cfg2), "--out", s(&other)]);
    let out = laac(&[
        "eval", "--checkpoint", s(&a.join("laac_seed3.ckpt.json")), "--transitions", s(&other.join("transitions.tsv")),
        "--catalog", s(&other.join("catalog.json")), "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catalog hash mismatch"));
}

#[test]
fn untrained_uniform_policy_has_log_items_entropy() {
    use laac_core::autodiff::{Parameterized, SeededRng};
    use laac_core::model::{Checkpoint, NetworkDims, PolicyNetwork, Variant};
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let catalog = laac_cli::pipeline::load_catalog(&data.join("catalog.json")).unwrap();
    let mut actor = PolicyNetwork::new(NetworkDims::new(catalog.len(), 4, 4), &mut SeededRng::new(0));
    for p in actor.params_mut() {
        p.value.data_mut().iter_mut().for_each(|x| *x = 0.0);
    }
    let ck = dir.path().join("uniform.ckpt.json");
    Checkpoint::new(Variant::Baseline, catalog.hash(), actor, None).write(&ck).unwrap();
    let out = dir.path().join("e");
    ok(&[
        "eval", "--checkpoint", s(&ck), "--transitions", s(&data.join("transitions.tsv")),
        "--catalog", s(&data.join("catalog.json")), "--out", s(&out),
    ]);
    let r = laac_core::metrics::MetricsReport::from_csv(&std::fs::read_to_string(out.join("metrics_seed0_uniform.csv")).unwrap()).unwrap();
    assert!((r.entropy - (catalog.len() as f64).ln()).abs() < 1e-6);
}

#[test]
fn sweep_groups_and_matches_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let cfg = dir.path().join("tiny.toml");
    let data_args = |v: &mut Vec<String>| {
        for (k, f) in [("--transitions", "transitions.tsv"), ("--catalog", "catalog.json"), ("--cache", "cache.jsonl"), ("--truth", "truth.json")] {
            v.push(k.into());
            v.push(s(&data.join(f)).into());
        }
        v.push("--config".into());
        v.push(s(&cfg).into());
    };
    let sw = dir.path().join("sweep");
    let mut args: Vec<String> = ["sweep", "--param", "alpha", "--values", "0,1,3,5,10", "--seeds", "1..2", "--out", s(&sw)]
        .map(String::from)
        .to_vec();
    data_args(&mut args);
    let printed = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = std::fs::read_to_string(sw.join("sweep_alpha.csv")).unwrap();
    assert_eq!(printed, csv);
    let values: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(values.len(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",2")));

    // One value and one seed equals train followed by eval.
    let one = dir.path().join("one");
    let mut args: Vec<String> = ["sweep", "--param", "beta", "--values", "1", "--seeds", "4", "--out", s(&one)].map(String::from).to_vec();
    data_args(&mut args);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let tr = dir.path().join("tr");
    let mut args: Vec<String> = ["train", "--seed", "4", "--out", s(&tr)].map(String::from).to_vec();
    data_args(&mut args);
    let truth_at = args.iter().position(|a| a == "--truth").unwrap();
    args.drain(truth_at..truth_at + 2);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let ev = dir.path().join("ev");
    let mut args: Vec<String> =
        ["eval", "--checkpoint", s(&tr.join("laac_seed4.ckpt.json")), "--seed", "4", "--out", s(&ev)].map(String::from).to_vec();
    data_args(&mut args);
    let cfg_at = args.iter().position(|a| a == "--config").unwrap();
    args.drain(cfg_at..cfg_at + 2);
    let cache_at = args.iter().position(|a| a == "--cache").unwrap();
    args.drain(cache_at..cache_at + 2);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(
        std::fs::read(one.join("metrics_seed4_beta1.csv")).unwrap(),
        std::fs::read(ev.join("metrics_seed4_laac_seed4.csv")).unwrap()
    );

    let mut args: Vec<String> = ["sweep", "--param", "alpha", "--values", "", "--out", s(&sw)].map(String::from).to_vec();
    data_args(&mut args);
    assert_eq!(laac(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.code(), Some(2));
}
