use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use laac_core::data::{build_transitions, generate_synthetic, ingest_movielens, IngestOptions, TransitionOptions};
use laac_core::metrics::{report_from_distributions, sweep_csv, sweep_rows, MetricsReport, ObservedRatings, REPORT_COLUMNS};
use laac_core::model::{state_key, Checkpoint, Variant, Window};
use laac_core::par::{self, ExecMode};
use laac_core::reference::{
    build_cache, template_hash, write_cache, CacheBuildOptions, LiveConfig, LiveProvider, Provider, ProviderRecord,
    RecordStatus, ReplayProvider, StubProvider,
};

use crate::args::*;
use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;
use crate::pipeline::{self, evaluate, require, train_and_evaluate, Inputs};
use crate::UsageError;

pub const SWEEP_METRICS: [&str; 6] = ["r_10", "ncv_10", "hr_10", "ndcg_10", "cv_10", "entropy"];

fn out_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn ingest(args: &IngestArgs) -> anyhow::Result<()> {
    require(&args.ratings, "ratings")?;
    require(&args.movies, "movies")?;
    if let Some(u) = &args.users {
        require(u, "users")?;
    }
    if args.keep_gender.is_some() && args.users.is_none() {
        return Err(UsageError("--keep-gender needs --users".into()).into());
    }
    out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("ingest");
    let opts = IngestOptions {
        min_item_interactions: args.min_item_interactions,
        min_user_interactions: args.min_user_interactions,
        user_sample: args.user_sample,
        sample_seed: args.seed,
    };
    let ingested = ingest_movielens(&args.ratings, &args.movies, args.users.as_deref(), &opts)?;
    let mut catalog = ingested.catalog;
    let mut dataset = build_transitions(&ingested.sequences, catalog.len(), &TransitionOptions::default());
    if let Some(g) = args.keep_gender {
        let g = g.to_ascii_uppercase();
        dataset = dataset.skewed_subset(|u| u.gender == Some(g))?;
    }
    catalog.set_counts(&dataset.train_counts())?;
    let (train, eval) = dataset.split_counts();
    println!("users {}", ingested.sequences.len());
    println!("items {}", catalog.len());
    println!("transitions {}", dataset.transitions.len());
    println!("train {train}");
    println!("eval {eval}");
    println!("malformed_lines {}", ingested.stats.malformed_lines);
    let t = args.out.join("transitions.tsv");
    let c = args.out.join("catalog.json");
    dataset.write_tsv(&t)?;
    catalog.write(&c)?;
    manifest.dataset_hash(dataset.hash()).seed(args.seed).artifact(t).artifact(c);
    manifest.finish(&args.out, "ingest")?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.synthetic.seed = s;
    }
    out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("synth");
    let data = generate_synthetic(&cfg.synthetic)?;
    let hash = template_hash();
    let records: Vec<ProviderRecord> = data
        .reference
        .entries()
        .iter()
        .map(|(w, s)| ProviderRecord {
            state_key: state_key(w),
            candidate_ids: s.candidates.clone(),
            parsed_ids: s.suggestions.clone(),
            provider: "synthetic".into(),
            template_hash: hash.clone(),
            raw_response: s
                .suggestions
                .iter()
                .map(|&id| data.catalog.title(id).unwrap_or_default())
                .collect::<Vec<_>>()
                .join("\n"),
            timestamp: 0,
            status: RecordStatus::Ok,
            candidate_seed: data.reference.seed(),
            error: None,
        })
        .collect();
    let paths = [
        args.out.join("transitions.tsv"),
        args.out.join("catalog.json"),
        args.out.join("cache.jsonl"),
        args.out.join("truth.json"),
    ];
    data.dataset.write_tsv(&paths[0])?;
    data.catalog.write(&paths[1])?;
    write_cache(&paths[2], &records)?;
    std::fs::write(&paths[3], serde_json::to_string(&data.mdp)? + "\n")?;
    let (train, eval) = data.dataset.split_counts();
    println!("states {} items {} train {train} eval {eval}", data.mdp.states(), data.mdp.actions());
    manifest
        .config_hash(cfg.hash())
        .dataset_hash(data.dataset.hash())
        .template_hash(Some(hash))
        .seed(cfg.synthetic.seed);
    for p in paths {
        manifest.artifact(p);
    }
    manifest.finish(&args.out, "synth")?;
    Ok(())
}

pub fn build_cache_cmd(args: &BuildCacheArgs) -> anyhow::Result<()> {
    let catalog = pipeline::load_catalog(&args.catalog)?;
    let dataset = pipeline::load_dataset(&args.transitions, catalog.len())?;
    if args.n_c == 0 || args.n_r == 0 || args.n_r > args.n_c {
        return Err(UsageError(format!("need 1 <= n_r <= n_c, got n_r {} n_c {}", args.n_r, args.n_c)).into());
    }
    let provider: Box<dyn Provider> = match args.provider {
        ProviderKind::Stub => Box::new(StubProvider),
        ProviderKind::Live => Box::new(LiveProvider::new(LiveConfig::from_env()?)),
        ProviderKind::Cache => {
            let replay = args
                .replay
                .as_ref()
                .ok_or_else(|| UsageError("--provider cache needs --replay <earlier cache>".into()))?;
            require(replay, "replay cache")?;
            Box::new(ReplayProvider::from_cache(replay)?)
        }
    };
    if let Some(dir) = args.cache.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    let mut manifest = ManifestBuilder::new("build-cache");
    let states: Vec<Window> = dataset.train().map(|t| t.window).collect::<BTreeSet<_>>().into_iter().collect();
    let opts = CacheBuildOptions {
        n_c: args.n_c,
        n_r: args.n_r,
        seed: args.seed,
        workers: args.workers.max(1),
        requests_per_second: args.requests_per_second,
    };
    let summary = build_cache(&states, &catalog, provider.as_ref(), &args.cache, &opts)?;
    println!(
        "states {} resumed {} ok {} unmatched {} failed {}",
        summary.requested, summary.resumed, summary.ok, summary.unmatched, summary.failed
    );
    manifest
        .dataset_hash(dataset.hash())
        .template_hash(Some(template_hash()))
        .seed(args.seed)
        .artifact(&args.cache);
    let dir = args.cache.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    manifest.finish(dir, "build_cache")?;
    if summary.failed > 0 {
        anyhow::bail!("{} states failed; rerun to retry them", summary.failed);
    }
    Ok(())
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Laac => Variant::Laac,
        VariantArg::Baseline => Variant::Baseline,
    }
}

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    let variant = variant(args.variant);
    if variant == Variant::Laac && args.data.cache.is_none() {
        return Err(UsageError(
            "the laac variant needs a reference cache; build one with `laac build-cache` and pass --cache".into(),
        )
        .into());
    }
    let inputs = Inputs::load(&args.data.transitions, &args.data.catalog, args.data.cache.as_deref(), None)?;
    out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("train");
    let trained = pipeline::train(variant, &inputs, &cfg.train)?;
    let stem = format!("{variant}_seed{}", cfg.train.seed);
    let ck = args.out.join(format!("{stem}.ckpt.json"));
    let log = args.out.join(format!("train_log_{stem}.csv"));
    trained.checkpoint(inputs.catalog.hash()).write(&ck)?;
    std::fs::write(&log, trained.log_csv())?;
    println!("wrote {}", ck.display());
    manifest
        .config_hash(cfg.train.hash())
        .dataset_hash(inputs.dataset.hash())
        .template_hash(inputs.template_hash.clone())
        .seed(cfg.train.seed)
        .artifact(ck)
        .artifact(log);
    manifest.finish(&args.out, &format!("train_{stem}"))?;
    Ok(())
}

fn comparison_table(rows: &[(String, MetricsReport)]) -> String {
    let mut out = format!("policy,{}\n", REPORT_COLUMNS.join(","));
    for (tag, r) in rows {
        let line = r.to_csv();
        let values = line.lines().nth(1).unwrap_or_default();
        let _ = writeln!(out, "{tag},{values}");
    }
    out
}

fn checkpoint_tag(path: &Path) -> String {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    name.trim_end_matches(".json").trim_end_matches(".ckpt").to_string()
}

pub fn eval(args: &EvalArgs, mode: ExecMode) -> anyhow::Result<()> {
    let inputs = Inputs::load(
        &args.data.transitions,
        &args.data.catalog,
        args.data.cache.as_deref(),
        args.data.truth.as_deref(),
    )?;
    out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("eval");
    let mut rows = Vec::new();
    for path in &args.checkpoint {
        require(path, "checkpoint")?;
        let ck = Checkpoint::read(path)?;
        ck.check_catalog(&inputs.catalog.hash())
            .with_context(|| format!("refusing {}", path.display()))?;
        rows.push((checkpoint_tag(path), evaluate(&ck.actor, &inputs, args.seed, mode)?));
    }
    if let Some(table) = &inputs.reference {
        let eval = inputs.dataset.eval_transitions();
        let dists = par::try_map(mode, &eval, |t| table.policy_or_fallback(&t.window))?;
        let novel = laac_core::data::popularity_split(&inputs.dataset.train_counts());
        let report = match &inputs.truth {
            Some(mdp) => report_from_distributions(&dists, &eval, &novel, mdp, args.seed, mode)?,
            None => report_from_distributions(&dists, &eval, &novel, &ObservedRatings::new(&eval), args.seed, mode)?,
        };
        rows.push(("reference".into(), report));
    }
    for (tag, r) in &rows {
        let (csv, json) = r.emit(&args.out, tag)?;
        manifest.artifact(csv).artifact(json);
    }
    let table = comparison_table(&rows);
    print!("{table}");
    if rows.len() > 1 {
        let p = args.out.join("comparison.csv");
        std::fs::write(&p, &table)?;
        manifest.artifact(p);
    }
    manifest
        .dataset_hash(inputs.dataset.hash())
        .template_hash(inputs.template_hash.clone())
        .seed(args.seed);
    manifest.finish(&args.out, &format!("eval_seed{}", args.seed))?;
    Ok(())
}

/// Parses `1,2,3` or an inclusive range `1..10`.
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let bad = || UsageError(format!("cannot parse seeds `{text}`"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad().into());
    }
    Ok(seeds)
}

pub fn parse_values(text: &str) -> anyhow::Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| UsageError(format!("cannot parse value `{s}`"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(UsageError("--values is empty".into()).into());
    }
    Ok(values)
}

pub fn sweep(args: &SweepArgs, mode: ExecMode) -> anyhow::Result<()> {
    let values = parse_values(&args.values)?;
    let seeds = parse_seeds(&args.seeds)?;
    let cfg = RunConfig::load(args.config.as_deref())?;
    if args.data.cache.is_none() {
        return Err(UsageError("sweeps train LAAC and need --cache".into()).into());
    }
    let inputs = Inputs::load(
        &args.data.transitions,
        &args.data.catalog,
        args.data.cache.as_deref(),
        args.data.truth.as_deref(),
    )?;
    out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("sweep");
    let jobs: Vec<(f64, u64)> = values.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let reports = par::try_map(mode, &jobs, |&(v, s)| {
        let mut c = cfg.train.clone();
        match args.param {
            SweepParam::Alpha => c.alpha = v,
            SweepParam::Beta => c.beta = v,
        }
        c.seed = s;
        train_and_evaluate(Variant::Laac, &inputs, &c, ExecMode::Sequential)
    })?;
    let name = args.param.as_str();
    let mut grouped: Vec<(f64, Vec<MetricsReport>)> = values.iter().map(|&v| (v, Vec::new())).collect();
    for ((v, _), r) in jobs.iter().zip(reports) {
        let (csv, json) = r.emit(&args.out, &format!("{name}{v}"))?;
        manifest.artifact(csv).artifact(json);
        if let Some(g) = grouped.iter_mut().find(|g| g.0 == *v) {
            g.1.push(r);
        }
    }
    let rows = sweep_rows(name, &grouped, &SWEEP_METRICS);
    let path: PathBuf = args.out.join(format!("sweep_{name}.csv"));
    let text = sweep_csv(&rows);
    std::fs::write(&path, &text)?;
    print!("{text}");
    manifest
        .config_hash(cfg.train.hash())
        .dataset_hash(inputs.dataset.hash())
        .template_hash(inputs.template_hash.clone())
        .artifact(path);
    manifest.finish(&args.out, &format!("sweep_{name}"))?;
    Ok(())
}
