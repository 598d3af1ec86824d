//! File loading and the train/evaluate composition shared by commands.

use std::path::Path;

use anyhow::Context;
use laac_core::data::{popularity_split, OfflineDataset, SyntheticMDP};
use laac_core::engine::{train_laac, train_supervised_baseline, BaselineOutput, LaacConfig, LaacOutput};
use laac_core::metrics::{evaluate_policy, MetricsReport, ObservedRatings};
use laac_core::model::{Checkpoint, ItemCatalog, PolicyNetwork, Variant};
use laac_core::par::ExecMode;
use laac_core::reference::{read_cache, table_from_records, ReferencePolicyTable};

use crate::UsageError;

/// Fails with a usage error when an input file does not exist.
pub fn require(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("{what} file not found: {}", path.display())).into());
    }
    Ok(())
}

pub fn load_catalog(path: &Path) -> anyhow::Result<ItemCatalog> {
    require(path, "catalog")?;
    Ok(ItemCatalog::read(path)?)
}

pub fn load_dataset(path: &Path, item_count: usize) -> anyhow::Result<OfflineDataset> {
    require(path, "transitions")?;
    Ok(OfflineDataset::read_tsv(path, item_count)?)
}

pub fn load_truth(path: &Path) -> anyhow::Result<SyntheticMDP> {
    require(path, "truth")?;
    let text = std::fs::read_to_string(path)?;
    let mdp: SyntheticMDP = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    mdp.validate()?;
    Ok(mdp)
}

/// Reference table and template hash from a cache file. Candidate count and
/// seed are read from the records themselves.
pub fn load_reference(path: &Path, item_count: usize) -> anyhow::Result<(ReferencePolicyTable, String)> {
    require(path, "cache")?;
    let records = read_cache(path)?;
    let first = records
        .first()
        .ok_or_else(|| UsageError(format!("cache {} holds no records", path.display())))?;
    let template = first.template_hash.clone();
    let (table, stats) =
        table_from_records(&records, item_count, first.candidate_ids.len(), first.candidate_seed, &template)?;
    log::info!("reference table: {} states, {} unmatched, {} failed", stats.states, stats.unmatched, stats.failed);
    Ok((table, template))
}

/// Everything a training or evaluation run reads.
pub struct Inputs {
    pub dataset: OfflineDataset,
    pub catalog: ItemCatalog,
    pub reference: Option<ReferencePolicyTable>,
    pub template_hash: Option<String>,
    pub truth: Option<SyntheticMDP>,
}

impl Inputs {
    pub fn load(transitions: &Path, catalog: &Path, cache: Option<&Path>, truth: Option<&Path>) -> anyhow::Result<Self> {
        let catalog = load_catalog(catalog)?;
        let dataset = load_dataset(transitions, catalog.len())?;
        let (reference, template_hash) = match cache {
            Some(p) => {
                let (t, h) = load_reference(p, catalog.len())?;
                (Some(t), Some(h))
            }
            None => (None, None),
        };
        let truth = truth.map(load_truth).transpose()?;
        Ok(Self {
            dataset,
            catalog,
            reference,
            template_hash,
            truth,
        })
    }
}

pub enum Trained {
    Laac(LaacOutput),
    Baseline(BaselineOutput),
}

impl Trained {
    pub fn actor(&self) -> &PolicyNetwork {
        match self {
            Trained::Laac(o) => &o.actor,
            Trained::Baseline(o) => &o.actor,
        }
    }

    pub fn checkpoint(&self, catalog_hash: String) -> Checkpoint {
        match self {
            Trained::Laac(o) => Checkpoint::new(Variant::Laac, catalog_hash, o.actor.clone(), Some(o.critics.clone())),
            Trained::Baseline(o) => Checkpoint::new(Variant::Baseline, catalog_hash, o.actor.clone(), None),
        }
    }

    /// The training log as CSV; the baseline logs one cross-entropy per step.
    pub fn log_csv(&self) -> String {
        match self {
            Trained::Laac(o) => o.log.to_csv(),
            Trained::Baseline(o) => {
                let mut s = String::from("step,cross_entropy\n");
                for (i, l) in o.losses.iter().enumerate() {
                    s.push_str(&format!("{i},{l}\n"));
                }
                s
            }
        }
    }
}

pub fn train(variant: Variant, inputs: &Inputs, config: &LaacConfig) -> anyhow::Result<Trained> {
    let train = inputs.dataset.train_transitions();
    Ok(match variant {
        Variant::Laac => {
            let reference = inputs.reference.as_ref().ok_or_else(|| {
                UsageError("the laac variant needs a reference cache; build one with `laac build-cache` and pass --cache".into())
            })?;
            Trained::Laac(train_laac(&train, reference, config)?)
        }
        Variant::Baseline => Trained::Baseline(train_supervised_baseline(&train, inputs.catalog.len(), config)?),
    })
}

/// Scores a policy on the evaluation split. Rewards come from the ground
/// truth MDP when one is loaded, otherwise from ratings observed in the
/// evaluation split.
pub fn evaluate(actor: &PolicyNetwork, inputs: &Inputs, seed: u64, mode: ExecMode) -> anyhow::Result<MetricsReport> {
    let eval = inputs.dataset.eval_transitions();
    let novel = popularity_split(&inputs.dataset.train_counts());
    let report = match &inputs.truth {
        Some(mdp) => evaluate_policy(actor, &eval, &novel, mdp, seed, mode)?,
        None => evaluate_policy(actor, &eval, &novel, &ObservedRatings::new(&eval), seed, mode)?,
    };
    Ok(report)
}

pub fn train_and_evaluate(variant: Variant, inputs: &Inputs, config: &LaacConfig, mode: ExecMode) -> anyhow::Result<MetricsReport> {
    let trained = train(variant, inputs, config)?;
    evaluate(trained.actor(), inputs, config.seed, mode)
}
