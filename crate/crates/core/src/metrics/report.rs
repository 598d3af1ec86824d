use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Transition;
use crate::error::{Error, Result};
use crate::metrics::ranking::{
    coverage, cumulative_reward, hit_ratio, ndcg, novel_count, novel_coverage, policy_entropy, top_k, RatingLookup,
};
use crate::model::{PolicyNetwork, Window};
use crate::par::{self, ExecMode};

/// Every evaluation metric for one policy, in report column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hr_5: f64,
    pub hr_10: f64,
    pub hr_20: f64,
    pub ndcg_5: f64,
    pub ndcg_10: f64,
    pub ndcg_20: f64,
    pub r_5: f64,
    pub r_10: f64,
    pub r_20: f64,
    pub cv_10: f64,
    pub cv_20: f64,
    pub ncv_10: f64,
    pub ncv_20: f64,
    pub nc_1: usize,
    pub entropy: f64,
    pub samples: usize,
    pub seed: u64,
}

pub const REPORT_COLUMNS: [&str; 17] = [
    "hr_5", "hr_10", "hr_20", "ndcg_5", "ndcg_10", "ndcg_20", "r_5", "r_10", "r_20", "cv_10", "cv_20", "ncv_10",
    "ncv_20", "nc_1", "entropy", "samples", "seed",
];

const MAX_K: usize = 20;

impl MetricsReport {
    fn values(&self) -> Vec<String> {
        let f = |x: f64| x.to_string();
        vec![
            f(self.hr_5),
            f(self.hr_10),
            f(self.hr_20),
            f(self.ndcg_5),
            f(self.ndcg_10),
            f(self.ndcg_20),
            f(self.r_5),
            f(self.r_10),
            f(self.r_20),
            f(self.cv_10),
            f(self.cv_20),
            f(self.ncv_10),
            f(self.ncv_20),
            self.nc_1.to_string(),
            f(self.entropy),
            self.samples.to_string(),
            self.seed.to_string(),
        ]
    }

    /// Named numeric metrics, for sweeps and comparison tables.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let i = REPORT_COLUMNS.iter().position(|c| *c == name)?;
        self.values()[i].parse().ok()
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", REPORT_COLUMNS.join(","), self.values().join(","))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            path: "report".into(),
            line: 2,
            message: m,
        };
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_COLUMNS.join(",").as_str()) {
            return Err(bad("unexpected header".into()));
        }
        let row: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        if row.len() != REPORT_COLUMNS.len() {
            return Err(bad(format!("expected {} fields", REPORT_COLUMNS.len())));
        }
        let f = |i: usize| row[i].parse::<f64>().map_err(|e| bad(format!("{}: {e}", REPORT_COLUMNS[i])));
        let u = |i: usize| row[i].parse::<u64>().map_err(|e| bad(format!("{}: {e}", REPORT_COLUMNS[i])));
        Ok(Self {
            hr_5: f(0)?,
            hr_10: f(1)?,
            hr_20: f(2)?,
            ndcg_5: f(3)?,
            ndcg_10: f(4)?,
            ndcg_20: f(5)?,
            r_5: f(6)?,
            r_10: f(7)?,
            r_20: f(8)?,
            cv_10: f(9)?,
            cv_20: f(10)?,
            ncv_10: f(11)?,
            ncv_20: f(12)?,
            nc_1: u(13)? as usize,
            entropy: f(14)?,
            samples: u(15)? as usize,
            seed: u(16)?,
        })
    }

    /// Writes `metrics_seed{seed}_{tag}.csv` and `.json` into `dir`.
    pub fn emit(&self, dir: &Path, tag: &str) -> Result<(PathBuf, PathBuf)> {
        let stem = format!("metrics_seed{}_{tag}", self.seed);
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        std::fs::write(&json, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&json, e))?;
        Ok((csv, json))
    }
}

/// Per-state distributions from a policy network, batched and evaluated in
/// parallel chunks.
pub fn policy_distributions(policy: &PolicyNetwork, windows: &[Window], mode: ExecMode) -> Result<Vec<Vec<f64>>> {
    let chunks: Vec<&[Window]> = windows.chunks(256).collect();
    let tables = par::try_map(mode, &chunks, |c| policy.distribution(c))?;
    Ok(tables
        .iter()
        .flat_map(|t| (0..t.rows()).map(move |i| t.row(i).to_vec()))
        .collect())
}

/// Scores ranked lists and distributions, one per evaluation transition.
pub fn report_from_distributions(
    distributions: &[Vec<f64>],
    eval: &[Transition],
    novel: &BTreeSet<u32>,
    lookup: &dyn RatingLookup,
    seed: u64,
    mode: ExecMode,
) -> Result<MetricsReport> {
    if eval.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    if distributions.len() != eval.len() {
        return Err(Error::shape("report", &[eval.len()], &[distributions.len()]));
    }
    let item_count = distributions[0].len();
    if item_count < MAX_K {
        return Err(Error::InvalidArgument(format!(
            "reports need at least {MAX_K} items, catalog has {item_count}"
        )));
    }
    let lists = par::map(mode, distributions, |p| top_k(p, MAX_K));
    let truth: Vec<u32> = eval.iter().map(|t| t.action).collect();
    let windows: Vec<Window> = eval.iter().map(|t| t.window).collect();
    Ok(MetricsReport {
        hr_5: hit_ratio(&lists, &truth, 5)?,
        hr_10: hit_ratio(&lists, &truth, 10)?,
        hr_20: hit_ratio(&lists, &truth, 20)?,
        ndcg_5: ndcg(&lists, &truth, 5)?,
        ndcg_10: ndcg(&lists, &truth, 10)?,
        ndcg_20: ndcg(&lists, &truth, 20)?,
        r_5: cumulative_reward(&lists, &windows, lookup, 5)?,
        r_10: cumulative_reward(&lists, &windows, lookup, 10)?,
        r_20: cumulative_reward(&lists, &windows, lookup, 20)?,
        cv_10: coverage(&lists, item_count, 10)?,
        cv_20: coverage(&lists, item_count, 20)?,
        ncv_10: novel_coverage(&lists, novel, 10)?,
        ncv_20: novel_coverage(&lists, novel, 20)?,
        nc_1: novel_count(&lists, novel, 1)?,
        entropy: policy_entropy(distributions)?,
        samples: eval.len(),
        seed,
    })
}

/// Evaluates a policy network on the evaluation transitions.
pub fn evaluate_policy(
    policy: &PolicyNetwork,
    eval: &[Transition],
    novel: &BTreeSet<u32>,
    lookup: &dyn RatingLookup,
    seed: u64,
    mode: ExecMode,
) -> Result<MetricsReport> {
    let windows: Vec<Window> = eval.iter().map(|t| t.window).collect();
    let dists = policy_distributions(policy, &windows, mode)?;
    report_from_distributions(&dists, eval, novel, lookup, seed, mode)
}

/// One `(param, value, metric)` aggregate over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Long-format rows, one per value and metric, from per-seed reports.
pub fn sweep_rows(param: &str, results: &[(f64, Vec<MetricsReport>)], metrics: &[&str]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (value, reports) in results {
        for &m in metrics {
            let xs: Vec<f64> = reports.iter().filter_map(|r| r.metric(m)).collect();
            let (mean, std) = mean_std(&xs);
            rows.push(SweepRow {
                param: param.to_string(),
                value: *value,
                metric: m.to_string(),
                mean,
                std,
                n: xs.len(),
            });
        }
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,value,metric,mean,std,n\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.param, r.value, r.metric, r.mean, r.std, r.n);
    }
    out
}
