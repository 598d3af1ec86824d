//! Ranking, reward, coverage and entropy metrics plus report files.

pub mod ranking;
pub mod report;

pub use ranking::{
    coverage, cumulative_reward, entropy, hit_ratio, ndcg, novel_count, novel_coverage, policy_entropy, top_k,
    ObservedRatings, RatingLookup,
};
pub use report::{
    evaluate_policy, mean_std, policy_distributions, report_from_distributions, sweep_csv, sweep_rows, MetricsReport,
    SweepRow, REPORT_COLUMNS,
};
