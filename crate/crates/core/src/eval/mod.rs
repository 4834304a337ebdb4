//! Ranking metrics, the logistic baseline and the rolling monthly protocol.

pub mod baseline;
pub mod metrics;
pub mod rolling;

pub use baseline::{baseline_logistic, flatten_bundle, LogisticConfig, LogisticModel};
pub use metrics::{
    accuracy_top_split, auc, auc_of, bucket_prediction, pool_buckets, rank_platforms, BucketLimit, BucketRow, RankedPlatform,
    ScoreHistogram,
};
pub use rolling::{
    cross_validate, evaluate_month, rolling_evaluate, EvalConfig, EvaluationReport, FoldPlan, LogisticFactory, OmniRankFactory,
    ScoreModel,
};
