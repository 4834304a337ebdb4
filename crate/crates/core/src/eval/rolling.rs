//! Monthly rolling evaluation with platform-level cross-validation.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_logistic, LogisticConfig};
use super::metrics::{
    accuracy_top_split, auc_of, bucket_prediction, BucketLimit, BucketRow, ScoreHistogram, DEFAULT_NORMAL_FRACTION,
    HISTOGRAM_BINS,
};
use crate::domain::{Dataset, FeatureBundle, Label, Month, RiskScore};
use crate::error::{bail, Result};
use crate::features::{build_month_features, stable_hash, FeatureConfig, SentimentLexicon};
use crate::nn::{NetConfig, TrainConfig, TrainedModel};

/// Seeded assignment of platforms to folds, stratified by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Shuffles each class separately and deals platforms round-robin, so
    /// fold sizes differ by at most one and classes are spread evenly.
    pub fn new(platforms: &[(String, Label)], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            bail!(Config, "need at least 2 folds, got {}", k);
        }
        if platforms.len() < k {
            bail!(Precondition, "{} platforms cannot fill {} folds", platforms.len(), k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sorted: Vec<&(String, Label)> = platforms.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut assignment = BTreeMap::new();
        let mut next = 0usize;
        for class in [Label::Normal, Label::Problem] {
            let mut ids: Vec<&String> = sorted.iter().filter(|p| p.1 == class).map(|p| &p.0).collect();
            ids.shuffle(&mut rng);
            for id in ids {
                if assignment.insert(id.clone(), next % k).is_some() {
                    bail!(Data, "duplicate platform id {}", id);
                }
                next += 1;
            }
        }
        Ok(FoldPlan { k, assignment })
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for f in self.assignment.values() {
            s[*f] += 1;
        }
        s
    }
}

/// Something that can be fitted on labelled bundles and score others.
pub trait ScoreModel: Sync {
    fn name(&self) -> &str;
    fn fit_score(&self, train: &[FeatureBundle], test: &[FeatureBundle], seed: u64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OmniRankFactory {
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl ScoreModel for OmniRankFactory {
    fn name(&self) -> &str {
        "omnirank"
    }

    fn fit_score(&self, train: &[FeatureBundle], test: &[FeatureBundle], seed: u64) -> Result<Vec<f64>> {
        let cfg = TrainConfig { seed, ..self.train.clone() };
        let model = TrainedModel::fit(train, &self.net, &cfg)?;
        Ok(model.predict_scores(test)?.into_iter().map(|s| s.score).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogisticFactory {
    pub config: LogisticConfig,
}

impl ScoreModel for LogisticFactory {
    fn name(&self) -> &str {
        "logistic"
    }

    fn fit_score(&self, train: &[FeatureBundle], test: &[FeatureBundle], _seed: u64) -> Result<Vec<f64>> {
        baseline_logistic(train, test, &self.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub folds: usize,
    pub normal_fraction: f64,
    pub bucket_limits: Vec<BucketLimit>,
    pub histogram_bins: usize,
    pub seed: u64,
    /// Also score every month with the logistic baseline on the same folds.
    pub baseline: bool,
    pub logistic: LogisticConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            normal_fraction: DEFAULT_NORMAL_FRACTION,
            bucket_limits: BucketLimit::default_limits(),
            histogram_bins: HISTOGRAM_BINS,
            seed: 42,
            baseline: true,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub model: String,
    pub auc: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cutoff_month: Month,
    pub model: String,
    pub platforms: usize,
    pub normal: usize,
    pub problem: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub histogram: ScoreHistogram,
    pub buckets: Vec<BucketRow>,
    pub baseline: Option<BaselineMetrics>,
    /// Out-of-fold scores, sorted by platform id.
    pub scores: Vec<RiskScore>,
}

/// Scores each bundle with a model trained on the other folds.
pub fn cross_validate(model: &dyn ScoreModel, bundles: &[FeatureBundle], plan: &FoldPlan, seed: u64) -> Result<Vec<f64>> {
    let fold_of: Vec<usize> = bundles
        .iter()
        .map(|b| match plan.fold_of(&b.platform_id) {
            Some(f) => Ok(f),
            None => bail!(Precondition, "platform {} has no fold", b.platform_id),
        })
        .collect::<Result<_>>()?;
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<FeatureBundle> =
                bundles.iter().zip(&fold_of).filter(|(_, &g)| g != f).map(|(b, _)| b.clone()).collect();
            let idx: Vec<usize> = (0..bundles.len()).filter(|&i| fold_of[i] == f).collect();
            let test: Vec<FeatureBundle> = idx.iter().map(|&i| bundles[i].clone()).collect();
            if test.is_empty() {
                return Ok((idx, Vec::new()));
            }
            let scores = model.fit_score(&train, &test, seed.wrapping_add(f as u64))?;
            Ok((idx, scores))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![f64::NAN; bundles.len()];
    for (idx, scores) in per_fold {
        for (i, s) in idx.into_iter().zip(scores) {
            out[i] = s;
        }
    }
    Ok(out)
}

fn month_seed(seed: u64, month: Month) -> u64 {
    seed ^ stable_hash(&month.to_string())
}

/// Evaluates one cutoff using only data dated at or before it, plus the
/// statuses of the following month for the bucket analysis.
pub fn evaluate_month(
    dataset: &Dataset,
    model: &dyn ScoreModel,
    cutoff: Month,
    features: &FeatureConfig,
    lexicon: &SentimentLexicon,
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    let next = cutoff.next();
    match dataset.horizon_end() {
        Some(h) if next <= h => {}
        _ => bail!(Precondition, "month {} needs statuses for {}, beyond the data horizon", cutoff, next),
    }
    let view = dataset.truncated(cutoff, next);
    let month = build_month_features(&view, cutoff, features, lexicon)?;
    let bundles = month.bundles;
    if bundles.len() < 2 * config.folds {
        bail!(Precondition, "month {} has {} platforms, fewer than {}", cutoff, bundles.len(), 2 * config.folds);
    }
    let labels: HashMap<String, Label> = bundles.iter().map(|b| (b.platform_id.clone(), b.label_at_cutoff)).collect();
    let pairs: Vec<(String, Label)> = bundles.iter().map(|b| (b.platform_id.clone(), b.label_at_cutoff)).collect();
    let seed = month_seed(config.seed, cutoff);
    let plan = FoldPlan::new(&pairs, config.folds, seed)?;

    let to_scores = |raw: Vec<f64>| -> Vec<RiskScore> {
        bundles
            .iter()
            .zip(raw)
            .map(|(b, score)| RiskScore { platform_id: b.platform_id.clone(), cutoff_month: cutoff, score })
            .collect()
    };
    let scores = to_scores(cross_validate(model, &bundles, &plan, seed)?);
    let baseline = if config.baseline {
        let lr = LogisticFactory { config: config.logistic.clone() };
        let s = to_scores(cross_validate(&lr, &bundles, &plan, seed)?);
        Some(BaselineMetrics {
            model: lr.name().to_string(),
            auc: auc_of(&s, &labels)?,
            accuracy: accuracy_top_split(&s, &labels, config.normal_fraction)?,
        })
    } else {
        None
    };
    let normal = labels.values().filter(|l| **l == Label::Normal).count();
    Ok(EvaluationReport {
        cutoff_month: cutoff,
        model: model.name().to_string(),
        platforms: bundles.len(),
        normal,
        problem: bundles.len() - normal,
        accuracy: accuracy_top_split(&scores, &labels, config.normal_fraction)?,
        auc: auc_of(&scores, &labels)?,
        histogram: ScoreHistogram::build(&scores, &labels, config.histogram_bins)?,
        buckets: bucket_prediction(&scores, &view, cutoff, &config.bucket_limits)?,
        baseline,
        scores,
    })
}

/// One report per cutoff, in the order given.
pub fn rolling_evaluate(
    dataset: &Dataset,
    model: &dyn ScoreModel,
    months: &[Month],
    features: &FeatureConfig,
    lexicon: &SentimentLexicon,
    config: &EvalConfig,
) -> Result<Vec<EvaluationReport>> {
    months
        .par_iter()
        .map(|&m| {
            log::info!("evaluating cutoff {m}");
            evaluate_month(dataset, model, m, features, lexicon, config)
        })
        .collect()
}
