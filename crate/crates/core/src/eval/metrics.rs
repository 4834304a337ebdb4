//! Ranking metrics over risk scores.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{label_at, Dataset, Label, Month, RiskScore};
use crate::error::{bail, Result};

pub const DEFAULT_NORMAL_FRACTION: f64 = 0.6;
pub const HISTOGRAM_BINS: usize = 10;
pub const INTEREST_RATE_FIELD: &str = "interest_rate";

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        bail!(Numeric, "non-finite {} score {}", what, x);
    }
    Ok(())
}

/// Average 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, computed from rank sums.
pub fn auc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        bail!(
            Precondition,
            "auc needs both classes, got {} positive and {} negative",
            positive.len(),
            negative.len()
        );
    }
    check_finite(positive, "positive")?;
    check_finite(negative, "negative")?;
    let all: Vec<f64> = positive.iter().chain(negative).copied().collect();
    let ranks = average_ranks(&all);
    let m = positive.len() as f64;
    let n = negative.len() as f64;
    let rank_sum: f64 = ranks[..positive.len()].iter().sum();
    Ok((rank_sum - m * (m + 1.0) / 2.0) / (m * n))
}

/// AUC of scores against labels, with Normal as the positive class.
pub fn auc_of(scores: &[RiskScore], labels: &HashMap<String, Label>) -> Result<f64> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for s in scores {
        match labels.get(&s.platform_id) {
            Some(Label::Normal) => pos.push(s.score),
            Some(Label::Problem) => neg.push(s.score),
            None => bail!(Precondition, "no label for platform {}", s.platform_id),
        }
    }
    auc(&pos, &neg)
}

fn by_score_desc(a: &RiskScore, b: &RiskScore) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.platform_id.cmp(&b.platform_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlatform {
    pub rank: usize,
    pub platform_id: String,
    pub score: f64,
}

/// Orders by score descending, ties by platform id ascending; ranks start
/// at 1.
pub fn rank_platforms(scores: &[RiskScore]) -> Vec<RankedPlatform> {
    let mut v: Vec<&RiskScore> = scores.iter().collect();
    v.sort_by(|a, b| by_score_desc(a, b));
    v.into_iter()
        .enumerate()
        .map(|(i, s)| RankedPlatform { rank: i + 1, platform_id: s.platform_id.clone(), score: s.score })
        .collect()
}

/// Labels the top `ceil(fraction * n)` platforms Normal and the rest
/// Problem, and returns the share of correct labels.
pub fn accuracy_top_split(scores: &[RiskScore], labels: &HashMap<String, Label>, normal_fraction: f64) -> Result<f64> {
    if !(normal_fraction > 0.0 && normal_fraction < 1.0) {
        bail!(Config, "normal fraction {} outside (0, 1)", normal_fraction);
    }
    if scores.is_empty() {
        bail!(Precondition, "no scores to label");
    }
    let ranked = rank_platforms(scores);
    let top = (normal_fraction * ranked.len() as f64).ceil() as usize;
    let mut correct = 0usize;
    for (i, r) in ranked.iter().enumerate() {
        let truth = match labels.get(&r.platform_id) {
            Some(l) => *l,
            None => bail!(Precondition, "no label for platform {}", r.platform_id),
        };
        let predicted = if i < top { Label::Normal } else { Label::Problem };
        if predicted == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / ranked.len() as f64)
}

/// Counts of scores per equal-width bin over [0, 1], split by true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub edges: Vec<f64>,
    pub normal: Vec<usize>,
    pub problem: Vec<usize>,
}

pub fn bin_of(score: f64, bins: usize) -> usize {
    ((score * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

impl ScoreHistogram {
    pub fn build(scores: &[RiskScore], labels: &HashMap<String, Label>, bins: usize) -> Result<Self> {
        if bins == 0 {
            bail!(Config, "histogram needs at least one bin");
        }
        let mut h = ScoreHistogram {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            normal: vec![0; bins],
            problem: vec![0; bins],
        };
        for s in scores {
            let b = bin_of(s.score, bins);
            match labels.get(&s.platform_id) {
                Some(Label::Normal) => h.normal[b] += 1,
                Some(Label::Problem) => h.problem[b] += 1,
                None => bail!(Precondition, "no label for platform {}", s.platform_id),
            }
        }
        Ok(h)
    }

    pub fn total(&self) -> usize {
        self.normal.iter().chain(&self.problem).sum()
    }

    /// Index of the most populated bin (lowest index on ties).
    pub fn mode(counts: &[usize]) -> Option<usize> {
        let max = *counts.iter().max()?;
        if max == 0 {
            return None;
        }
        counts.iter().position(|&c| c == max)
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &ScoreHistogram) {
        self.normal.iter_mut().zip(&other.normal).for_each(|(a, b)| *a += b);
        self.problem.iter_mut().zip(&other.problem).for_each(|(a, b)| *a += b);
    }
}

/// A rank cut-off: the top `n` platforms, or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketLimit {
    Top(usize),
    All(AllMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllMarker {
    #[serde(rename = "all")]
    All,
}

impl BucketLimit {
    pub const ALL: BucketLimit = BucketLimit::All(AllMarker::All);

    pub fn default_limits() -> Vec<BucketLimit> {
        let mut v: Vec<BucketLimit> = [20, 50, 100, 200, 500, 1000].into_iter().map(BucketLimit::Top).collect();
        v.push(BucketLimit::ALL);
        v
    }

    fn take(self, n: usize) -> usize {
        match self {
            BucketLimit::Top(k) => k.min(n),
            BucketLimit::All(_) => n,
        }
    }
}

impl std::fmt::Display for BucketLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BucketLimit::Top(k) => write!(f, "top {k}"),
            BucketLimit::All(_) => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub limit: BucketLimit,
    pub platforms: usize,
    pub failures: usize,
    pub failure_pct: f64,
    pub mean_interest_rate: Option<f64>,
    /// Platforms in the bucket that report an interest rate.
    #[serde(default)]
    pub rate_count: usize,
}

/// Among platforms Normal at `cutoff`, ranks by score and reports for each
/// limit the share that fails in the following month and the mean interest
/// rate.
pub fn bucket_prediction(scores: &[RiskScore], dataset: &Dataset, cutoff: Month, limits: &[BucketLimit]) -> Result<Vec<BucketRow>> {
    let next = cutoff.next();
    match dataset.horizon_end() {
        Some(h) if next <= h => {}
        h => bail!(Precondition, "labels for {} are beyond the data horizon {:?}", next, h.map(|m| m.to_string())),
    }
    let mut eligible = Vec::new();
    for s in scores {
        let rec = match dataset.get(&s.platform_id) {
            Some(r) => r,
            None => bail!(Precondition, "scored platform {} not in dataset", s.platform_id),
        };
        if label_at(rec, cutoff)? == Label::Normal {
            eligible.push((s, rec));
        }
    }
    eligible.sort_by(|a, b| by_score_desc(a.0, b.0));
    Ok(limits
        .iter()
        .map(|&limit| {
            let top = &eligible[..limit.take(eligible.len())];
            let failures = top.iter().filter(|(_, r)| r.failure_month == Some(next)).count();
            let rates: Vec<f64> = top.iter().filter_map(|(_, r)| r.numeric(INTEREST_RATE_FIELD)).collect();
            BucketRow {
                limit,
                platforms: top.len(),
                failures,
                failure_pct: if top.is_empty() { 0.0 } else { 100.0 * failures as f64 / top.len() as f64 },
                mean_interest_rate: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
                rate_count: rates.len(),
            }
        })
        .collect())
}

/// Sums bucket rows with matching limits across several months.
pub fn pool_buckets(months: &[Vec<BucketRow>]) -> Vec<BucketRow> {
    let Some(first) = months.first() else { return Vec::new() };
    first
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rows: Vec<&BucketRow> = months.iter().filter_map(|m| m.get(i)).collect();
            let platforms: usize = rows.iter().map(|r| r.platforms).sum();
            let failures: usize = rows.iter().map(|r| r.failures).sum();
            let rate_count: usize = rows.iter().map(|r| r.rate_count).sum();
            let rate_sum: f64 = rows
                .iter()
                .filter_map(|r| r.mean_interest_rate.map(|m| m * r.rate_count as f64))
                .sum();
            BucketRow {
                limit: row.limit,
                platforms,
                failures,
                failure_pct: if platforms == 0 { 0.0 } else { 100.0 * failures as f64 / platforms as f64 },
                mean_interest_rate: (rate_count > 0).then(|| rate_sum / rate_count as f64),
                rate_count,
            }
        })
        .collect()
}

/// Number of adjacent pairs where the sequence decreases.
pub fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
