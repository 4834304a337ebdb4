//! Data cleaning: near-duplicate removal, null defaults and comment quality
//! (UGC) filtering.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoryValue, Dataset, PlatformRecord, TextDocument};
use crate::error::{bail, Result};
use crate::features::sentiment::SentimentLexicon;

pub const DEFAULT_UGC_THRESHOLD: f64 = 0.2;
pub const DEFAULT_DEDUP_JACCARD: f64 = 0.9;

/// Inputs to the comment quality score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UgcComponents {
    /// TF-IDF informativeness, `>= 0`.
    pub tfidf: f64,
    /// Sentiment clarity in `[0, 1]`.
    pub clarity: f64,
    /// Author's share of all authored comments, in `[0, 1]`.
    pub user_weight: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_docs: usize,
    pub duplicates_removed: usize,
    pub empty_removed: usize,
    pub nulls_filled: usize,
    pub ugc_removed: usize,
    pub docs_kept: usize,
}

impl CleaningReport {
    pub fn merge(&mut self, other: &CleaningReport) {
        self.input_docs += other.input_docs;
        self.duplicates_removed += other.duplicates_removed;
        self.empty_removed += other.empty_removed;
        self.nulls_filled += other.nulls_filled;
        self.ugc_removed += other.ugc_removed;
        self.docs_kept += other.docs_kept;
    }
}

/// Weighted quality score before normalization: `5T + 3E + 2W`.
pub fn ugc_raw(c: &UgcComponents) -> Result<f64> {
    if !(c.tfidf >= 0.0) || !c.tfidf.is_finite() {
        bail!(Precondition, "tfidf score {} must be finite and >= 0", c.tfidf);
    }
    if !(0.0..=1.0).contains(&c.clarity) {
        bail!(Precondition, "sentiment clarity {} outside [0,1]", c.clarity);
    }
    if !(0.0..=1.0).contains(&c.user_weight) {
        bail!(Precondition, "user weight {} outside [0,1]", c.user_weight);
    }
    Ok(5.0 * c.tfidf + 3.0 * c.clarity + 2.0 * c.user_weight)
}

/// Corpus-wide min-max scaling onto `[0, 1]`. A constant corpus maps to 1.
pub fn ugc_normalize(raws: &[f64]) -> Result<Vec<f64>> {
    if raws.is_empty() {
        bail!(Precondition, "cannot normalize an empty score list");
    }
    let (lo, hi) = raws
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi == lo {
        return Ok(vec![1.0; raws.len()]);
    }
    Ok(raws.iter().map(|x| (x - lo) / (hi - lo)).collect())
}

/// Keeps comments whose score is at or above `threshold`; no re-normalization
/// happens afterwards.
pub fn ugc_filter(
    comments: Vec<TextDocument>,
    scores: &[f64],
    threshold: f64,
) -> Result<(Vec<TextDocument>, CleaningReport)> {
    if comments.len() != scores.len() {
        bail!(Precondition, "{} comments but {} scores", comments.len(), scores.len());
    }
    let input = comments.len();
    let kept: Vec<TextDocument> = comments
        .into_iter()
        .zip(scores)
        .filter(|(_, &s)| s >= threshold)
        .map(|(mut d, &s)| {
            d.ugc_score = Some(s);
            d
        })
        .collect();
    let report = CleaningReport {
        input_docs: input,
        ugc_removed: input - kept.len(),
        docs_kept: kept.len(),
        ..Default::default()
    };
    Ok((kept, report))
}

pub fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Greedy near-duplicate removal in `doc_id` order. A document is dropped when
/// its token-set Jaccard similarity with any already kept document reaches
/// `jaccard_threshold`; exact token-sequence duplicates are always dropped.
pub fn dedupe_docs(mut docs: Vec<TextDocument>, jaccard_threshold: f64) -> (Vec<TextDocument>, CleaningReport) {
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let input = docs.len();
    let mut exact: HashSet<Vec<String>> = HashSet::new();
    let mut kept_sets: Vec<HashSet<&str>> = Vec::new();
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut keep = vec![false; docs.len()];

    for (i, d) in docs.iter().enumerate() {
        if exact.contains(&d.text) {
            continue;
        }
        let set: HashSet<&str> = d.text.iter().map(String::as_str).collect();
        // intersection sizes against every kept doc sharing a token
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for tok in &set {
            if let Some(list) = postings.get(tok) {
                for &k in list {
                    *overlap.entry(k).or_insert(0) += 1;
                }
            }
        }
        let near_dup = overlap.iter().any(|(&k, &inter)| {
            let union = set.len() + kept_sets[k].len() - inter;
            union > 0 && inter as f64 / union as f64 >= jaccard_threshold
        });
        if near_dup {
            continue;
        }
        let idx = kept_sets.len();
        for tok in &set {
            postings.entry(tok).or_default().push(idx);
        }
        kept_sets.push(set);
        exact.insert(d.text.clone());
        keep[i] = true;
    }
    drop(postings);
    drop(kept_sets);
    let kept: Vec<TextDocument> = docs
        .into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect();
    let report = CleaningReport {
        input_docs: input,
        duplicates_removed: input - kept.len(),
        docs_kept: kept.len(),
        ..Default::default()
    };
    (kept, report)
}

/// Default value for every schema field. The key sets define the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldDefaults {
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, CategoryValue>,
}

impl Default for FieldDefaults {
    fn default() -> Self {
        let numeric = [("registered_capital", 0.0), ("interest_rate", 0.0), ("staff_count", 0.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let categorical = ["nature", "region", "guarantee_mode"]
            .into_iter()
            .map(|k| (k.to_string(), CategoryValue::One(String::new())))
            .chain(std::iter::once(("tags".to_string(), CategoryValue::Many(vec![]))))
            .collect();
        FieldDefaults { numeric, categorical }
    }
}

/// Replaces absent static fields by their defaults and reports which fields
/// were filled.
pub fn fill_nulls(record: &PlatformRecord, defaults: &FieldDefaults) -> Result<(PlatformRecord, Vec<String>)> {
    for k in record.static_numeric.keys() {
        if !defaults.numeric.contains_key(k) {
            bail!(Schema, "platform {}: unknown numeric field '{}'", record.id, k);
        }
    }
    for k in record.static_categorical.keys() {
        if !defaults.categorical.contains_key(k) {
            bail!(Schema, "platform {}: unknown categorical field '{}'", record.id, k);
        }
    }
    let mut out = record.clone();
    let mut missing = Vec::new();
    for (k, v) in &defaults.numeric {
        if !out.static_numeric.contains_key(k) {
            out.static_numeric.insert(k.clone(), *v);
            missing.push(k.clone());
        }
    }
    for (k, v) in &defaults.categorical {
        if !out.static_categorical.contains_key(k) {
            out.static_categorical.insert(k.clone(), v.clone());
            missing.push(k.clone());
        }
    }
    missing.sort();
    Ok((out, missing))
}

/// Per-comment UGC components over a comment corpus.
pub fn ugc_components(comments: &[TextDocument], lexicon: &SentimentLexicon) -> Vec<UgcComponents> {
    let n = comments.len();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for c in comments {
        let uniq: HashSet<&str> = c.text.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut author_counts: HashMap<&str, usize> = HashMap::new();
    for c in comments {
        if let Some(a) = &c.author {
            *author_counts.entry(a.as_str()).or_insert(0) += 1;
        }
    }
    let authored: usize = author_counts.values().sum();

    let raw_tfidf: Vec<f64> = comments
        .par_iter()
        .map(|c| {
            if c.text.is_empty() {
                return 0.0;
            }
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for t in &c.text {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
            let len = c.text.len() as f64;
            let total: f64 = tf
                .iter()
                .map(|(t, &cnt)| {
                    let idf = ((1.0 + n as f64) / (1.0 + df[t] as f64)).ln() + 1.0;
                    cnt as f64 / len * idf
                })
                .sum();
            total / tf.len() as f64
        })
        .collect();
    let tfidf = if raw_tfidf.is_empty() {
        Vec::new()
    } else {
        ugc_normalize(&raw_tfidf).expect("non-empty")
    };

    comments
        .iter()
        .zip(tfidf)
        .map(|(c, t)| UgcComponents {
            tfidf: t,
            clarity: lexicon.clarity(&c.text),
            user_weight: match (&c.author, authored) {
                (Some(a), total) if total > 0 => author_counts[a.as_str()] as f64 / total as f64,
                _ => 0.0,
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub ugc_threshold: f64,
    pub dedup_jaccard: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            ugc_threshold: DEFAULT_UGC_THRESHOLD,
            dedup_jaccard: DEFAULT_DEDUP_JACCARD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningSummary {
    pub news: CleaningReport,
    pub comments: CleaningReport,
    pub nulls_filled: usize,
    /// Platform id to the static fields that were filled from defaults.
    pub missing_fields: BTreeMap<String, Vec<String>>,
}

fn drop_empty(docs: Vec<TextDocument>) -> (Vec<TextDocument>, usize) {
    let before = docs.len();
    let kept: Vec<_> = docs.into_iter().filter(|d| !d.text.is_empty()).collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Full cleaning pass: null defaults, per-platform dedup of news and
/// comments, then corpus-wide UGC scoring and filtering of comments.
pub fn clean_dataset(
    dataset: &Dataset,
    defaults: &FieldDefaults,
    lexicon: &SentimentLexicon,
    config: &CleaningConfig,
) -> Result<(Dataset, CleaningSummary)> {
    let mut summary = CleaningSummary::default();
    let mut platforms = Vec::with_capacity(dataset.platforms.len());
    for p in &dataset.platforms {
        let (mut filled, missing) = fill_nulls(p, defaults)?;
        summary.nulls_filled += missing.len();
        if !missing.is_empty() {
            summary.missing_fields.insert(p.id.clone(), missing);
        }

        let (news, empty) = drop_empty(std::mem::take(&mut filled.news_docs));
        let (news, mut rep) = dedupe_docs(news, config.dedup_jaccard);
        rep.input_docs += empty;
        rep.empty_removed = empty;
        summary.news.merge(&rep);
        filled.news_docs = news;

        let (comments, empty) = drop_empty(std::mem::take(&mut filled.comment_docs));
        let (comments, mut rep) = dedupe_docs(comments, config.dedup_jaccard);
        rep.input_docs += empty;
        rep.empty_removed = empty;
        rep.docs_kept = 0; // settled after UGC filtering
        summary.comments.merge(&rep);
        filled.comment_docs = comments;
        platforms.push(filled);
    }

    // corpus-wide UGC
    let all_comments: Vec<TextDocument> = platforms.iter().flat_map(|p| p.comment_docs.iter().cloned()).collect();
    if !all_comments.is_empty() {
        let comps = ugc_components(&all_comments, lexicon);
        let raws = comps.iter().map(ugc_raw).collect::<Result<Vec<_>>>()?;
        let scores = ugc_normalize(&raws)?;
        let mut by_doc: HashMap<&str, f64> = HashMap::new();
        for (d, s) in all_comments.iter().zip(&scores) {
            by_doc.insert(d.doc_id.as_str(), *s);
        }
        for p in &mut platforms {
            let docs = std::mem::take(&mut p.comment_docs);
            let s: Vec<f64> = docs.iter().map(|d| by_doc[d.doc_id.as_str()]).collect();
            let (kept, rep) = ugc_filter(docs, &s, config.ugc_threshold)?;
            summary.comments.ugc_removed += rep.ugc_removed;
            summary.comments.docs_kept += rep.docs_kept;
            p.comment_docs = kept;
        }
    }
    Ok((Dataset::new(platforms)?, summary))
}
