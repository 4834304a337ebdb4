//! Assembly of model-ready feature bundles at a cutoff month.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{kg_build, kg_features, KnowledgeGraph};
use super::lda::{lda_fit, lda_infer, LdaConfig, LdaModel};
use super::sentiment::{sentiment_score, Sentiment, SentimentLexicon};
use crate::domain::{label_at, BundleFlags, Dataset, FeatureBundle, Month, PlatformRecord, TextDocument};
use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Number of non-topic news channels: positive, negative, total counts.
pub const NEWS_COUNT_CHANNELS: usize = 3;
/// Comment channels: positive, negative, total counts and mean UGC score.
pub const COMMENT_CHANNELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub window: usize,
    pub numeric_fields: Vec<String>,
    pub categorical_fields: Vec<String>,
    pub index_channels: Vec<String>,
    pub lda: LdaConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        FeatureConfig {
            window: 12,
            numeric_fields: s(&["registered_capital", "interest_rate", "staff_count"]),
            categorical_fields: s(&["nature", "region", "guarantee_mode", "tags"]),
            index_channels: s(&[
                "volume",
                "rate",
                "net_inflow",
                "investor_count",
                "borrower_count",
                "loan_count",
                "mean_term",
            ]),
            lda: LdaConfig::default(),
        }
    }
}

/// Column index of every `field=value` pair seen among the given platforms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryVocab {
    pub entries: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl CategoryVocab {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PlatformRecord>, fields: &[String]) -> Self {
        let mut keys = std::collections::BTreeSet::new();
        for r in records {
            for f in fields {
                if let Some(v) = r.static_categorical.get(f) {
                    for value in v.values() {
                        keys.insert(format!("{f}={value}"));
                    }
                }
            }
        }
        let entries: Vec<String> = keys.into_iter().collect();
        let index = entries.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        CategoryVocab { entries, index }
    }

    pub fn reindex(&mut self) {
        self.index = self.entries.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn column(&self, field: &str, value: &str) -> Option<usize> {
        self.index.get(&format!("{field}={value}")).copied()
    }
}

/// Sign-preserving `ln(1 + |x|)`; tames heavy-tailed amounts and counts.
pub fn signed_log1p(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

/// FNV-1a, used to derive per-document inference seeds that do not depend on
/// corpus order.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Everything a cutoff's bundles are built from.
pub struct FeatureContext<'a> {
    pub lda: Option<&'a LdaModel>,
    pub lexicon: &'a SentimentLexicon,
    pub graph: &'a KnowledgeGraph,
    pub problem_ids: &'a HashSet<String>,
    pub vocab: &'a CategoryVocab,
    pub config: &'a FeatureConfig,
}

fn docs_by_month(docs: &[TextDocument], cutoff: Month) -> BTreeMap<Month, Vec<&TextDocument>> {
    let mut out: BTreeMap<Month, Vec<&TextDocument>> = BTreeMap::new();
    for d in docs.iter().filter(|d| d.month <= cutoff) {
        out.entry(d.month).or_default().push(d);
    }
    out
}

/// Builds the bundle of `record` at `cutoff`. Only observations dated at or
/// before the cutoff contribute; months before the platform went online are
/// zero rows.
pub fn build_feature_bundle(record: &PlatformRecord, cutoff: Month, ctx: &FeatureContext<'_>) -> Result<FeatureBundle> {
    let label = label_at(record, cutoff)?;
    let cfg = ctx.config;
    let t = cfg.window;
    if t == 0 {
        bail!(Config, "window length must be positive");
    }

    let x_s_num: Vec<f64> = cfg
        .numeric_fields
        .iter()
        .map(|f| signed_log1p(record.numeric(f).unwrap_or(0.0)))
        .collect();

    let mut x_s_cat = Tensor::zeros(&[cfg.categorical_fields.len(), ctx.vocab.len()]);
    for (row, field) in cfg.categorical_fields.iter().enumerate() {
        if let Some(v) = record.static_categorical.get(field) {
            for value in v.values() {
                if let Some(col) = ctx.vocab.column(field, value) {
                    x_s_cat.set2(row, col, 1.0);
                }
            }
        }
    }

    let topics = ctx.lda.map_or(cfg.lda.topics, |m| m.topics);
    let mut x_di = Tensor::zeros(&[t, cfg.index_channels.len()]);
    let mut x_dn = Tensor::zeros(&[t, topics + NEWS_COUNT_CHANNELS]);
    let mut x_dc = Tensor::zeros(&[t, COMMENT_CHANNELS]);
    let news = docs_by_month(&record.news_docs, cutoff);
    let comments = docs_by_month(&record.comment_docs, cutoff);
    let mut flags = BundleFlags {
        no_news: news.is_empty(),
        no_comments: comments.is_empty(),
        uniform_topic_docs: 0,
    };

    for i in 0..t {
        let month = cutoff.offset(i as i32 - (t as i32 - 1));
        if month < record.online_month {
            continue;
        }
        for (c, name) in cfg.index_channels.iter().enumerate() {
            if let Some(v) = record.index_series.get(name).and_then(|s| s.value_at(month)) {
                x_di.set2(i, c, signed_log1p(v));
            }
        }

        if let Some(docs) = news.get(&month) {
            let (mut pos, mut neg) = (0usize, 0usize);
            let mut mix = vec![0.0; topics];
            for d in docs {
                match sentiment_score(&d.text, ctx.lexicon).sentiment {
                    Sentiment::Positive => pos += 1,
                    Sentiment::Negative => neg += 1,
                }
                if let Some(model) = ctx.lda {
                    let m = lda_infer(model, &d.text, cfg.lda.infer_iterations, cfg.lda.seed ^ stable_hash(&d.doc_id));
                    if m.uniform_fallback {
                        flags.uniform_topic_docs += 1;
                    }
                    mix.iter_mut().zip(&m.proportions).for_each(|(a, p)| *a += p);
                }
            }
            let n = docs.len() as f64;
            let row = x_dn.row_mut(i);
            if ctx.lda.is_some() {
                for k in 0..topics {
                    row[k] = mix[k] / n;
                }
            }
            row[topics] = (pos as f64).ln_1p();
            row[topics + 1] = (neg as f64).ln_1p();
            row[topics + 2] = n.ln_1p();
        }

        if let Some(docs) = comments.get(&month) {
            let (mut pos, mut neg) = (0usize, 0usize);
            let mut ugc = 0.0;
            for d in docs {
                match sentiment_score(&d.text, ctx.lexicon).sentiment {
                    Sentiment::Positive => pos += 1,
                    Sentiment::Negative => neg += 1,
                }
                ugc += d.ugc_score.unwrap_or(0.0);
            }
            let n = docs.len() as f64;
            let row = x_dc.row_mut(i);
            row[0] = (pos as f64).ln_1p();
            row[1] = (neg as f64).ln_1p();
            row[2] = n.ln_1p();
            row[3] = ugc / n;
        }
    }

    let kg_vec = kg_features(ctx.graph, &record.id, ctx.problem_ids)?;

    Ok(FeatureBundle {
        platform_id: record.id.clone(),
        cutoff_month: cutoff,
        x_s_num,
        x_s_cat,
        x_di,
        x_dn,
        x_dc,
        kg_vec,
        label_at_cutoff: label,
        flags,
    })
}

/// Bundles for every platform online at a cutoff, with the fitted artifacts
/// they were derived from.
pub struct MonthFeatures {
    pub cutoff: Month,
    pub bundles: Vec<FeatureBundle>,
    pub lda: Option<LdaModel>,
    pub graph: KnowledgeGraph,
    pub vocab: CategoryVocab,
}

/// Fits the topic model and graph on data available at `cutoff` and builds
/// one bundle per online platform, sorted by platform id.
pub fn build_month_features(
    dataset: &Dataset,
    cutoff: Month,
    config: &FeatureConfig,
    lexicon: &SentimentLexicon,
) -> Result<MonthFeatures> {
    let mut online: Vec<&PlatformRecord> = dataset.platforms.iter().filter(|p| p.is_online(cutoff)).collect();
    online.sort_by(|a, b| a.id.cmp(&b.id));

    let mut news: Vec<&TextDocument> = online
        .iter()
        .flat_map(|p| p.news_docs.iter())
        .filter(|d| d.month <= cutoff)
        .collect();
    news.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let corpus: Vec<Vec<String>> = news.iter().map(|d| d.text.clone()).filter(|t| !t.is_empty()).collect();
    let lda = if corpus.is_empty() {
        None
    } else {
        let c = &config.lda;
        Some(lda_fit(&corpus, c.topics, c.alpha(), c.eta, c.iterations, c.seed)?)
    };

    let owned: Vec<PlatformRecord> = online.iter().map(|p| strip_docs(p)).collect();
    let graph = kg_build(&owned)?;
    let problem_ids: HashSet<String> = online
        .iter()
        .filter(|p| matches!(p.failure_month, Some(f) if f <= cutoff))
        .map(|p| p.id.clone())
        .collect();
    let vocab = CategoryVocab::from_records(online.iter().copied(), &config.categorical_fields);

    let ctx = FeatureContext {
        lda: lda.as_ref(),
        lexicon,
        graph: &graph,
        problem_ids: &problem_ids,
        vocab: &vocab,
        config,
    };
    let bundles = online
        .par_iter()
        .map(|p| build_feature_bundle(p, cutoff, &ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonthFeatures {
        cutoff,
        bundles,
        lda,
        graph,
        vocab,
    })
}

fn strip_docs(p: &PlatformRecord) -> PlatformRecord {
    PlatformRecord {
        news_docs: Vec::new(),
        comment_docs: Vec::new(),
        index_series: BTreeMap::new(),
        ..p.clone()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ChannelStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl ChannelStats {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; width];
        let mut sq = vec![0.0; width];
        for r in rows {
            n += 1;
            for (j, v) in r.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        if n == 0 {
            return ChannelStats { mean: vec![0.0; width], std: vec![0.0; width] };
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n as f64 - m * m).max(0.0).sqrt())
            .collect();
        ChannelStats { mean, std }
    }

    fn apply(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.std[j] > 1e-12 { (*v - self.mean[j]) / self.std[j] } else { 0.0 };
        }
    }
}

fn is_zero_row(r: &[f64]) -> bool {
    r.iter().all(|v| *v == 0.0)
}

/// Per-feature standardization fitted on a training set and frozen for
/// inference. Static numerics and graph features are z-scored; sequence
/// channels are z-scored over non-empty rows while all-zero rows (padding or
/// months without data) stay zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    static_num: ChannelStats,
    kg: ChannelStats,
    index: ChannelStats,
    news: ChannelStats,
    comments: ChannelStats,
}

impl FeatureScaler {
    pub fn fit(bundles: &[FeatureBundle]) -> Result<Self> {
        let first = match bundles.first() {
            Some(b) => b,
            None => bail!(Precondition, "cannot fit a scaler on zero bundles"),
        };
        let seq = |get: fn(&FeatureBundle) -> &Tensor| {
            let width = get(first).cols();
            ChannelStats::fit(
                bundles
                    .iter()
                    .flat_map(move |b| (0..get(b).rows()).map(move |i| get(b).row(i)))
                    .filter(|r| !is_zero_row(r)),
                width,
            )
        };
        Ok(FeatureScaler {
            static_num: ChannelStats::fit(bundles.iter().map(|b| b.x_s_num.as_slice()), first.x_s_num.len()),
            kg: ChannelStats::fit(bundles.iter().map(|b| b.kg_vec.as_slice()), first.kg_vec.len()),
            index: seq(|b| &b.x_di),
            news: seq(|b| &b.x_dn),
            comments: seq(|b| &b.x_dc),
        })
    }

    pub fn apply(&self, bundle: &FeatureBundle) -> FeatureBundle {
        let mut b = bundle.clone();
        self.static_num.apply(&mut b.x_s_num);
        self.kg.apply(&mut b.kg_vec);
        for (stats, t) in [(&self.index, &mut b.x_di), (&self.news, &mut b.x_dn), (&self.comments, &mut b.x_dc)] {
            for i in 0..t.rows() {
                let row = t.row_mut(i);
                if !is_zero_row(row) {
                    stats.apply(row);
                }
            }
        }
        b
    }
}
