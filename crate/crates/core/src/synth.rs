//! Synthetic platform universe with a planted risk signal.
//!
//! Each platform draws a latent risk `r` in [0, 1]. Problem status is drawn
//! with probability increasing in `r`, and every feature family shifts with
//! `r` scaled by `signal_strength`. Part of the plant is linear (capital,
//! rates, growth, sentiment ratios, topic mix) and part is only visible to
//! non-linear models (inflow volatility, a nature/region interaction, burst
//! timing).

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoryValue, DocKind, Label, Month, MonthlySeries, PlatformRecord, TextDocument};
use crate::error::{bail, Result};
use crate::features::sentiment::{DEFAULT_NEGATIVE, DEFAULT_POSITIVE};

pub const INDEX_CHANNELS: [&str; 7] = [
    "volume",
    "rate",
    "net_inflow",
    "investor_count",
    "borrower_count",
    "loan_count",
    "mean_term",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabSizes {
    pub news: usize,
    pub comments: usize,
}

impl Default for VocabSizes {
    fn default() -> Self {
        VocabSizes { news: 300, comments: 200 }
    }
}

/// Node-type inventory for officers and attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntityCounts {
    pub people: usize,
    pub positions: usize,
    pub tags: usize,
    pub natures: usize,
    pub regions: usize,
    pub guarantee_modes: usize,
}

impl Default for EntityCounts {
    fn default() -> Self {
        EntityCounts { people: 900, positions: 40, tags: 15, natures: 8, regions: 29, guarantee_modes: 4 }
    }
}

/// Relative weights of the planted signal families; each multiplies
/// `signal_strength`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalMix {
    /// Capital, staff, tags, growth, loan term and borrower ratio.
    pub static_linear: f64,
    /// Net-inflow volatility rising with the square of risk.
    pub volatility: f64,
    /// Agreement of nature and region parity.
    pub interaction: f64,
    /// Officers drawn from a pool shared by risky platforms.
    pub officers: f64,
    /// Risk-driven negativity and topic shift of text.
    pub text_risk: f64,
    /// Volume decay after failure.
    pub collapse: f64,
    /// Inflow swings after failure.
    pub failed_swing: f64,
    /// Text volume and negativity after failure.
    pub failed_text: f64,
    /// One to three months of stress before failure.
    pub distress: f64,
}

impl Default for SignalMix {
    fn default() -> Self {
        SignalMix {
            static_linear: 0.5,
            volatility: 2.0,
            interaction: 1.0,
            officers: 1.0,
            text_risk: 0.5,
            collapse: 0.0,
            failed_swing: 3.0,
            failed_text: 0.2,
            distress: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_platforms: usize,
    pub problem_fraction: f64,
    /// First month of the universe, "YYYY-MM".
    pub start: Month,
    pub horizon_months: usize,
    pub signal_strength: f64,
    pub interest_risk_coupling: f64,
    pub vocab: VocabSizes,
    pub n_topics_true: usize,
    pub entities: EntityCounts,
    pub news_per_month: f64,
    pub comments_per_month: f64,
    /// Chance that any static field is left out of a record.
    pub null_rate: f64,
    /// Chance that a document is re-posted under a new id.
    pub duplicate_rate: f64,
    /// Share of comments that are short, sentiment-free filler.
    pub low_quality_rate: f64,
    pub anonymous_rate: f64,
    pub mix: SignalMix,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 2016,
            n_platforms: 400,
            problem_fraction: 1378.0 / 3050.0,
            start: Month::from_ym(2014, 6),
            horizon_months: 24,
            signal_strength: 1.0,
            interest_risk_coupling: 1.0,
            vocab: VocabSizes::default(),
            n_topics_true: 5,
            entities: EntityCounts::default(),
            news_per_month: 1.0,
            comments_per_month: 2.0,
            null_rate: 0.04,
            duplicate_rate: 0.05,
            low_quality_rate: 0.15,
            anonymous_rate: 0.2,
            mix: SignalMix::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_platforms < 2 {
            bail!(Config, "n_platforms must be at least 2, got {}", self.n_platforms);
        }
        if !(self.problem_fraction > 0.0 && self.problem_fraction < 1.0) {
            bail!(Config, "problem_fraction {} outside (0, 1)", self.problem_fraction);
        }
        if self.horizon_months < 3 {
            bail!(Config, "horizon_months must be at least 3");
        }
        if !(self.signal_strength >= 0.0) || !self.interest_risk_coupling.is_finite() {
            bail!(Config, "signal_strength must be non-negative");
        }
        for (name, v) in [
            ("null_rate", self.null_rate),
            ("duplicate_rate", self.duplicate_rate),
            ("low_quality_rate", self.low_quality_rate),
            ("anonymous_rate", self.anonymous_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bail!(Config, "{} {} outside [0, 1]", name, v);
            }
        }
        if !(self.news_per_month >= 0.0 && self.comments_per_month >= 0.0) {
            bail!(Config, "document rates must be non-negative");
        }
        let e = &self.entities;
        if self.n_topics_true == 0 || self.vocab.news < self.n_topics_true || self.vocab.comments == 0 {
            bail!(Config, "vocabulary must hold at least one token per topic");
        }
        if [e.people, e.positions, e.tags, e.natures, e.regions, e.guarantee_modes].contains(&0) {
            bail!(Config, "entity counts must be positive");
        }
        Ok(())
    }

    pub fn end(&self) -> Month {
        self.start.offset(self.horizon_months as i32 - 1)
    }
}

/// Latent risk and outcome per platform, for test assertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub platform_id: String,
    pub latent_risk: f64,
    pub status: Label,
    pub failure_month: Option<Month>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    pub platforms: Vec<PlatformRecord>,
    pub truth: Vec<TruthRecord>,
    /// Planted news topic-word distributions, `topics x vocab`.
    pub topic_word: Vec<Vec<f64>>,
    pub news_vocab: Vec<String>,
}

/// Probability of ending as a problem platform; its mean over uniform `r`
/// equals `f`.
pub fn problem_probability(r: f64, f: f64) -> f64 {
    if f <= 0.5 {
        2.0 * f * r
    } else {
        1.0 - 2.0 * (1.0 - f) * (1.0 - r)
    }
}

fn sub_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dirichlet<R: Rng>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / n);
    }
    v
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Token for word `j` of a vocabulary with prefix `prefix`.
fn token(prefix: &str, j: usize) -> String {
    format!("{prefix}{j:03}")
}

/// Planted topics: each topic puts most of its mass on its own block of the
/// vocabulary.
fn planted_topics<R: Rng>(rng: &mut R, topics: usize, vocab: usize, off_block: f64) -> Vec<Vec<f64>> {
    let block = vocab / topics;
    (0..topics)
        .map(|k| {
            let alpha: Vec<f64> = (0..vocab)
                .map(|w| if w / block.max(1) == k { 1.0 } else { off_block })
                .collect();
            dirichlet(rng, &alpha)
        })
        .collect()
}

/// A corpus drawn from known topic-word and document-topic distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub docs: Vec<Vec<String>>,
    pub vocab: Vec<String>,
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: Vec<Vec<f64>>,
}

/// Documents from `topics` planted multinomials over a `vocab`-token
/// vocabulary, with document mixtures drawn from a symmetric Dirichlet.
pub fn planted_topic_corpus(
    n_docs: usize,
    vocab: usize,
    topics: usize,
    doc_len: usize,
    doc_alpha: f64,
    seed: u64,
) -> Result<PlantedCorpus> {
    if topics == 0 || vocab < topics || doc_len == 0 || !(doc_alpha > 0.0) {
        bail!(Config, "invalid planted corpus shape");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_word = planted_topics(&mut rng, topics, vocab, 0.01);
    let words: Vec<String> = (0..vocab).map(|j| token("w", j)).collect();
    let mut docs = Vec::with_capacity(n_docs);
    let mut doc_topic = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let theta = dirichlet(&mut rng, &vec![doc_alpha; topics]);
        let doc = (0..doc_len)
            .map(|_| {
                let k = categorical(&mut rng, &theta);
                words[categorical(&mut rng, &topic_word[k])].clone()
            })
            .collect();
        docs.push(doc);
        doc_topic.push(theta);
    }
    Ok(PlantedCorpus { docs, vocab: words, topic_word, doc_topic })
}

struct Shared {
    topic_word: Vec<Vec<f64>>,
    news_vocab: Vec<String>,
    comment_vocab: Vec<String>,
    /// Officers with a history of failed ventures.
    bad_people: usize,
}

fn nature_key(i: usize) -> String {
    format!("nature_{i}")
}

fn region_key(i: usize) -> String {
    format!("region_{i:02}")
}

/// Generates the universe; the same config always yields the same data.
pub fn generate_universe(config: &GeneratorConfig) -> Result<Universe> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shared = Shared {
        topic_word: planted_topics(&mut rng, config.n_topics_true, config.vocab.news, 0.02),
        news_vocab: (0..config.vocab.news).map(|j| token("n", j)).collect(),
        comment_vocab: (0..config.vocab.comments).map(|j| token("c", j)).collect(),
        bad_people: (config.entities.people / 20).max(1),
    };
    let generated: Vec<(PlatformRecord, TruthRecord)> = (0..config.n_platforms)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, i as u64));
            generate_platform(config, &shared, i, &mut rng)
        })
        .collect();
    let (platforms, truth) = generated.into_iter().unzip();
    Ok(Universe { platforms, truth, topic_word: shared.topic_word, news_vocab: shared.news_vocab })
}

fn generate_platform(cfg: &GeneratorConfig, shared: &Shared, i: usize, rng: &mut ChaCha8Rng) -> (PlatformRecord, TruthRecord) {
    let s = cfg.signal_strength;
    let mix = &cfg.mix;
    let e = &cfg.entities;
    let id = format!("P{i:05}");
    let end = cfg.end();
    let latest_online = (cfg.horizon_months * 2 / 3).max(1) as i32;
    let online = cfg.start.offset(rng.random_range(0..latest_online));
    let r: f64 = rng.random();
    let problem = rng.random::<f64>() < problem_probability(r, cfg.problem_fraction);
    let failure = problem.then(|| online.offset(rng.random_range(1..=(end.0 - online.0))));
    let c = r - 0.5;

    // static numerics
    let lin = s * mix.static_linear;
    let capital = (17.5 + 0.7 * gauss(rng) - 1.2 * lin * c).exp();
    let interest = (10.5 + 8.0 * cfg.interest_risk_coupling * r + 1.5 * gauss(rng)).max(3.0);
    let staff = (4.0 + 0.8 * gauss(rng) - 0.6 * lin * c).exp().round();
    let mut static_numeric = BTreeMap::new();
    static_numeric.insert("registered_capital".to_string(), capital);
    static_numeric.insert("interest_rate".to_string(), interest);
    static_numeric.insert("staff_count".to_string(), staff);

    // categoricals: the parity of nature and region agrees for risky
    // platforms more often than for safe ones
    let nature = rng.random_range(0..e.natures);
    let p_agree = (0.5 + 0.9 * s * mix.interaction * c).clamp(0.02, 0.98);
    let want_parity = if rng.random::<f64>() < p_agree { nature % 2 } else { 1 - nature % 2 };
    let region = {
        let choices: Vec<usize> = (0..e.regions).filter(|g| g % 2 == want_parity).collect();
        *choices.choose(rng).unwrap_or(&0)
    };
    let guarantee = rng.random_range(0..e.guarantee_modes);
    let n_tags = rng.random_range(1..=3.min(e.tags));
    let risky_tags = (e.tags / 3).max(1);
    let mut tags: Vec<String> = Vec::new();
    while tags.len() < n_tags {
        let t = if rng.random::<f64>() < (0.3 + 0.5 * lin * c).clamp(0.05, 0.95) {
            rng.random_range(0..risky_tags)
        } else {
            rng.random_range(0..e.tags)
        };
        let key = format!("tag_{t:02}");
        if !tags.contains(&key) {
            tags.push(key);
        }
    }
    tags.sort();
    let mut static_categorical = BTreeMap::new();
    static_categorical.insert("nature".to_string(), CategoryValue::One(nature_key(nature)));
    static_categorical.insert("region".to_string(), CategoryValue::One(region_key(region)));
    static_categorical.insert("guarantee_mode".to_string(), CategoryValue::One(format!("guarantee_{guarantee}")));
    static_categorical.insert("tags".to_string(), CategoryValue::Many(tags));
    static_numeric.retain(|_, _| rng.random::<f64>() >= cfg.null_rate);
    static_categorical.retain(|_, _| rng.random::<f64>() >= cfg.null_rate);

    // officers
    let n_officers = rng.random_range(1..=4);
    let mut officers = Vec::new();
    let mut officer_roles = BTreeMap::new();
    for _ in 0..n_officers {
        let bad = rng.random::<f64>() < (0.6 * s * mix.officers * r * r).min(0.9);
        let k = if bad {
            rng.random_range(0..shared.bad_people)
        } else {
            rng.random_range(shared.bad_people.min(e.people - 1)..e.people)
        };
        let name = format!("person_{k:05}");
        if officers.contains(&name) {
            continue;
        }
        officer_roles.insert(name.clone(), format!("position_{:03}", rng.random_range(0..e.positions)));
        officers.push(name);
    }
    officers.sort();

    // monthly indices
    let months: Vec<Month> = (online.0..=end.0).map(Month).collect();
    let growth = 0.04 - 0.05 * lin * c;
    let volatility = 0.15 + 1.6 * s * mix.volatility * r * r;
    let burst_at = failure.map(|f| f.offset(-rng.random_range(1..=3)));
    let base = LogNormal::new(16.0, 0.8).expect("valid lognormal").sample(rng);
    let term = (6.0 - 2.0 * lin * c + 0.8 * gauss(rng)).max(1.0);
    let mut series: BTreeMap<String, Vec<(Month, f64)>> = BTreeMap::new();
    let mut level = base;
    for (t, &m) in months.iter().enumerate() {
        let failed_for = failure.filter(|f| m >= *f).map(|f| (m.0 - f.0) as f64);
        let distress = match (burst_at, failure) {
            (Some(b), Some(f)) if m >= b && m < f => 1.0,
            _ => 0.0,
        };
        if t > 0 {
            level *= (growth + 0.08 * gauss(rng)).exp();
        }
        let collapse = failed_for.map_or(1.0, |k| (-0.35 * s * mix.collapse * (k + 1.0)).exp());
        let volume = level * collapse;
        let swing = volatility * (1.0 + 2.0 * s * mix.distress * distress + 1.5 * s * mix.failed_swing * failed_for.map_or(0.0, |_| 1.0));
        // percent of volume
        let inflow = 10.0 * swing * gauss(rng);
        let rate_now = interest + 0.4 * gauss(rng) + 1.5 * s * mix.distress * distress;
        let investors = (volume / 2.0e4 * (1.0 + 0.1 * gauss(rng))).max(0.0).round();
        let borrowers = (volume / (1.0e5 * (1.0 + lin * r)) * (1.0 + 0.1 * gauss(rng))).max(0.0).round();
        let loans = (borrowers * (1.5 + 0.3 * gauss(rng))).max(0.0).round();
        let term_now = (term + 0.3 * gauss(rng)).max(0.5);
        for (name, v) in INDEX_CHANNELS.iter().zip([volume, rate_now, inflow, investors, borrowers, loans, term_now]) {
            series.entry(name.to_string()).or_default().push((m, v));
        }
    }
    let index_series = series.into_iter().map(|(k, points)| (k, MonthlySeries { points })).collect();

    // text
    let topics = cfg.n_topics_true;
    let mut news_docs = Vec::new();
    let mut comment_docs = Vec::new();
    let popularity = LogNormal::new(0.0, 0.7).expect("valid lognormal").sample(rng);
    for &m in &months {
        let failed = failure.is_some_and(|f| m >= f);
        let distress = burst_at.is_some_and(|b| m >= b) && !failed;
        let stress = s
            * (0.6 * mix.text_risk * c
                + if failed { 0.5 * mix.failed_text } else { 0.0 }
                + if distress { 0.4 * mix.distress } else { 0.0 });

        let n_news = poisson(rng, cfg.news_per_month * (1.0 + if failed || distress { s * mix.failed_text } else { 0.0 }));
        for j in 0..n_news {
            let mut alpha = vec![0.3; topics];
            alpha[0] += (3.0 * stress).max(0.0);
            let theta = dirichlet(rng, &alpha);
            let len = rng.random_range(25..45);
            let mut text: Vec<String> = (0..len)
                .map(|_| {
                    let k = categorical(rng, &theta);
                    shared.news_vocab[categorical(rng, &shared.topic_word[k])].clone()
                })
                .collect();
            push_sentiment(rng, &mut text, 3, (0.35 + 0.5 * stress).clamp(0.05, 0.95));
            text.shuffle(rng);
            let doc = TextDocument {
                doc_id: format!("N-{id}-{m}-{j}"),
                platform_id: id.clone(),
                month: m,
                day: rng.random_range(1..=28),
                text,
                kind: DocKind::News,
                author: None,
                ugc_score: None,
            };
            maybe_duplicate(rng, cfg.duplicate_rate, &doc, &mut news_docs);
            news_docs.push(doc);
        }

        let n_comments = poisson(rng, cfg.comments_per_month * popularity * (1.0 + if failed { 2.0 * s * mix.failed_text } else { 0.0 }));
        for j in 0..n_comments {
            let text = if rng.random::<f64>() < cfg.low_quality_rate {
                (0..rng.random_range(1..3)).map(|_| shared.comment_vocab[rng.random_range(0..5)].clone()).collect()
            } else {
                let len = rng.random_range(8..20);
                let mut t: Vec<String> = (0..len)
                    .map(|_| shared.comment_vocab[rng.random_range(0..shared.comment_vocab.len())].clone())
                    .collect();
                push_sentiment(rng, &mut t, 2, (0.3 + 0.6 * stress).clamp(0.05, 0.95));
                t.shuffle(rng);
                t
            };
            let author = (rng.random::<f64>() >= cfg.anonymous_rate).then(|| format!("user_{:04}", rng.random_range(0..2000)));
            let doc = TextDocument {
                doc_id: format!("C-{id}-{m}-{j}"),
                platform_id: id.clone(),
                month: m,
                day: rng.random_range(1..=28),
                text,
                kind: DocKind::Comment,
                author,
                ugc_score: None,
            };
            maybe_duplicate(rng, cfg.duplicate_rate, &doc, &mut comment_docs);
            comment_docs.push(doc);
        }
    }

    let status = if problem { Label::Problem } else { Label::Normal };
    let record = PlatformRecord {
        id: id.clone(),
        name: format!("Platform {i}"),
        online_month: online,
        status,
        failure_month: failure,
        static_numeric,
        static_categorical,
        index_series,
        news_docs,
        comment_docs,
        officers,
        officer_roles,
    };
    let truth = TruthRecord { platform_id: id, latent_risk: r, status, failure_month: failure };
    (record, truth)
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

fn push_sentiment<R: Rng>(rng: &mut R, text: &mut Vec<String>, n: usize, p_negative: f64) {
    for _ in 0..n {
        let list = if rng.random::<f64>() < p_negative { DEFAULT_NEGATIVE } else { DEFAULT_POSITIVE };
        text.push(list.choose(rng).expect("non-empty lexicon").to_string());
    }
}

fn maybe_duplicate<R: Rng>(rng: &mut R, rate: f64, doc: &TextDocument, out: &mut Vec<TextDocument>) {
    if rng.random::<f64>() < rate {
        let mut dup = doc.clone();
        dup.doc_id.push_str("-dup");
        out.push(dup);
    }
}
