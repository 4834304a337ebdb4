//! Lexicon sentiment scorer with single-token negation scope.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

pub const DEFAULT_POSITIVE: &[&str] = &[
    "good", "safe", "stable", "reliable", "fast", "recommend", "profit", "trust", "steady", "transparent",
    "secure", "smooth", "satisfied", "strong", "compliant",
];
pub const DEFAULT_NEGATIVE: &[&str] = &[
    "bad", "delay", "fraud", "default", "overdue", "risk", "scam", "frozen", "loss", "complaint",
    "collapse", "runaway", "investigation", "unpaid", "suspicious",
];
pub const DEFAULT_NEGATION: &[&str] = &["not", "no", "never"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
    negation: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sentiment {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentimentOutcome {
    pub sentiment: Sentiment,
    pub polarity: i64,
    pub hits: usize,
    /// No lexicon hit at all; the tie rule decided.
    pub low_confidence: bool,
}

impl SentimentLexicon {
    pub fn new<I, S>(positive: I, negative: I, negation: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let positive: BTreeSet<String> = positive.into_iter().map(Into::into).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(Into::into).collect();
        let negation = negation.into_iter().map(Into::into).collect();
        if let Some(w) = positive.intersection(&negative).next() {
            bail!(Config, "token '{}' is both positive and negative", w);
        }
        Ok(SentimentLexicon { positive, negative, negation })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lex: SentimentLexicon = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(w) = lex.positive.intersection(&lex.negative).next() {
            bail!(Config, "token '{}' is both positive and negative", w);
        }
        Ok(lex)
    }

    pub fn is_positive(&self, token: &str) -> bool {
        self.positive.contains(token)
    }

    pub fn is_negative(&self, token: &str) -> bool {
        self.negative.contains(token)
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negation.contains(token)
    }

    /// Signed hit count and number of hits.
    pub fn polarity<S: AsRef<str>>(&self, doc: &[S]) -> (i64, usize) {
        let mut polarity = 0i64;
        let mut hits = 0usize;
        for (i, tok) in doc.iter().enumerate() {
            let tok = tok.as_ref();
            let sign = if self.is_positive(tok) {
                1
            } else if self.is_negative(tok) {
                -1
            } else {
                continue;
            };
            let negated = i > 0 && self.is_negation(doc[i - 1].as_ref());
            polarity += if negated { -sign } else { sign };
            hits += 1;
        }
        (polarity, hits)
    }

    /// Strength of the expressed attitude in `[0, 1]`: |polarity| / hits.
    pub fn clarity<S: AsRef<str>>(&self, doc: &[S]) -> f64 {
        let (p, hits) = self.polarity(doc);
        if hits == 0 {
            0.0
        } else {
            p.unsigned_abs() as f64 / hits as f64
        }
    }
}

impl Default for SentimentLexicon {
    fn default() -> Self {
        SentimentLexicon::new(
            DEFAULT_POSITIVE.iter().copied(),
            DEFAULT_NEGATIVE.iter().copied(),
            DEFAULT_NEGATION.iter().copied(),
        )
        .expect("built-in lexicon is disjoint")
    }
}

/// Binary sentiment; a polarity of zero counts as positive.
pub fn sentiment_score<S: AsRef<str>>(doc: &[S], lexicon: &SentimentLexicon) -> SentimentOutcome {
    let (polarity, hits) = lexicon.polarity(doc);
    SentimentOutcome {
        sentiment: if polarity >= 0 { Sentiment::Positive } else { Sentiment::Negative },
        polarity,
        hits,
        low_confidence: hits == 0,
    }
}
