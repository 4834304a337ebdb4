//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub eta: f64,
    pub iterations: usize,
    pub infer_iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 5,
            alpha: None,
            eta: 0.01,
            iterations: 500,
            infer_iterations: 50,
            seed: 7,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

/// Trained topic model: vocabulary plus topic-word assignment counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub topics: usize,
    pub alpha: f64,
    pub eta: f64,
    pub vocab: Vec<String>,
    /// `topics x vocab.len()` counts, row-major.
    pub topic_word: Vec<u64>,
    pub topic_totals: Vec<u64>,
    pub iterations: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Topic proportions of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMix {
    pub proportions: Vec<f64>,
    /// The document had no in-vocabulary token and got the uniform mix.
    pub uniform_fallback: bool,
}

impl LdaModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn word_index(&self, token: &str) -> Option<usize> {
        if self.index.is_empty() && !self.vocab.is_empty() {
            return self.vocab.iter().position(|w| w == token);
        }
        self.index.get(token).copied()
    }

    /// Rebuilds the token lookup after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    /// Smoothed word distribution of `topic`: `(n_kw + eta) / (n_k + V eta)`.
    pub fn topic_distribution(&self, topic: usize) -> Vec<f64> {
        let v = self.vocab.len();
        let denom = self.topic_totals[topic] as f64 + v as f64 * self.eta;
        self.topic_word[topic * v..(topic + 1) * v]
            .iter()
            .map(|&c| (c as f64 + self.eta) / denom)
            .collect()
    }

    fn phi(&self) -> Vec<f64> {
        (0..self.topics).flat_map(|k| self.topic_distribution(k)).collect()
    }

    /// Corpus perplexity with per-document mixes inferred against the
    /// fitted topics.
    pub fn perplexity(&self, docs: &[Vec<String>], iters: usize, seed: u64) -> f64 {
        let phi = self.phi();
        let v = self.vocab.len();
        let mut log_lik = 0.0;
        let mut n = 0usize;
        for (d, doc) in docs.iter().enumerate() {
            let mix = lda_infer(self, doc, iters, seed.wrapping_add(d as u64));
            for tok in doc {
                if let Some(w) = self.word_index(tok) {
                    let p: f64 = (0..self.topics).map(|k| mix.proportions[k] * phi[k * v + w]).sum();
                    log_lik += p.ln();
                    n += 1;
                }
            }
        }
        if n == 0 {
            return f64::NAN;
        }
        (-log_lik / n as f64).exp()
    }
}

fn sample_discrete(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Fits `topics` topics to tokenized documents with `iters` Gibbs sweeps.
pub fn lda_fit(docs: &[Vec<String>], topics: usize, alpha: f64, eta: f64, iters: usize, seed: u64) -> Result<LdaModel> {
    if docs.is_empty() {
        bail!(Precondition, "no documents to fit");
    }
    if topics == 0 {
        bail!(Precondition, "topic count must be at least 1");
    }
    if !(alpha > 0.0 && eta > 0.0) {
        bail!(Precondition, "priors must be positive (alpha {}, eta {})", alpha, eta);
    }
    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        bail!(Data, "empty vocabulary");
    }
    if topics > vocab.len() {
        bail!(Precondition, "{} topics exceed {} distinct tokens", topics, vocab.len());
    }
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let v = vocab.len();
    let words: Vec<Vec<usize>> = docs.iter().map(|d| d.iter().map(|t| index[t]).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topic_word = vec![0u64; topics * v];
    let mut topic_totals = vec![0u64; topics];
    let mut doc_topic = vec![0u64; docs.len() * topics];
    let mut assign: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let z: Vec<usize> = ws.iter().map(|_| rng.random_range(0..topics)).collect();
        for (&w, &k) in ws.iter().zip(&z) {
            topic_word[k * v + w] += 1;
            topic_totals[k] += 1;
            doc_topic[d * topics + k] += 1;
        }
        assign.push(z);
    }

    let v_eta = v as f64 * eta;
    let mut weights = vec![0.0; topics];
    for _ in 0..iters {
        for (d, ws) in words.iter().enumerate() {
            let dt = &mut doc_topic[d * topics..(d + 1) * topics];
            for (i, &w) in ws.iter().enumerate() {
                let old = assign[d][i];
                topic_word[old * v + w] -= 1;
                topic_totals[old] -= 1;
                dt[old] -= 1;
                for k in 0..topics {
                    weights[k] = (dt[k] as f64 + alpha) * (topic_word[k * v + w] as f64 + eta)
                        / (topic_totals[k] as f64 + v_eta);
                }
                let new = sample_discrete(&mut rng, &weights);
                topic_word[new * v + w] += 1;
                topic_totals[new] += 1;
                dt[new] += 1;
                assign[d][i] = new;
            }
        }
    }

    Ok(LdaModel {
        topics,
        alpha,
        eta,
        vocab,
        topic_word,
        topic_totals,
        iterations: iters,
        index,
    })
}

/// Topic proportions of `doc` under a fitted model: Gibbs sampling with the
/// topics held fixed, read out as `(n_dk + alpha) / (n_d + K alpha)`.
/// Out-of-vocabulary tokens are skipped.
pub fn lda_infer<S: AsRef<str>>(model: &LdaModel, doc: &[S], iters: usize, seed: u64) -> TopicMix {
    let k = model.topics;
    let words: Vec<usize> = doc.iter().filter_map(|t| model.word_index(t.as_ref())).collect();
    if words.is_empty() {
        return TopicMix {
            proportions: vec![1.0 / k as f64; k],
            uniform_fallback: true,
        };
    }
    let v = model.vocab.len();
    let phi: Vec<f64> = {
        let mut out = vec![0.0; k * v];
        for t in 0..k {
            out[t * v..(t + 1) * v].copy_from_slice(&model.topic_distribution(t));
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; k];
    let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k)).collect();
    for &t in &z {
        counts[t] += 1;
    }
    let mut weights = vec![0.0; k];
    for _ in 0..iters {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            for t in 0..k {
                weights[t] = (counts[t] as f64 + model.alpha) * phi[t * v + w];
            }
            z[i] = sample_discrete(&mut rng, &weights);
            counts[z[i]] += 1;
        }
    }
    let denom = words.len() as f64 + k as f64 * model.alpha;
    let mut proportions: Vec<f64> = counts.iter().map(|&c| (c as f64 + model.alpha) / denom).collect();
    // exact renormalization guards the sum-to-one contract against rounding
    let s: f64 = proportions.iter().sum();
    proportions.iter_mut().for_each(|p| *p /= s);
    TopicMix {
        proportions,
        uniform_fallback: false,
    }
}

/// The `n` most probable tokens of `topic`, ties broken by token ascending.
pub fn top_words(model: &LdaModel, topic: usize, n: usize) -> Result<Vec<String>> {
    if topic >= model.topics {
        bail!(Precondition, "topic {} out of range (K = {})", topic, model.topics);
    }
    let v = model.vocab.len();
    let row = &model.topic_word[topic * v..(topic + 1) * v];
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| row[b].cmp(&row[a]).then_with(|| model.vocab[a].cmp(&model.vocab[b])));
    Ok(order.into_iter().take(n).map(|i| model.vocab[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn single_topic_is_smoothed_corpus_frequency() {
        let docs = vec![toks("a a b"), toks("a c"), toks("b a")];
        let eta = 0.01;
        let m = lda_fit(&docs, 1, 50.0, eta, 5, 1).unwrap();
        let dist = m.topic_distribution(0);
        // counts: a=4, b=2, c=1, N=7, V=3
        let expect = |c: f64| (c + eta) / (7.0 + 3.0 * eta);
        assert_eq!(dist, vec![expect(4.0), expect(2.0), expect(1.0)]);
        assert_eq!(lda_infer(&m, &toks("a b"), 10, 3).proportions, vec![1.0]);
    }

    #[test]
    fn fit_errors() {
        assert!(lda_fit(&[], 2, 1.0, 0.1, 1, 0).is_err());
        assert!(lda_fit(&[toks("a b")], 3, 1.0, 0.1, 1, 0).is_err());
        assert!(lda_fit(&[vec![]], 1, 1.0, 0.1, 1, 0).is_err());
        assert!(lda_fit(&[toks("a")], 0, 1.0, 0.1, 1, 0).is_err());
    }

    #[test]
    fn oov_document_gets_uniform_mix() {
        let docs = vec![toks("a b c d e f"), toks("g h i j")];
        let m = lda_fit(&docs, 5, 10.0, 0.01, 3, 1).unwrap();
        let mix = lda_infer(&m, &toks("zz yy"), 10, 1);
        assert!(mix.uniform_fallback);
        assert_eq!(mix.proportions, vec![0.2; 5]);
    }

    #[test]
    fn top_words_cases() {
        let docs = vec![toks("a a a a a b b b")];
        let m = lda_fit(&docs, 1, 1.0, 0.01, 2, 0).unwrap();
        assert_eq!(top_words(&m, 0, 1).unwrap(), vec!["a"]);
        assert!(top_words(&m, 0, 0).unwrap().is_empty());
        assert_eq!(top_words(&m, 0, 10).unwrap(), vec!["a", "b"]);
        assert!(top_words(&m, 1, 1).is_err());
        // equal counts fall back to token order
        let m = lda_fit(&[toks("z y x")], 1, 1.0, 0.01, 2, 0).unwrap();
        assert_eq!(top_words(&m, 0, 3).unwrap(), vec!["x", "y", "z"]);
    }

    #[test]
    fn fit_is_deterministic() {
        let docs = vec![toks("a b c a"), toks("d e f d"), toks("a b e f")];
        let m1 = lda_fit(&docs, 2, 0.5, 0.01, 20, 9).unwrap();
        let m2 = lda_fit(&docs, 2, 0.5, 0.01, 20, 9).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn json_round_trip_restores_lookup() {
        let m = lda_fit(&[toks("a b c"), toks("c d")], 2, 0.5, 0.01, 5, 2).unwrap();
        let mut back: LdaModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back.word_index("c"), m.word_index("c"));
        assert_eq!(back.topic_word, m.topic_word);
    }
}
