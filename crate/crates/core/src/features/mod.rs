//! Feature extraction: topic mixes, sentiment counts, graph features and
//! windowed monthly matrices.

pub mod bundle;
pub mod graph;
pub mod lda;
pub mod sentiment;

pub use bundle::{build_feature_bundle, build_month_features, signed_log1p, stable_hash, CategoryVocab, FeatureConfig, FeatureScaler, MonthFeatures};
pub use graph::{kg_build, kg_features, KnowledgeGraph, KG_FEATURE_NAMES};
pub use lda::{lda_fit, lda_infer, top_words, LdaConfig, LdaModel};
pub use sentiment::{sentiment_score, Sentiment, SentimentLexicon};
