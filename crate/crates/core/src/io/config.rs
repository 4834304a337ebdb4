//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cleaning::{CleaningConfig, FieldDefaults};
use crate::domain::{parse_month_range, Month};
use crate::error::{bail, Error, Result};
use crate::eval::EvalConfig;
use crate::features::{FeatureConfig, SentimentLexicon};
use crate::nn::{NetConfig, TrainConfig};
use crate::synth::GeneratorConfig;

pub const ENV_SEED: &str = "OMNIRANK_SEED";
pub const ENV_DATA: &str = "OMNIRANK_DATA";
pub const ENV_OUT: &str = "OMNIRANK_OUT";
pub const ENV_LEXICON: &str = "OMNIRANK_LEXICON";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw dataset directory.
    pub data: PathBuf,
    /// Artifact directory.
    pub out: PathBuf,
    /// JSON sentiment lexicon; the built-in one when absent.
    pub lexicon: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { data: "data".into(), out: "out".into(), lexicon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DashboardConfig {
    /// Platforms kept from the latest month's ranking.
    pub limit: usize,
    /// Similar platforms listed per platform.
    pub related: usize,
}

impl Default for DashboardConfig {
    fn default() -> Self {
        DashboardConfig { limit: 100, related: 5 }
    }
}

/// Everything a pipeline run needs. The top-level `seed` drives every
/// seeded stage; seeds inside sections are overwritten by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Evaluation cutoffs, `YYYY-MM` or `YYYY-MM:YYYY-MM`.
    pub months: String,
    pub paths: Paths,
    pub generator: GeneratorConfig,
    pub cleaning: CleaningConfig,
    pub defaults: FieldDefaults,
    pub features: FeatureConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub dashboard: DashboardConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            months: "2015-11:2016-04".into(),
            paths: Paths::default(),
            generator: GeneratorConfig::default(),
            cleaning: CleaningConfig::default(),
            defaults: FieldDefaults::default(),
            features: FeatureConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            dashboard: DashboardConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config file, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Only the seed and the paths can come from the environment.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(s) = var(ENV_SEED) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_SEED} must be an unsigned integer, got '{s}'")))?;
        }
        if let Some(p) = var(ENV_DATA) {
            self.paths.data = p.into();
        }
        if let Some(p) = var(ENV_OUT) {
            self.paths.out = p.into();
        }
        if let Some(p) = var(ENV_LEXICON) {
            self.paths.lexicon = Some(p.into());
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Copy with the top-level seed pushed into every section.
    pub fn seeded(&self) -> RunConfig {
        let mut c = self.clone();
        c.generator.seed = self.seed;
        c.features.lda.seed = self.seed;
        c.train.seed = self.seed;
        c.eval.seed = self.seed;
        c
    }

    pub fn eval_months(&self) -> Result<Vec<Month>> {
        parse_month_range(&self.months).map_err(|e| Error::Config(format!("months: {e}")))
    }

    pub fn lexicon(&self) -> Result<SentimentLexicon> {
        match &self.paths.lexicon {
            Some(p) => SentimentLexicon::load(p).map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(format!("lexicon {}: {}", p.display(), other)),
            }),
            None => Ok(SentimentLexicon::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.eval_months()?;
        let c = &self.cleaning;
        if !(0.0..=1.0).contains(&c.ugc_threshold) {
            bail!(Config, "cleaning.ugc_threshold must lie in [0, 1], got {}", c.ugc_threshold);
        }
        if !(c.dedup_jaccard > 0.0 && c.dedup_jaccard <= 1.0) {
            bail!(Config, "cleaning.dedup_jaccard must lie in (0, 1], got {}", c.dedup_jaccard);
        }
        let f = &self.features;
        if f.window == 0 {
            bail!(Config, "features.window must be positive");
        }
        if f.categorical_fields.is_empty() {
            bail!(Config, "features.categorical_fields must not be empty");
        }
        if f.lda.topics == 0 || f.lda.iterations == 0 {
            bail!(Config, "features.lda needs at least one topic and one iteration");
        }
        if !(f.lda.alpha() > 0.0 && f.lda.eta > 0.0) {
            bail!(Config, "features.lda priors must be positive");
        }
        let e = &self.eval;
        if e.folds < 2 {
            bail!(Config, "eval.folds must be at least 2");
        }
        if !(e.normal_fraction > 0.0 && e.normal_fraction < 1.0) {
            bail!(Config, "eval.normal_fraction must lie in (0, 1)");
        }
        if e.histogram_bins == 0 {
            bail!(Config, "eval.histogram_bins must be positive");
        }
        if self.dashboard.related == 0 {
            bail!(Config, "dashboard.related must be positive");
        }
        self.train.validate()?;
        self.generator.validate()?;
        Ok(())
    }
}
