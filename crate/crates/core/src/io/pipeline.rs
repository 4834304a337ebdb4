//! clean → features → train → evaluate → rank, with artifacts on disk.

use std::fmt;
use std::path::{Path, PathBuf};

use super::checkpoint::save_checkpoint;
use super::config::RunConfig;
use super::dashboard::{RankingsFile, ReportsFile, CLEANING_SUMMARY_FILE, CLEAN_DIR, RANKINGS_FILE, REPORTS_FILE};
use super::files::{read_dataset, write_dataset, write_json, write_jsonl, SCHEMA_VERSION};
use crate::cleaning::{clean_dataset, CleaningSummary};
use crate::domain::{Dataset, FeatureBundle, Month};
use crate::error::{Error, Result};
use crate::eval::{rolling_evaluate, EvaluationReport, OmniRankFactory};
use crate::features::{build_month_features, SentimentLexicon};
use crate::nn::TrainedModel;

pub const BUNDLES_FILE: &str = "bundles.jsonl";
pub const MODEL_DIR: &str = "model";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Clean,
    Features,
    Train,
    Evaluate,
    Rank,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Clean => "clean",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Rank => "rank",
        };
        f.write_str(s)
    }
}

/// An error tagged with the pipeline stage it halted.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage:{}: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub out: PathBuf,
    pub cleaning: CleaningSummary,
    pub reports: Vec<EvaluationReport>,
    pub rankings: RankingsFile,
}

/// Cleans a dataset directory into `out/clean` plus a summary file.
pub fn clean_stage(data: &Path, out: &Path, cfg: &RunConfig, lexicon: &SentimentLexicon) -> Result<(Dataset, CleaningSummary)> {
    let raw = read_dataset(data)?;
    let (clean, summary) = clean_dataset(&raw, &cfg.defaults, lexicon, &cfg.cleaning)?;
    write_dataset(&out.join(CLEAN_DIR), &clean)?;
    write_json(&out.join(CLEANING_SUMMARY_FILE), &summary)?;
    Ok((clean, summary))
}

/// Bundles for every platform online at `cutoff`, labelled as of `cutoff`
/// and built from nothing dated later.
pub fn features_stage(dataset: &Dataset, cutoff: Month, cfg: &RunConfig, lexicon: &SentimentLexicon) -> Result<Vec<FeatureBundle>> {
    let view = dataset.truncated(cutoff, cutoff);
    Ok(build_month_features(&view, cutoff, &cfg.features, lexicon)?.bundles)
}

pub fn train_stage(bundles: &[FeatureBundle], cfg: &RunConfig) -> Result<TrainedModel> {
    TrainedModel::fit(bundles, &cfg.net, &cfg.train)
}

pub fn evaluate_stage(
    dataset: &Dataset,
    months: &[Month],
    cfg: &RunConfig,
    lexicon: &SentimentLexicon,
) -> Result<Vec<EvaluationReport>> {
    let factory = OmniRankFactory { net: cfg.net.clone(), train: cfg.train.clone() };
    rolling_evaluate(dataset, &factory, months, &cfg.features, lexicon, &cfg.eval)
}

/// Runs every stage in order. The final model is trained on the latest
/// evaluation month; rankings come from the out-of-fold evaluation scores.
pub fn run_pipeline(config: &RunConfig) -> std::result::Result<PipelineOutput, StageError> {
    config.validate().at(Stage::Config)?;
    let cfg = config.seeded();
    let months = cfg.eval_months().at(Stage::Config)?;
    let lexicon = cfg.lexicon().at(Stage::Config)?;
    let out = cfg.paths.out.clone();
    std::fs::create_dir_all(&out).map_err(Error::from).at(Stage::Config)?;
    std::fs::write(out.join(CONFIG_FILE), cfg.to_toml().at(Stage::Config)?)
        .map_err(Error::from)
        .at(Stage::Config)?;

    log::info!("cleaning {}", cfg.paths.data.display());
    let (dataset, cleaning) = clean_stage(&cfg.paths.data, &out, &cfg, &lexicon).at(Stage::Clean)?;

    let last = *months.iter().max().expect("month range is never empty");
    log::info!("building features at {last}");
    let bundles = features_stage(&dataset, last, &cfg, &lexicon).at(Stage::Features)?;
    write_jsonl(&out.join(BUNDLES_FILE), &bundles).at(Stage::Features)?;

    log::info!("training on {} bundles", bundles.len());
    let model = train_stage(&bundles, &cfg).at(Stage::Train)?;
    save_checkpoint(&out.join(MODEL_DIR), &model).at(Stage::Train)?;

    log::info!("evaluating {} cutoffs", months.len());
    let reports = evaluate_stage(&dataset, &months, &cfg, &lexicon).at(Stage::Evaluate)?;
    write_json(&out.join(REPORTS_FILE), &ReportsFile { schema_version: SCHEMA_VERSION, reports: reports.clone() })
        .at(Stage::Evaluate)?;

    let rankings = RankingsFile::from_reports(&reports);
    write_json(&out.join(RANKINGS_FILE), &rankings).at(Stage::Rank)?;
    Ok(PipelineOutput { out, cleaning, reports, rankings })
}
