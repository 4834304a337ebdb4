//! Static JSON bundle consumed by the investor dashboard.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::DashboardConfig;
use super::files::{read_dataset, read_json, write_json, SCHEMA_VERSION};
use crate::cleaning::CleaningSummary;
use crate::domain::{label_at, CategoryValue, Dataset, Label, Month, PlatformRecord};
use crate::error::{bail, Result};
use crate::eval::{rank_platforms, EvaluationReport, RankedPlatform};
use crate::features::graph::TAGS_FIELD;
use crate::features::{kg_build, kg_features, KG_FEATURE_NAMES};

pub const RANKINGS_FILE: &str = "rankings.json";
pub const PLATFORMS_FILE: &str = "platforms.json";
pub const SERIES_FILE: &str = "series.json";
pub const REPORTS_FILE: &str = "reports.json";
pub const RELATED_FILE: &str = "related.json";
pub const CLEAN_DIR: &str = "clean";
pub const CLEANING_SUMMARY_FILE: &str = "cleaning_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRanking {
    pub cutoff_month: Month,
    pub rankings: Vec<RankedPlatform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingsFile {
    pub schema_version: u32,
    pub months: Vec<MonthRanking>,
}

impl RankingsFile {
    /// One ranking per report, in report order.
    pub fn from_reports(reports: &[EvaluationReport]) -> Self {
        RankingsFile {
            schema_version: SCHEMA_VERSION,
            months: reports
                .iter()
                .map(|r| MonthRanking { cutoff_month: r.cutoff_month, rankings: rank_platforms(&r.scores) })
                .collect(),
        }
    }

    pub fn latest(&self) -> Option<&MonthRanking> {
        self.months.iter().max_by_key(|m| m.cutoff_month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportsFile {
    pub schema_version: u32,
    pub reports: Vec<EvaluationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub platform_id: String,
    pub name: String,
    pub online_month: Month,
    /// Status as known at the latest cutoff.
    pub status: Label,
    pub failure_month: Option<Month>,
    pub static_numeric: BTreeMap<String, f64>,
    pub static_categorical: BTreeMap<String, CategoryValue>,
    pub kg: BTreeMap<String, f64>,
    /// Static fields that were filled from defaults during cleaning.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformsFile {
    pub schema_version: u32,
    pub cutoff_month: Option<Month>,
    pub platforms: Vec<PlatformProfile>,
}

/// Monthly values for charting; `values[i][j]` is channel `j` in month `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSeries {
    pub platform_id: String,
    pub months: Vec<Month>,
    pub channels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub schema_version: u32,
    pub series: Vec<PlatformSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similar {
    pub platform_id: String,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedEntry {
    pub platform_id: String,
    pub tags: Vec<String>,
    pub similar: Vec<Similar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedFile {
    pub schema_version: u32,
    pub related: Vec<RelatedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardBundle {
    pub rankings: RankingsFile,
    pub platforms: PlatformsFile,
    pub series: SeriesFile,
    pub reports: ReportsFile,
    pub related: RelatedFile,
}

const NEWS_COUNT: &str = "news_count";
const COMMENT_COUNT: &str = "comment_count";

fn tags_of(p: &PlatformRecord) -> Vec<String> {
    p.static_categorical
        .get(TAGS_FIELD)
        .map(|v| v.values().into_iter().map(String::from).collect())
        .unwrap_or_default()
}

fn series_of(p: &PlatformRecord, through: Month) -> PlatformSeries {
    let mut channels: Vec<String> = p.index_series.keys().cloned().collect();
    channels.push(NEWS_COUNT.into());
    channels.push(COMMENT_COUNT.into());
    let mut months = Vec::new();
    let mut values = Vec::new();
    let mut m = p.online_month;
    while m <= through {
        let mut row: Vec<Option<f64>> = p.index_series.values().map(|s| s.value_at(m)).collect();
        row.push(Some(p.news_docs.iter().filter(|d| d.month == m).count() as f64));
        row.push(Some(p.comment_docs.iter().filter(|d| d.month == m).count() as f64));
        months.push(m);
        values.push(row);
        m = m.next();
    }
    PlatformSeries { platform_id: p.id.clone(), months, channels, values }
}

/// Assembles the bundle for the top `limit` platforms of the latest ranked
/// month. Earlier months, reports and similarity lists are restricted to the
/// same platforms so every id resolves.
pub fn build_dashboard(
    dataset: &Dataset,
    cleaning: &CleaningSummary,
    rankings: &RankingsFile,
    reports: &[EvaluationReport],
    config: &DashboardConfig,
) -> Result<DashboardBundle> {
    let latest = rankings.latest();
    let cutoff = latest.map(|m| m.cutoff_month);
    let top: Vec<&RankedPlatform> = latest.map(|m| m.rankings.iter().take(config.limit).collect()).unwrap_or_default();
    if let Some(l) = latest {
        if l.rankings.len() < config.limit {
            log::warn!("only {} ranked platforms, fewer than the limit {}; exporting all", l.rankings.len(), config.limit);
        }
    }
    let selected: HashSet<&str> = top.iter().map(|r| r.platform_id.as_str()).collect();

    let mut records: Vec<&PlatformRecord> = Vec::with_capacity(top.len());
    for r in &top {
        match dataset.get(&r.platform_id) {
            Some(p) => records.push(p),
            None => bail!(Data, "ranked platform {} is not in the dataset", r.platform_id),
        }
    }

    let mut profiles = Vec::with_capacity(records.len());
    let mut series = Vec::with_capacity(records.len());
    let mut related = Vec::with_capacity(records.len());
    if let Some(cutoff) = cutoff {
        let view = dataset.truncated(cutoff, cutoff);
        let graph = kg_build(&view.platforms)?;
        let problem_ids: HashSet<String> = view
            .platforms
            .iter()
            .filter(|p| p.status == Label::Problem)
            .map(|p| p.id.clone())
            .collect();
        for p in &records {
            let kg = kg_features(&graph, &p.id, &problem_ids)?;
            let status = label_at(p, cutoff)?;
            profiles.push(PlatformProfile {
                platform_id: p.id.clone(),
                name: p.name.clone(),
                online_month: p.online_month,
                status,
                failure_month: p.failure_month.filter(|f| *f <= cutoff),
                static_numeric: p.static_numeric.clone(),
                static_categorical: p.static_categorical.clone(),
                kg: KG_FEATURE_NAMES.iter().map(|n| n.to_string()).zip(kg).collect(),
                missing: cleaning.missing_fields.get(&p.id).cloned().unwrap_or_default(),
            });
            series.push(series_of(p, cutoff));
        }
        let chosen: Vec<PlatformRecord> = records
            .iter()
            .map(|p| PlatformRecord {
                news_docs: Vec::new(),
                comment_docs: Vec::new(),
                index_series: BTreeMap::new(),
                ..(*p).clone()
            })
            .collect();
        let local = kg_build(&chosen)?;
        for p in &records {
            let similar = local
                .most_similar(&p.id, config.related)?
                .into_iter()
                .map(|(platform_id, jaccard)| Similar { platform_id, jaccard })
                .collect();
            related.push(RelatedEntry { platform_id: p.id.clone(), tags: tags_of(p), similar });
        }
    }

    let months = rankings
        .months
        .iter()
        .map(|m| MonthRanking {
            cutoff_month: m.cutoff_month,
            rankings: m.rankings.iter().filter(|r| selected.contains(r.platform_id.as_str())).cloned().collect(),
        })
        .collect();
    let reports = reports
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.scores.retain(|s| selected.contains(s.platform_id.as_str()));
            r
        })
        .collect();
    let bundle = DashboardBundle {
        rankings: RankingsFile { schema_version: SCHEMA_VERSION, months },
        platforms: PlatformsFile { schema_version: SCHEMA_VERSION, cutoff_month: cutoff, platforms: profiles },
        series: SeriesFile { schema_version: SCHEMA_VERSION, series },
        reports: ReportsFile { schema_version: SCHEMA_VERSION, reports },
        related: RelatedFile { schema_version: SCHEMA_VERSION, related },
    };
    validate_dashboard(&bundle)?;
    Ok(bundle)
}

/// Checks versions, ranking order, score ranges and that every referenced
/// platform has a profile.
pub fn validate_dashboard(b: &DashboardBundle) -> Result<()> {
    let versions = [
        (RANKINGS_FILE, b.rankings.schema_version),
        (PLATFORMS_FILE, b.platforms.schema_version),
        (SERIES_FILE, b.series.schema_version),
        (REPORTS_FILE, b.reports.schema_version),
        (RELATED_FILE, b.related.schema_version),
    ];
    for (file, v) in versions {
        if v != SCHEMA_VERSION {
            bail!(Schema, "{} has schema version {}, expected {}", file, v, SCHEMA_VERSION);
        }
    }
    let mut known = BTreeSet::new();
    for p in &b.platforms.platforms {
        if !known.insert(p.platform_id.as_str()) {
            bail!(Schema, "{}: duplicate platform {}", PLATFORMS_FILE, p.platform_id);
        }
    }
    let resolve = |file: &str, id: &str| -> Result<()> {
        if known.contains(id) {
            Ok(())
        } else {
            bail!(Schema, "{}: platform {} has no entry in {}", file, id, PLATFORMS_FILE)
        }
    };
    for m in &b.rankings.months {
        for w in m.rankings.windows(2) {
            if w[0].rank >= w[1].rank || w[0].score < w[1].score {
                bail!(Schema, "{}: month {} is not in rank order", RANKINGS_FILE, m.cutoff_month);
            }
        }
        for r in &m.rankings {
            if !(0.0..=1.0).contains(&r.score) {
                bail!(Schema, "{}: score {} of {} outside [0, 1]", RANKINGS_FILE, r.score, r.platform_id);
            }
            resolve(RANKINGS_FILE, &r.platform_id)?;
        }
    }
    for s in &b.series.series {
        resolve(SERIES_FILE, &s.platform_id)?;
        if s.months.len() != s.values.len() || s.values.iter().any(|row| row.len() != s.channels.len()) {
            bail!(Schema, "{}: ragged matrix for {}", SERIES_FILE, s.platform_id);
        }
    }
    for r in &b.reports.reports {
        for s in &r.scores {
            resolve(REPORTS_FILE, &s.platform_id)?;
        }
    }
    for e in &b.related.related {
        resolve(RELATED_FILE, &e.platform_id)?;
        for s in &e.similar {
            resolve(RELATED_FILE, &s.platform_id)?;
            if s.platform_id == e.platform_id {
                bail!(Schema, "{}: {} lists itself", RELATED_FILE, e.platform_id);
            }
        }
    }
    Ok(())
}

pub fn write_dashboard(dir: &Path, b: &DashboardBundle) -> Result<()> {
    validate_dashboard(b)?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join(RANKINGS_FILE), &b.rankings)?;
    write_json(&dir.join(PLATFORMS_FILE), &b.platforms)?;
    write_json(&dir.join(SERIES_FILE), &b.series)?;
    write_json(&dir.join(REPORTS_FILE), &b.reports)?;
    write_json(&dir.join(RELATED_FILE), &b.related)
}

pub fn read_dashboard(dir: &Path) -> Result<DashboardBundle> {
    let b = DashboardBundle {
        rankings: read_json(&dir.join(RANKINGS_FILE))?,
        platforms: read_json(&dir.join(PLATFORMS_FILE))?,
        series: read_json(&dir.join(SERIES_FILE))?,
        reports: read_json(&dir.join(REPORTS_FILE))?,
        related: read_json(&dir.join(RELATED_FILE))?,
    };
    validate_dashboard(&b)?;
    Ok(b)
}

/// Reads pipeline artifacts (`clean/`, `cleaning_summary.json`,
/// `rankings.json`, `reports.json`) and writes the bundle to `out`.
pub fn export_dashboard(artifacts: &Path, out: &Path, config: &DashboardConfig) -> Result<DashboardBundle> {
    let dataset = read_dataset(&artifacts.join(CLEAN_DIR))?;
    let summary_path = artifacts.join(CLEANING_SUMMARY_FILE);
    let cleaning: CleaningSummary = if summary_path.exists() { read_json(&summary_path)? } else { CleaningSummary::default() };
    let rankings: RankingsFile = read_json(&artifacts.join(RANKINGS_FILE))?;
    let reports: ReportsFile = read_json(&artifacts.join(REPORTS_FILE))?;
    let bundle = build_dashboard(&dataset, &cleaning, &rankings, &reports.reports, config)?;
    write_dashboard(out, &bundle)?;
    Ok(bundle)
}
