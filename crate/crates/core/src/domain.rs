//! Shared vocabulary: platforms, labels, month indexing, documents and
//! model-ready feature bundles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{bail, Error, Result};
use crate::tensor::Tensor;

/// Calendar month as a count of months since 1970-01.
/// Serialized as `"YYYY-MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(pub i32);

impl Serialize for Month {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Month, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Month {
    pub fn from_ym(year: i32, month: u32) -> Month {
        Month((year - 1970) * 12 + month as i32 - 1)
    }

    pub fn year(self) -> i32 {
        1970 + self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    pub fn next(self) -> Month {
        Month(self.0 + 1)
    }

    pub fn offset(self, months: i32) -> Month {
        Month(self.0 + months)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Month> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("month '{s}' is not YYYY-MM")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::Config(format!("bad year in '{s}'")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| Error::Config(format!("bad month in '{s}'")))?;
        if !(1..=12).contains(&month) {
            bail!(Config, "month out of range in '{}'", s);
        }
        Ok(Month::from_ym(year, month))
    }
}

/// Parses `YYYY-MM:YYYY-MM` (inclusive) or a single `YYYY-MM`.
pub fn parse_month_range(s: &str) -> Result<Vec<Month>> {
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.parse::<Month>()?, b.parse::<Month>()?),
        None => {
            let m = s.parse::<Month>()?;
            (m, m)
        }
    };
    if b < a {
        bail!(Config, "month range '{}' is reversed", s);
    }
    Ok((a.0..=b.0).map(Month).collect())
}

/// Operating status. `Normal` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Problem = 0,
    Normal = 1,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Normal => 1.0,
            Label::Problem => 0.0,
        }
    }
}

/// Status at `cutoff`: a failure in the cutoff month itself already counts.
pub fn label_at(record: &PlatformRecord, cutoff: Month) -> Result<Label> {
    if cutoff < record.online_month {
        bail!(
            Precondition,
            "cutoff {} precedes online month {} of platform {}",
            cutoff,
            record.online_month,
            record.id
        );
    }
    Ok(match record.failure_month {
        Some(f) if f <= cutoff => Label::Problem,
        _ => Label::Normal,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub points: Vec<(Month, f64)>,
}

impl MonthlySeries {
    pub fn new(points: Vec<(Month, f64)>) -> Result<Self> {
        let s = MonthlySeries { points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                bail!(Data, "series months not strictly increasing at {}", w[1].0);
            }
        }
        Ok(())
    }

    pub fn value_at(&self, month: Month) -> Option<f64> {
        self.points
            .binary_search_by_key(&month, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    pub fn first_month(&self) -> Option<Month> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_month(&self) -> Option<Month> {
        self.points.last().map(|p| p.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocKind {
    News,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextDocument {
    pub doc_id: String,
    pub platform_id: String,
    pub month: Month,
    pub day: u32,
    pub text: Vec<String>,
    pub kind: DocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    /// Normalized quality score, attached to comments by cleaning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ugc_score: Option<f64>,
}

/// A categorical attribute: one value, or a list for multi-membership
/// fields such as tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategoryValue {
    One(String),
    Many(Vec<String>),
}

impl CategoryValue {
    pub fn values(&self) -> Vec<&str> {
        match self {
            CategoryValue::One(s) if s.is_empty() => Vec::new(),
            CategoryValue::One(s) => vec![s.as_str()],
            CategoryValue::Many(v) => v.iter().filter(|s| !s.is_empty()).map(String::as_str).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

fn drop_nulls<'de, D, V>(d: D) -> std::result::Result<BTreeMap<String, V>, D::Error>
where
    D: Deserializer<'de>,
    V: Deserialize<'de>,
{
    let raw: BTreeMap<String, Option<V>> = BTreeMap::deserialize(d)?;
    Ok(raw.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect())
}

/// One platform's raw attributes, status and time-stamped observations.
///
/// A static field that is null in the source is simply absent from its map;
/// cleaning fills it from the schema defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformRecord {
    pub id: String,
    pub name: String,
    pub online_month: Month,
    pub status: Label,
    #[serde(default)]
    pub failure_month: Option<Month>,
    #[serde(default, deserialize_with = "drop_nulls")]
    pub static_numeric: BTreeMap<String, f64>,
    #[serde(default, deserialize_with = "drop_nulls")]
    pub static_categorical: BTreeMap<String, CategoryValue>,
    #[serde(default)]
    pub index_series: BTreeMap<String, MonthlySeries>,
    #[serde(skip)]
    pub news_docs: Vec<TextDocument>,
    #[serde(skip)]
    pub comment_docs: Vec<TextDocument>,
    #[serde(default)]
    pub officers: Vec<String>,
    /// Officer name to job title, where known.
    #[serde(default)]
    pub officer_roles: BTreeMap<String, String>,
}

impl PlatformRecord {
    pub fn validate(&self) -> Result<()> {
        match (self.status, self.failure_month) {
            (Label::Problem, Some(f)) if f < self.online_month => {
                bail!(Data, "platform {}: failure month {} before online month {}", self.id, f, self.online_month)
            }
            (Label::Problem, None) => bail!(Data, "platform {}: problem status without failure month", self.id),
            (Label::Normal, Some(_)) => bail!(Data, "platform {}: failure month on a normal platform", self.id),
            _ => {}
        }
        for (name, s) in &self.index_series {
            s.validate()
                .map_err(|e| Error::Data(format!("platform {} series {}: {}", self.id, name, e)))?;
            if let Some(first) = s.first_month() {
                if first < self.online_month {
                    bail!(Data, "platform {} series {} starts before online month", self.id, name);
                }
            }
        }
        Ok(())
    }

    pub fn is_online(&self, month: Month) -> bool {
        self.online_month <= month
    }

    pub fn numeric(&self, field: &str) -> Option<f64> {
        self.static_numeric.get(field).copied()
    }

    /// Latest month with any observation or status change.
    pub fn last_observed_month(&self) -> Month {
        let mut last = self.online_month;
        for s in self.index_series.values() {
            if let Some(m) = s.last_month() {
                last = last.max(m);
            }
        }
        for d in self.news_docs.iter().chain(&self.comment_docs) {
            last = last.max(d.month);
        }
        if let Some(f) = self.failure_month {
            last = last.max(f);
        }
        last
    }
}

/// A collection of platforms with their documents attached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub platforms: Vec<PlatformRecord>,
    /// Month through which statuses are known when it extends past the
    /// last observation (set by [`Dataset::truncated`]).
    pub label_horizon: Option<Month>,
}

impl Dataset {
    pub fn new(platforms: Vec<PlatformRecord>) -> Result<Self> {
        let ds = Dataset { platforms, label_horizon: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.platforms {
            if !seen.insert(p.id.as_str()) {
                bail!(Data, "duplicate platform id {}", p.id);
            }
            p.validate()?;
        }
        Ok(())
    }

    /// Last month covered by any observation or known status.
    pub fn horizon_end(&self) -> Option<Month> {
        let observed = self.platforms.iter().map(PlatformRecord::last_observed_month).max();
        match (observed, self.label_horizon) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn get(&self, id: &str) -> Option<&PlatformRecord> {
        self.platforms.iter().find(|p| p.id == id)
    }

    /// Copy with every document and series point dated after `month` removed.
    /// Failures later than `keep_labels_through` are erased as well.
    pub fn truncated(&self, month: Month, keep_labels_through: Month) -> Dataset {
        let platforms = self
            .platforms
            .iter()
            .filter(|p| p.online_month <= month)
            .map(|p| {
                let mut p = p.clone();
                for s in p.index_series.values_mut() {
                    s.points.retain(|(m, _)| *m <= month);
                }
                p.news_docs.retain(|d| d.month <= month);
                p.comment_docs.retain(|d| d.month <= month);
                if matches!(p.failure_month, Some(f) if f > keep_labels_through) {
                    p.failure_month = None;
                    p.status = Label::Normal;
                }
                p
            })
            .collect();
        Dataset { platforms, label_horizon: Some(keep_labels_through) }
    }
}

/// Flags raised while assembling a bundle.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFlags {
    pub no_news: bool,
    pub no_comments: bool,
    /// News documents with no in-vocabulary token; they got a uniform topic mix.
    pub uniform_topic_docs: usize,
}

/// Model-ready features for one platform at one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub platform_id: String,
    pub cutoff_month: Month,
    pub x_s_num: Vec<f64>,
    /// One row per categorical field over the shared category vocabulary.
    pub x_s_cat: Tensor,
    pub x_di: Tensor,
    pub x_dn: Tensor,
    pub x_dc: Tensor,
    pub kg_vec: Vec<f64>,
    pub label_at_cutoff: Label,
    #[serde(default)]
    pub flags: BundleFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub platform_id: String,
    pub cutoff_month: Month,
    pub score: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(online: i32, failure: Option<i32>) -> PlatformRecord {
        PlatformRecord {
            id: "p".into(),
            name: "p".into(),
            online_month: Month(online),
            status: if failure.is_some() { Label::Problem } else { Label::Normal },
            failure_month: failure.map(Month),
            static_numeric: BTreeMap::new(),
            static_categorical: BTreeMap::new(),
            index_series: BTreeMap::new(),
            news_docs: vec![],
            comment_docs: vec![],
            officers: vec![],
            officer_roles: BTreeMap::new(),
        }
    }

    #[test]
    fn label_without_failure_is_normal() {
        for c in 0..50 {
            assert_eq!(label_at(&record(0, None), Month(c)).unwrap(), Label::Normal);
        }
    }

    #[test]
    fn label_boundary_is_inclusive() {
        let r = record(0, Some(100));
        assert_eq!(label_at(&r, Month(99)).unwrap(), Label::Normal);
        assert_eq!(label_at(&r, Month(100)).unwrap(), Label::Problem);
    }

    #[test]
    fn label_matches_enumeration_over_toy_range() {
        for failure in 0..5 {
            for cutoff in 0..5 {
                let expected = if failure <= cutoff { Label::Problem } else { Label::Normal };
                assert_eq!(label_at(&record(0, Some(failure)), Month(cutoff)).unwrap(), expected);
            }
        }
    }

    #[test]
    fn label_before_online_is_an_error() {
        assert!(matches!(label_at(&record(10, None), Month(9)), Err(Error::Precondition(_))));
    }

    #[test]
    fn label_is_monotone_in_cutoff() {
        let r = record(0, Some(7));
        let labels: Vec<_> = (0..20).map(|c| label_at(&r, Month(c)).unwrap()).collect();
        let first_problem = labels.iter().position(|l| *l == Label::Problem).unwrap();
        assert!(labels[first_problem..].iter().all(|l| *l == Label::Problem));
    }

    #[test]
    fn month_round_trip() {
        let m: Month = "2015-11".parse().unwrap();
        assert_eq!(m, Month::from_ym(2015, 11));
        assert_eq!(m.to_string(), "2015-11");
        assert_eq!(parse_month_range("2015-11:2016-04").unwrap().len(), 6);
        assert!("2015-13".parse::<Month>().is_err());
        assert!(parse_month_range("2016-04:2015-11").is_err());
    }

    #[test]
    fn record_invariants() {
        let mut r = record(10, Some(12));
        assert!(r.validate().is_ok());
        r.failure_month = Some(Month(9));
        assert!(r.validate().is_err());
        let mut r = record(10, None);
        r.index_series.insert(
            "volume".into(),
            MonthlySeries { points: vec![(Month(9), 1.0)] },
        );
        assert!(r.validate().is_err());
        assert!(MonthlySeries::new(vec![(Month(1), 1.0), (Month(1), 2.0)]).is_err());
    }

    #[test]
    fn nulls_are_dropped_on_load() {
        let line = r#"{"id":"a","name":"A","online_month":"2011-09","status":"Normal",
            "static_numeric":{"registered_capital":null,"interest_rate":12.5},
            "static_categorical":{"nature":"private","tags":["t1","t2"],"region":null}}"#;
        let r: PlatformRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.static_numeric.len(), 1);
        assert_eq!(r.static_categorical.len(), 2);
        assert_eq!(r.static_categorical["tags"].values(), vec!["t1", "t2"]);
    }
}
