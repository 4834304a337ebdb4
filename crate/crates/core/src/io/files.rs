//! JSON-Lines dataset directories and small JSON artifacts.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, DocKind, PlatformRecord, TextDocument};
use crate::error::{bail, Error, Result};
use crate::synth::{TruthRecord, Universe};

pub const PLATFORMS_FILE: &str = "platforms.jsonl";
pub const NEWS_FILE: &str = "news.jsonl";
pub const COMMENTS_FILE: &str = "comments.jsonl";
pub const TRUTH_FILE: &str = "truth.json";

/// Version stamped into every JSON artifact this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one value per non-blank line; errors carry the file and line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{} line {}: {}", path.display(), i + 1, e)))?;
        out.push(row);
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {}", path.display(), e)))
}

/// Writes platforms, news and comments as three JSON-Lines files.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join(PLATFORMS_FILE), &dataset.platforms)?;
    let news: Vec<&TextDocument> = dataset.platforms.iter().flat_map(|p| &p.news_docs).collect();
    let comments: Vec<&TextDocument> = dataset.platforms.iter().flat_map(|p| &p.comment_docs).collect();
    write_jsonl(&dir.join(NEWS_FILE), &news)?;
    write_jsonl(&dir.join(COMMENTS_FILE), &comments)?;
    Ok(())
}

/// Loads a dataset directory and attaches each document to its platform.
/// A missing news or comments file is read as empty.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        bail!(Data, "dataset directory {} does not exist", dir.display());
    }
    let mut platforms: Vec<PlatformRecord> = read_jsonl(&dir.join(PLATFORMS_FILE))?;
    let index: HashMap<String, usize> = platforms.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
    for (file, kind) in [(NEWS_FILE, DocKind::News), (COMMENTS_FILE, DocKind::Comment)] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        for d in read_jsonl::<TextDocument>(&path)? {
            if d.kind != kind {
                bail!(Data, "{}: document {} has kind {:?}", file, d.doc_id, d.kind);
            }
            let Some(&i) = index.get(&d.platform_id) else {
                bail!(Data, "{}: document {} refers to unknown platform {}", file, d.doc_id, d.platform_id);
            };
            match kind {
                DocKind::News => platforms[i].news_docs.push(d),
                DocKind::Comment => platforms[i].comment_docs.push(d),
            }
        }
    }
    Dataset::new(platforms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub platforms: Vec<TruthRecord>,
    pub news_vocab: Vec<String>,
    /// Planted topic-word distributions, one row per topic.
    pub topic_word: Vec<Vec<f64>>,
}

/// Writes a generated universe as a dataset directory plus `truth.json`.
pub fn write_universe(dir: &Path, universe: &Universe) -> Result<()> {
    let dataset = Dataset::new(universe.platforms.clone())?;
    write_dataset(dir, &dataset)?;
    write_json(
        &dir.join(TRUTH_FILE),
        &TruthFile {
            schema_version: SCHEMA_VERSION,
            platforms: universe.truth.clone(),
            news_vocab: universe.news_vocab.clone(),
            topic_word: universe.topic_word.clone(),
        },
    )
}
