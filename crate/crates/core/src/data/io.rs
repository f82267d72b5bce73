//! Line-delimited JSON persistence for every stage artifact.
//!
//! | file       | one line per         | fields                                              |
//! |------------|----------------------|-----------------------------------------------------|
//! | dataset    | logical form         | `id`, `lf`, `reference?`, `split`                   |
//! | candidates | candidate set        | `lf_id`, `lf`, `reference?`, `candidates[]`         |
//! | scores     | (set, metric) pair   | `lf_id`, `metric`, `scores[]`                       |
//! | labels     | labeled set          | `lf_id`, `labels[]` (0 or 1)                        |
//!
//! Blank lines are skipped. Floats are written in shortest round-trip form,
//! so a save/load cycle is lossless.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::types::{CandidateSet, LabeledSet, LogicalForm, QualityTable, Split};
use crate::error::{Error, Result};

/// One line of a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub lf_id: String,
    pub metric: String,
    pub scores: Vec<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

/// Parse every non-blank line of `path` as a `T`, reporting the 1-based line
/// number on failure. `required` lists fields whose absence gets a dedicated
/// error instead of a generic parse failure.
pub fn read_records<T: DeserializeOwned>(path: &Path, required: &[&'static str]) -> Result<Vec<T>> {
    let reader = open(path)?;
    let shown = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {shown}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: shown.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or_else(|| Error::MalformedRecord {
            path: shown.clone(),
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        if let Some(field) = required.iter().find(|f| !obj.contains_key(**f)) {
            return Err(Error::MissingField {
                path: shown,
                line: line_no,
                field,
            });
        }
        let record = T::deserialize(value).map_err(|e| Error::MalformedRecord {
            path: shown.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
    }
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Load the records of `split` from a dataset file. Ids must be unique across
/// the whole file, not just the requested split.
pub fn load_dataset(path: &Path, split: Split) -> Result<Vec<LogicalForm>> {
    Ok(load_dataset_all(path)?
        .into_iter()
        .filter(|r| r.split == split)
        .collect())
}

pub fn load_dataset_all(path: &Path) -> Result<Vec<LogicalForm>> {
    let records: Vec<LogicalForm> = read_records(path, &["id", "lf", "split"])?;
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(records)
}

pub fn save_dataset(path: &Path, records: &[LogicalForm]) -> Result<()> {
    write_records(path, records)
}

pub fn save_candidates(sets: &[CandidateSet], path: &Path) -> Result<()> {
    write_records(path, sets)
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    let sets: Vec<CandidateSet> = read_records(path, &["lf_id", "lf", "candidates"])?;
    let mut seen = HashSet::with_capacity(sets.len());
    for s in &sets {
        if !seen.insert(s.lf_id()) {
            return Err(Error::DuplicateId(s.lf_id().to_string()));
        }
    }
    Ok(sets)
}

pub fn save_scores(records: &[MetricScores], path: &Path) -> Result<()> {
    write_records(path, records)
}

pub fn load_scores(path: &Path) -> Result<Vec<MetricScores>> {
    read_records(path, &["lf_id", "metric", "scores"])
}

/// Group score lines into one table per set, in order of first appearance.
pub fn group_scores(records: Vec<MetricScores>) -> Result<Vec<QualityTable>> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut tables: Vec<QualityTable> = Vec::new();
    for r in records {
        let slot = *index.entry(r.lf_id.clone()).or_insert_with(|| {
            tables.push(QualityTable::new(r.lf_id.clone()));
            tables.len() - 1
        });
        tables[slot].insert(r.metric, r.scores)?;
    }
    Ok(tables)
}

/// Flatten tables back into score lines (per-metric vectors only).
pub fn flatten_tables(tables: &[QualityTable]) -> Vec<MetricScores> {
    tables
        .iter()
        .flat_map(|t| {
            t.per_metric.iter().map(move |(m, s)| MetricScores {
                lf_id: t.lf_id.clone(),
                metric: m.clone(),
                scores: s.clone(),
            })
        })
        .collect()
}

pub fn load_quality(path: &Path) -> Result<Vec<QualityTable>> {
    group_scores(load_scores(path)?)
}

pub fn save_labels(labels: &[LabeledSet], path: &Path) -> Result<()> {
    write_records(path, labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<LabeledSet>> {
    read_records(path, &["lf_id", "labels"])
}

/// Pair each candidate set with its quality table by `lf_id`.
pub fn join_quality<'a>(
    sets: &'a [CandidateSet],
    tables: &'a [QualityTable],
) -> Result<Vec<(&'a CandidateSet, &'a QualityTable)>> {
    let by_id: HashMap<&str, &QualityTable> = tables.iter().map(|t| (t.lf_id.as_str(), t)).collect();
    sets.iter()
        .map(|s| {
            let t = by_id.get(s.lf_id()).ok_or_else(|| {
                Error::Invariant(format!("no quality scores for set `{}`", s.lf_id()))
            })?;
            t.check_against(s)?;
            Ok((s, *t))
        })
        .collect()
}

/// Read all lines of a buffered reader, for stdin-style inputs.
pub fn read_lines<R: BufRead>(reader: R) -> Result<Vec<String>> {
    reader
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io("reading input", e))
}
