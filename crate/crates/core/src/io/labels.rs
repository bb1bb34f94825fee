//! Label text files (one class id per line) and class-name tables
//! (`id<TAB>name` per line).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("expected {expected} labels, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("line {line}: label {label} outside [0, {class_count})")]
    OutOfRangeLabel { line: usize, label: i64, class_count: usize },
    #[error("line {line}: cannot parse {text:?}")]
    ParseError { line: usize, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelFile {
    pub labels: Vec<usize>,
    pub class_names: BTreeMap<usize, String>,
}

impl LabelFile {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

/// Parses label text; blank lines are skipped, line numbers are 1-based.
pub fn parse_labels(text: &str, expected_count: usize, class_count: usize) -> Result<Vec<usize>, LabelError> {
    let mut labels = Vec::with_capacity(expected_count);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: i64 = line.parse().map_err(|_| LabelError::ParseError { line: i + 1, text: line.to_string() })?;
        if value < 0 || value as usize >= class_count {
            return Err(LabelError::OutOfRangeLabel { line: i + 1, label: value, class_count });
        }
        labels.push(value as usize);
    }
    if labels.len() != expected_count {
        return Err(LabelError::LengthMismatch { expected: expected_count, found: labels.len() });
    }
    Ok(labels)
}

pub fn parse_class_names(text: &str) -> Result<BTreeMap<usize, String>, LabelError> {
    let mut names = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let bad = || LabelError::ParseError { line: i + 1, text: raw.to_string() };
        let (id, name) = raw.split_once('\t').ok_or_else(bad)?;
        let id: usize = id.trim().parse().map_err(|_| bad())?;
        names.insert(id, name.trim().to_string());
    }
    Ok(names)
}

/// Reads labels, checking count and `[0, class_count)` range.
pub fn read_labels(path: &Path, expected_count: usize, class_count: usize) -> Result<LabelFile, LabelError> {
    let labels = parse_labels(&fs::read_to_string(path)?, expected_count, class_count)?;
    let class_names = (0..class_count).map(|c| (c, format!("class_{c}"))).collect();
    Ok(LabelFile { labels, class_names })
}

/// Reads labels with the class catalog taken from a names file.
pub fn read_labels_with_names(path: &Path, names_path: &Path, expected_count: usize) -> Result<LabelFile, LabelError> {
    let class_names = read_class_names(names_path)?;
    let class_count = class_names.keys().next_back().map_or(0, |&k| k + 1);
    let labels = parse_labels(&fs::read_to_string(path)?, expected_count, class_count)?;
    Ok(LabelFile { labels, class_names })
}

pub fn read_class_names(path: &Path) -> Result<BTreeMap<usize, String>, LabelError> {
    parse_class_names(&fs::read_to_string(path)?)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(s, "{l}").unwrap();
    }
    s
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<(), LabelError> {
    fs::write(path, format_labels(labels))?;
    Ok(())
}

pub fn write_class_names(path: &Path, names: &BTreeMap<usize, String>) -> Result<(), LabelError> {
    let mut s = String::new();
    for (id, name) in names {
        writeln!(s, "{id}\t{name}").unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}
