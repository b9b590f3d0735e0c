use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Cells of a delimited file before imputation: numeric features (possibly
/// missing) plus a label column kept as text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub cells: Vec<Vec<Option<f64>>>,
    pub labels: Vec<String>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Rows `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> RawTable {
        RawTable {
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            cells: indices.iter().map(|&i| self.cells[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn concat(mut self, other: &RawTable) -> Result<RawTable, DataError> {
        if other.feature_names != self.feature_names {
            return Err(DataError::Manifest(
                "cannot concatenate tables with different columns".into(),
            ));
        }
        self.cells.extend(other.cells.iter().cloned());
        self.labels.extend(other.labels.iter().cloned());
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
    Semicolon,
    /// Runs of spaces or tabs.
    Whitespace,
}

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    #[default]
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub label: LabelColumn,
    pub delimiter: Delimiter,
    pub header: bool,
    pub missing_tokens: Vec<String>,
    /// Columns (by header name) discarded before parsing.
    pub drop: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            label: LabelColumn::Last,
            delimiter: Delimiter::Comma,
            header: true,
            missing_tokens: default_missing_tokens(),
            drop: Vec::new(),
        }
    }
}

pub fn default_missing_tokens() -> Vec<String> {
    ["", "NA", "NaN", "nan", "?"].iter().map(|s| s.to_string()).collect()
}

fn read_records(path: &Path, delimiter: Delimiter) -> Result<Vec<Vec<String>>, DataError> {
    let io_err = |e: std::io::Error| DataError::Io(format!("{}: {e}", path.display()));
    match delimiter {
        Delimiter::Whitespace => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            Ok(text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect())
        }
        other => {
            let byte = match other {
                Delimiter::Comma => b',',
                Delimiter::Tab => b'\t',
                Delimiter::Semicolon => b';',
                Delimiter::Whitespace => unreachable!(),
            };
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(byte)
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(path)
                .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
            let mut out = Vec::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
                if rec.len() == 1 && rec[0].is_empty() {
                    continue;
                }
                out.push(rec.iter().map(str::to_string).collect());
            }
            Ok(out)
        }
    }
}

/// Parses a delimited text file into a [`RawTable`].
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<RawTable, DataError> {
    let mut records = read_records(path, opts.delimiter)?;
    if records.is_empty() {
        return Err(DataError::Ingest {
            row: 0,
            column: String::new(),
            message: format!("{} is empty", path.display()),
        });
    }
    let width = records[0].len();
    let names: Vec<String> = if opts.header {
        records.remove(0)
    } else {
        (0..width).map(|i| format!("col{i}")).collect()
    };
    let label_idx = match &opts.label {
        LabelColumn::Name(n) => names.iter().position(|c| c == n).ok_or_else(|| DataError::Ingest {
            row: 0,
            column: n.clone(),
            message: "label column not found in header".into(),
        })?,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(DataError::Ingest {
                row: 0,
                column: i.to_string(),
                message: format!("label index beyond {width} columns"),
            })
        }
        LabelColumn::Last => width - 1,
    };
    let keep: Vec<usize> = (0..width)
        .filter(|&i| i != label_idx && !opts.drop.contains(&names[i]))
        .collect();
    let mut cells = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let first_data_line = if opts.header { 2 } else { 1 };
    for (r, rec) in records.iter().enumerate() {
        let line = r + first_data_line;
        if rec.len() != width {
            return Err(DataError::Ingest {
                row: line,
                column: String::new(),
                message: format!("{} fields, expected {width}", rec.len()),
            });
        }
        let label = rec[label_idx].trim();
        if opts.missing_tokens.iter().any(|t| t == label) {
            return Err(DataError::MissingLabel { row: line });
        }
        labels.push(label.to_string());
        let mut row = Vec::with_capacity(keep.len());
        for &c in &keep {
            let tok = rec[c].trim();
            if opts.missing_tokens.iter().any(|t| t == tok) {
                row.push(None);
                continue;
            }
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                Ok(_) => row.push(None),
                Err(_) => {
                    return Err(DataError::Ingest {
                        row: line,
                        column: names[c].clone(),
                        message: format!("cannot parse `{tok}` as a number"),
                    })
                }
            }
        }
        cells.push(row);
    }
    Ok(RawTable {
        feature_names: keep.iter().map(|&i| names[i].clone()).collect(),
        label_name: names[label_idx].clone(),
        cells,
        labels,
    })
}

/// Reads one label per line from the first field of a separate file
/// (e.g. a labels file that accompanies a headerless feature matrix).
pub fn load_labels(path: &Path, delimiter: Delimiter) -> Result<Vec<String>, DataError> {
    let recs = read_records(path, delimiter)?;
    recs.into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.into_iter()
                .next()
                .filter(|s| !s.is_empty())
                .ok_or(DataError::MissingLabel { row: i + 1 })
        })
        .collect()
}
