use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{canonical_classes, class_stats, normalize_fit_transform, split_by_counts, stratified_train_counts, ClassStats, Dataset, MinMaxScaler};
use super::impute::{knn_impute, median_impute};
use super::table::{default_missing_tokens, load_csv, load_labels, Delimiter, LabelColumn, LoadOptions, RawTable};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMode {
    #[default]
    None,
    Knn,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Stratified split at `train_fraction`.
    #[default]
    Stratified,
    /// Separate train (`path`) and test (`test_path`) files.
    Given,
    /// Fixed per-class train counts from `train_counts`.
    Counts,
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

fn seventy() -> f64 {
    0.7
}

/// Per-dataset text config. Relative paths resolve against the manifest's
/// own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub label_index: Option<usize>,
    #[serde(default)]
    pub delimiter: Delimiter,
    #[serde(default = "yes")]
    pub header: bool,
    #[serde(default = "default_missing_tokens")]
    pub missing: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Labels in a separate file, one per line (first field).
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default)]
    pub test_labels_path: Option<PathBuf>,
    #[serde(default)]
    pub impute: ImputeMode,
    #[serde(default = "two")]
    pub knn_k: usize,
    #[serde(default)]
    pub split: SplitMode,
    #[serde(default = "seventy")]
    pub train_fraction: f64,
    #[serde(default)]
    pub train_counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub test_counts: BTreeMap<String, usize>,
    /// Stratified subsample of the whole table to this many rows.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A dataset after imputation, splitting and train-fitted normalization.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: MinMaxScaler,
    /// Class statistics of the full table before splitting.
    pub stats: ClassStats,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        let mut m: DatasetManifest =
            toml::from_str(&text).map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_options(&self) -> LoadOptions {
        let label = match (&self.label, self.label_index) {
            (Some(n), _) => LabelColumn::Name(n.clone()),
            (None, Some(i)) => LabelColumn::Index(i),
            (None, None) => LabelColumn::Last,
        };
        LoadOptions {
            label,
            delimiter: self.delimiter,
            header: self.header,
            missing_tokens: self.missing.clone(),
            drop: self.drop.clone(),
        }
    }

    fn load_one(&self, features: &Path, labels: Option<&Path>) -> Result<RawTable, DataError> {
        let path = self.resolve(features);
        match labels {
            None => load_csv(&path, &self.load_options()),
            Some(lp) => {
                // the whole feature file is numeric; labels come from the side file
                let mut opts = self.load_options();
                opts.label = LabelColumn::Last;
                let mut table = load_csv_without_label(&path, &opts)?;
                let labels = load_labels(&self.resolve(lp), self.delimiter)?;
                if labels.len() != table.n_rows() {
                    return Err(DataError::Ingest {
                        row: 0,
                        column: lp.display().to_string(),
                        message: format!("{} labels for {} rows", labels.len(), table.n_rows()),
                    });
                }
                table.labels = labels;
                Ok(table)
            }
        }
    }

    /// Reads the train table and, for given splits, the test table.
    pub fn load_tables(&self) -> Result<(RawTable, Option<RawTable>), DataError> {
        let train = self.load_one(&self.path, self.labels_path.as_deref())?;
        let test = match (self.split, &self.test_path) {
            (SplitMode::Given, Some(tp)) => Some(self.load_one(tp, self.test_labels_path.as_deref())?),
            (SplitMode::Given, None) => {
                return Err(DataError::Manifest("split = \"given\" needs test_path".into()))
            }
            _ => None,
        };
        Ok((train, test))
    }

    fn impute(&self, table: &RawTable) -> Result<RawTable, DataError> {
        match self.impute {
            ImputeMode::None if table.missing_count() > 0 => Err(DataError::Imputation(format!(
                "{} missing cells but impute = \"none\"",
                table.missing_count()
            ))),
            ImputeMode::None => Ok(table.clone()),
            ImputeMode::Knn => knn_impute(table, self.knn_k),
            ImputeMode::Median => median_impute(table),
        }
    }

    /// Load → impute → split → normalize. `seed` drives subsampling and the
    /// split shuffle.
    pub fn prepare(&self, seed: u64) -> Result<PreparedData, DataError> {
        let (train_raw, test_raw) = self.load_tables()?;
        let (train, test, full) = match test_raw {
            Some(test_raw) => {
                let n_train = train_raw.n_rows();
                let all = self.impute(&train_raw.concat(&test_raw)?)?;
                let names = canonical_classes(&all.labels);
                let full = Dataset::from_table_with_classes(&all, &names)?;
                let train_idx: Vec<usize> = (0..n_train).collect();
                let test_idx: Vec<usize> = (n_train..full.n()).collect();
                (full.subset(&train_idx), full.subset(&test_idx), full)
            }
            None => {
                let table = self.impute(&train_raw)?;
                let mut full = Dataset::from_table(&table)?;
                if let Some(n) = self.subsample {
                    full = stratified_subsample(&full, n, seed)?;
                }
                let counts = match self.split {
                    SplitMode::Stratified => stratified_train_counts(&full.class_sizes(), self.train_fraction)?,
                    SplitMode::Counts => self.count_vector(&full)?,
                    SplitMode::Given => unreachable!("given split always has a test table"),
                };
                let (tr, te) = split_by_counts(&full, &counts, seed)?;
                (tr, te, full)
            }
        };
        let stats = class_stats(&full)?;
        let (xtr, xte, scaler) = normalize_fit_transform(train.x(), test.x());
        Ok(PreparedData {
            name: self.name.clone(),
            train: train.with_features(xtr)?,
            test: test.with_features(xte)?,
            scaler,
            stats,
        })
    }

    fn count_vector(&self, full: &Dataset) -> Result<Vec<usize>, DataError> {
        let mut counts = Vec::with_capacity(full.n_classes());
        for (k, name) in full.class_names().iter().enumerate() {
            let c = *self.train_counts.get(name).ok_or_else(|| {
                DataError::Manifest(format!("train_counts has no entry for class `{name}`"))
            })?;
            if let Some(&t) = self.test_counts.get(name) {
                if c + t != full.class_sizes()[k] {
                    return Err(DataError::Manifest(format!(
                        "class `{name}`: {c} + {t} does not equal its {} rows",
                        full.class_sizes()[k]
                    )));
                }
            }
            counts.push(c);
        }
        Ok(counts)
    }
}

fn load_csv_without_label(path: &Path, opts: &LoadOptions) -> Result<RawTable, DataError> {
    // Parse with a throwaway label column appended so every field is a feature.
    let text = fs::read_to_string(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let sep = match opts.delimiter {
        Delimiter::Comma => ",",
        Delimiter::Tab => "\t",
        Delimiter::Semicolon => ";",
        Delimiter::Whitespace => " ",
    };
    let mut augmented = String::with_capacity(text.len() + text.lines().count() * 3);
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        augmented.push_str(line);
        augmented.push_str(sep);
        augmented.push_str(if opts.header && i == 0 { "__label" } else { "_" });
        augmented.push('\n');
    }
    let tmp = std::env::temp_dir().join(format!(
        "advos-{}-{}.txt",
        std::process::id(),
        path.file_name().and_then(|s| s.to_str()).unwrap_or("table")
    ));
    fs::write(&tmp, augmented).map_err(|e| DataError::Io(e.to_string()))?;
    let res = load_csv(&tmp, opts);
    let _ = fs::remove_file(&tmp);
    res
}

/// Keeps about `n` rows with class proportions preserved.
pub fn stratified_subsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if n >= ds.n() {
        return Ok(ds.clone());
    }
    let counts = stratified_train_counts(&ds.class_sizes(), n as f64 / ds.n() as f64)?;
    Ok(split_by_counts(ds, &counts, seed)?.0)
}
