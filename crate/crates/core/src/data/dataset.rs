use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, RawTable};
use crate::nn::Tensor;

/// A complete numeric dataset with class ids `0..C`.
///
/// Class ids are assigned in ascending order of class size in the table the
/// dataset was first built from (ties broken by label text), so class 0 is
/// the smallest class and class `C − 1` the largest.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Tensor,
    y: Vec<usize>,
    class_names: Vec<String>,
    class_index: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(x: Tensor, y: Vec<usize>, class_names: Vec<String>) -> Result<Self, DataError> {
        if x.rows() != y.len() {
            return Err(DataError::Shape(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        let c = class_names.len();
        let mut class_index = vec![Vec::new(); c];
        for (i, &k) in y.iter().enumerate() {
            if k >= c {
                return Err(DataError::Shape(format!("label {k} out of range for {c} classes")));
            }
            class_index[k].push(i);
        }
        Ok(Self {
            x,
            y,
            class_names,
            class_index,
        })
    }

    /// Builds a dataset from a complete table, ordering classes by size.
    pub fn from_table(table: &RawTable) -> Result<Self, DataError> {
        let names = canonical_classes(&table.labels);
        Self::from_table_with_classes(table, &names)
    }

    /// Builds a dataset using an existing class ordering.
    pub fn from_table_with_classes(table: &RawTable, class_names: &[String]) -> Result<Self, DataError> {
        let d = table.n_features();
        let mut data = Vec::with_capacity(table.n_rows() * d);
        for (r, row) in table.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                data.push(c.ok_or_else(|| {
                    DataError::Imputation(format!(
                        "row {r} attribute `{}` is still missing",
                        table.feature_names[j]
                    ))
                })?);
            }
        }
        let lookup: BTreeMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let y = table
            .labels
            .iter()
            .map(|l| {
                lookup
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| DataError::Shape(format!("unknown class label `{l}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let x = Tensor::new(table.n_rows(), d, data).map_err(|e| DataError::Shape(e.to_string()))?;
        Self::new(x, y, class_names.to_vec())
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Row indices of every class, `τ_k` in index form.
    pub fn class_index(&self) -> &[Vec<usize>] {
        &self.class_index
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.class_index.iter().map(Vec::len).collect()
    }

    /// The feature rows of class `k`, in dataset order.
    pub fn class_rows(&self, k: usize) -> Tensor {
        self.x.select_rows(&self.class_index[k])
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Dataset::new(self.x.select_rows(indices), y, self.class_names.clone())
            .expect("subset of a valid dataset")
    }

    /// Same labels and classes, new feature matrix.
    pub fn with_features(&self, x: Tensor) -> Result<Dataset, DataError> {
        Dataset::new(x, self.y.clone(), self.class_names.clone())
    }

    /// Appends rows; the originals keep their positions.
    pub fn append(&self, x: &Tensor, y: &[usize]) -> Result<Dataset, DataError> {
        let stacked = Tensor::vstack(&[&self.x, x]).map_err(|e| DataError::Shape(e.to_string()))?;
        let mut labels = self.y.clone();
        labels.extend_from_slice(y);
        Dataset::new(stacked, labels, self.class_names.clone())
    }
}

/// Distinct labels ordered by ascending frequency, ties by label text.
pub fn canonical_classes(labels: &[String]) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    v.into_iter().map(|(n, _)| n.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub sizes: Vec<usize>,
    /// Largest over smallest class size, rounded to two decimals.
    pub imbalance_ratio: f64,
}

pub fn class_stats(ds: &Dataset) -> Result<ClassStats, DataError> {
    let sizes = ds.class_sizes();
    let min = sizes.iter().copied().min().unwrap_or(0);
    let max = sizes.iter().copied().max().unwrap_or(0);
    if ds.n() == 0 || min == 0 {
        return Err(DataError::Split("class statistics need every class populated".into()));
    }
    Ok(ClassStats {
        sizes,
        imbalance_ratio: crate::metrics::round2(max as f64 / min as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn stratified(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            stratified: true,
            seed,
        }
    }
}

/// Per-class train counts for a stratified split.
///
/// The test size is `⌈(1 − f)·N⌉` and the remaining train rows are shared
/// out in proportion to class size by largest remainder (ties to the lower
/// class id). Every class with at least two rows keeps at least one row on
/// each side.
pub fn stratified_train_counts(sizes: &[usize], train_fraction: f64) -> Result<Vec<usize>, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(DataError::Split(format!("class {k} is empty")));
    }
    let n: usize = sizes.iter().sum();
    let n_test = (((1.0 - train_fraction) * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_train = n - n_test.min(n);
    let exact: Vec<f64> = sizes
        .iter()
        .map(|&s| n_train as f64 * s as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n_train - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if counts[k] < sizes[k] {
            counts[k] += 1;
            left -= 1;
        }
    }
    for (c, &s) in counts.iter_mut().zip(sizes) {
        if s >= 2 {
            *c = (*c).clamp(1, s - 1);
        } else {
            *c = s;
        }
    }
    Ok(counts)
}

/// Splits every class independently; rows are drawn by a seeded shuffle.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    if !spec.stratified {
        return Err(DataError::Split("only stratified splits are supported".into()));
    }
    let counts = stratified_train_counts(&ds.class_sizes(), spec.train_fraction)?;
    split_by_counts(ds, &counts, spec.seed)
}

/// Sends `train_counts[k]` randomly chosen rows of each class `k` to train
/// and the rest to test. Both outputs keep ascending original row order.
pub fn split_by_counts(ds: &Dataset, train_counts: &[usize], seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if train_counts.len() != ds.n_classes() {
        return Err(DataError::Split(format!(
            "{} train counts for {} classes",
            train_counts.len(),
            ds.n_classes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, idx) in ds.class_index().iter().enumerate() {
        if idx.is_empty() {
            return Err(DataError::Split(format!("class {k} is empty")));
        }
        if train_counts[k] > idx.len() {
            return Err(DataError::Split(format!(
                "class {k} has {} rows, {} requested for training",
                idx.len(),
                train_counts[k]
            )));
        }
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..train_counts[k]]);
        test.extend_from_slice(&shuffled[train_counts[k]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Per-feature min–max parameters fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Tensor) -> Self {
        let d = x.cols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in x.iter_rows() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Self { min, max }
    }

    /// Maps to `[0, 1]`, clipping values outside the fitted range; constant
    /// features map to 0.5.
    pub fn transform(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 {
                    ((*v - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                };
            }
        }
        out
    }
}

pub fn normalize_fit_transform(train: &Tensor, test: &Tensor) -> (Tensor, Tensor, MinMaxScaler) {
    let scaler = MinMaxScaler::fit(train);
    (scaler.transform(train), scaler.transform(test), scaler)
}
