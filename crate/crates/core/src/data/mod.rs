//! Tabular ingestion, imputation, class bookkeeping, stratified splitting
//! and min-max normalization.

mod dataset;
mod impute;
mod manifest;
mod table;

pub use dataset::{
    canonical_classes, class_stats, normalize_fit_transform, split_by_counts, stratified_split,
    stratified_train_counts, ClassStats, Dataset, MinMaxScaler, SplitSpec,
};
pub use impute::{knn_impute, median_impute};
pub use manifest::{stratified_subsample, DatasetManifest, ImputeMode, PreparedData, SplitMode};
pub use table::{default_missing_tokens, load_csv, load_labels, Delimiter, LabelColumn, LoadOptions, RawTable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("io: {0}")]
    Io(String),
    #[error("line {row}, column `{column}`: {message}")]
    Ingest { row: usize, column: String, message: String },
    #[error("line {row}: missing class label")]
    MissingLabel { row: usize },
    #[error("imputation: {0}")]
    Imputation(String),
    #[error("split: {0}")]
    Split(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("manifest: {0}")]
    Manifest(String),
}
