//! Experiment runner: dataset × method × seed grids, oversampling-rate
//! sweeps and result tables.

mod config;
mod run;
mod table;

pub use config::{parse_grid, ExperimentConfig, Method, OUTPUT_ROOT_ENV};
pub use run::{
    restrict, run, sweep_fs, version_string, write_outputs, write_sweep, CellResult, CellStatus, ResultTable,
    RunOutput, SweepOutput, SweepPoint, SweepSeries, Timing,
};
pub use table::{aggregate, from_json, median, to_csv, to_json, Aggregate};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("malformed results: {0}")]
    Format(String),
}
