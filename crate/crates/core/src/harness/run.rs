use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::table::{aggregate, Aggregate};
use super::HarnessError;
use crate::adversarial::{train, EpochRecord};
use crate::data::{DatasetManifest, PreparedData};
use crate::metrics::EvalReport;
use crate::resamplers::{resample, ResampleSpec};

/// Version tag embedded in every result file.
pub fn version_string() -> String {
    format!("advos {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Na,
}

/// Outcome of one (dataset, method, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    /// Hash of the cell's training settings.
    pub train_config_hash: String,
    pub train_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    /// Generated rows fed to the classifier per epoch, per class.
    pub generated_per_epoch: Vec<usize>,
    pub best: Option<EvalReport>,
    #[serde(rename = "final")]
    pub last: Option<EvalReport>,
    pub history: Vec<EpochRecord>,
}

/// Everything `run` produces except wall times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub version: String,
    pub config_hash: String,
    /// `best` and `final` both appear per cell; aggregates use best-epoch scores.
    pub selection: String,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub timings: Vec<Timing>,
}

impl RunOutput {
    pub fn has_failures(&self) -> bool {
        self.table.cells.iter().any(|c| c.status == CellStatus::Na)
    }
}

fn dataset_label(path: &Path, manifest: &Result<DatasetManifest, String>) -> String {
    match manifest {
        Ok(m) => m.name.clone(),
        Err(_) => path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string(),
    }
}

/// Keeps only the cells matching the given filters. `dataset` matches a
/// manifest name or file stem, case-insensitively.
pub fn restrict(
    cfg: &ExperimentConfig,
    seed: Option<u64>,
    method: Option<Method>,
    dataset: Option<&str>,
) -> Result<ExperimentConfig, HarnessError> {
    let mut out = cfg.clone();
    if let Some(s) = seed {
        out.seeds = vec![s];
    }
    if let Some(m) = method {
        out.methods = vec![m];
    }
    if let Some(d) = dataset {
        out.datasets.retain(|p| {
            let m = DatasetManifest::load(p).map_err(|e| e.to_string());
            dataset_label(p, &m).eq_ignore_ascii_case(d)
                || p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.eq_ignore_ascii_case(d))
        });
        if out.datasets.is_empty() {
            return Err(HarnessError::Config(format!("no configured dataset matches `{d}`")));
        }
    }
    out.validate()?;
    Ok(out)
}

struct Prepared {
    name: String,
    data: Result<PreparedData, String>,
}

fn prepare_all(cfg: &ExperimentConfig) -> Vec<Prepared> {
    cfg.datasets
        .par_iter()
        .map(|path| {
            let manifest = DatasetManifest::load(path).map_err(|e| e.to_string());
            let name = dataset_label(path, &manifest);
            let data = manifest.and_then(|m| m.prepare(cfg.split_seed).map_err(|e| e.to_string()));
            if let Err(e) = &data {
                warn!("{name}: {e}");
            }
            Prepared { name, data }
        })
        .collect()
}

fn run_cell(cfg: &ExperimentConfig, prepared: &Prepared, method: Method, seed: u64) -> CellResult {
    let train_cfg = cfg.cell_train_config(method, seed);
    let mut cell = CellResult {
        dataset: prepared.name.clone(),
        method,
        seed,
        status: CellStatus::Na,
        error: None,
        train_config_hash: train_cfg.hash(),
        train_sizes: Vec::new(),
        test_sizes: Vec::new(),
        generated_per_epoch: Vec::new(),
        best: None,
        last: None,
        history: Vec::new(),
    };
    let data = match &prepared.data {
        Ok(d) => d,
        Err(e) => {
            cell.error = Some(e.clone());
            return cell;
        }
    };
    cell.test_sizes = data.test.class_sizes();
    let train_set = match method.resampler() {
        None => data.train.clone(),
        Some(rm) => {
            let spec = ResampleSpec { method: rm, k: cfg.resampler_k, seed };
            match resample(&data.train, &spec) {
                Ok(r) => r.dataset,
                Err(e) => {
                    cell.train_sizes = data.train.class_sizes();
                    cell.error = Some(e.to_string());
                    return cell;
                }
            }
        }
    };
    cell.train_sizes = train_set.class_sizes();
    match train(&train_set, &data.test, &train_cfg) {
        Ok(out) => {
            cell.generated_per_epoch = if out.state.is_adversarial() {
                out.state.plan().counts.clone()
            } else {
                vec![0; train_set.n_classes()]
            };
            info!(
                "{} {} seed {}: best ACSA {:.2} (epoch {:?}), generated per epoch {:?}",
                cell.dataset, method, seed, out.best_report.acsa, out.best_report.epoch, cell.generated_per_epoch
            );
            cell.status = CellStatus::Ok;
            cell.best = Some(out.best_report);
            cell.last = Some(out.final_report);
            cell.history = out.history;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Runs every configured cell. Cell failures become NA entries; only an
/// invalid config is an error.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let prepared = prepare_all(cfg);
    let mut jobs = Vec::new();
    for p in &prepared {
        for &m in &cfg.methods {
            for &s in &cfg.seeds {
                jobs.push((p, m, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<(CellResult, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, m, s)| {
                let t0 = Instant::now();
                let cell = run_cell(cfg, p, m, s);
                (cell, t0.elapsed().as_secs_f64())
            })
            .collect()
    });
    let timings = results
        .iter()
        .map(|(c, t)| Timing { dataset: c.dataset.clone(), method: c.method, seed: c.seed, seconds: *t })
        .collect();
    let cells: Vec<CellResult> = results.into_iter().map(|(c, _)| c).collect();
    let aggregates = aggregate(&cells);
    Ok(RunOutput {
        table: ResultTable {
            version: version_string(),
            config_hash: cfg.hash(),
            selection: "best-epoch".into(),
            cells,
            aggregates,
        },
        timings,
    })
}

fn write(path: &Path, body: &str) -> Result<(), HarnessError> {
    fs::write(path, body).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

/// Writes `results.json`, `timings.json` and `table.csv` into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>, HarnessError> {
    create_dir(dir)?;
    let results = dir.join("results.json");
    write(&results, &super::table::to_json(&out.table)?)?;
    let timings = dir.join("timings.json");
    let tj = serde_json::to_string_pretty(&out.timings).map_err(|e| HarnessError::Io(e.to_string()))?;
    write(&timings, &tj)?;
    let csv = dir.join("table.csv");
    write(&csv, &super::table::to_csv(&out.table))?;
    Ok(vec![results, timings, csv])
}

/// One full run per value of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub f: f64,
    pub table: ResultTable,
}

/// `(f, median best-epoch ACSA)` pairs for one dataset and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub dataset: String,
    pub method: Method,
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub version: String,
    pub grid: Vec<f64>,
    pub runs: Vec<SweepPoint>,
    pub series: Vec<SweepSeries>,
}

pub fn sweep_fs(cfg: &ExperimentConfig, grid: &[f64]) -> Result<SweepOutput, HarnessError> {
    if let Some(m) = cfg.methods.iter().find(|m| !matches!(m, Method::Ao | Method::Do)) {
        return Err(HarnessError::Config(format!("sweeps apply to AO and DO only, not {m}")));
    }
    if grid.is_empty() {
        return Err(HarnessError::Config("empty grid".into()));
    }
    let mut runs = Vec::with_capacity(grid.len());
    for &f in grid {
        let mut c = cfg.clone();
        c.train.f = f;
        runs.push(SweepPoint { f, table: run(&c)?.table });
    }
    let mut series: Vec<SweepSeries> = Vec::new();
    for agg in &runs[0].table.aggregates {
        let points = runs
            .iter()
            .map(|r| {
                let a = r.table.aggregates.iter().find(|a| a.dataset == agg.dataset && a.method == agg.method);
                (r.f, a.and_then(|a| a.acsa))
            })
            .collect();
        series.push(SweepSeries { dataset: agg.dataset.clone(), method: agg.method, points });
    }
    Ok(SweepOutput { version: version_string(), grid: grid.to_vec(), runs, series })
}

/// Writes `sweep.json` and one `sweep_<dataset>_<method>.csv` (`f,acsa`) per series.
pub fn write_sweep(dir: &Path, out: &SweepOutput) -> Result<Vec<PathBuf>, HarnessError> {
    create_dir(dir)?;
    let mut files = Vec::new();
    let json = dir.join("sweep.json");
    let body = serde_json::to_string_pretty(out).map_err(|e| HarnessError::Io(e.to_string()))?;
    write(&json, &body)?;
    files.push(json);
    for s in &out.series {
        let mut csv = String::from("f,acsa\n");
        for (f, a) in &s.points {
            match a {
                Some(a) => csv.push_str(&format!("{f},{a:.2}\n")),
                None => csv.push_str(&format!("{f},NA\n")),
            }
        }
        let name = format!("sweep_{}_{}.csv", s.dataset, s.method.name().replace('+', "_"));
        let path = dir.join(name);
        write(&path, &csv)?;
        files.push(path);
    }
    Ok(files)
}
