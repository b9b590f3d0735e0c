use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adversarial::{hex_digest, Regime, TrainConfig};
use crate::resamplers::ResampleMethod;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "ADVOS_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Q")]
    Q,
    #[serde(rename = "RO+Q")]
    RoQ,
    #[serde(rename = "SMOTE+Q")]
    SmoteQ,
    #[serde(rename = "B-SMOTE+Q")]
    BorderlineSmoteQ,
    #[serde(rename = "ADASYN+Q")]
    AdasynQ,
    #[serde(rename = "AO")]
    Ao,
    #[serde(rename = "DO")]
    Do,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Q,
        Method::RoQ,
        Method::SmoteQ,
        Method::BorderlineSmoteQ,
        Method::AdasynQ,
        Method::Ao,
        Method::Do,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Q => "Q",
            Method::RoQ => "RO+Q",
            Method::SmoteQ => "SMOTE+Q",
            Method::BorderlineSmoteQ => "B-SMOTE+Q",
            Method::AdasynQ => "ADASYN+Q",
            Method::Ao => "AO",
            Method::Do => "DO",
        }
    }

    pub fn resampler(self) -> Option<ResampleMethod> {
        match self {
            Method::RoQ => Some(ResampleMethod::Random),
            Method::SmoteQ => Some(ResampleMethod::Smote),
            Method::BorderlineSmoteQ => Some(ResampleMethod::BorderlineSmote),
            Method::AdasynQ => Some(ResampleMethod::Adasyn),
            _ => None,
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            Method::Ao => Regime::Ao,
            Method::Do => Regime::Do,
            _ => Regime::Baseline,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

/// An experiment: datasets × methods × seeds with shared training settings.
///
/// The file is flat TOML. Besides the keys below, every [`TrainConfig`]
/// field except `regime` and `seed` may appear at top level.
///
/// ```toml
/// datasets = ["data/pima.toml"]
/// methods = ["Q", "SMOTE+Q", "DO"]
/// seeds = [1, 2, 3]
/// output = "results/pima"
/// epochs = 100
/// f = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset manifest paths, resolved against the config file's directory.
    pub datasets: Vec<PathBuf>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Cells run concurrently.
    pub jobs: usize,
    /// Neighbor count for the SMOTE family.
    pub resampler_k: usize,
    /// Seed of the train/test split, shared by every cell.
    pub split_seed: u64,
    /// Training settings; `regime` and `seed` are set per cell.
    pub train: TrainConfig,
}

const EXPERIMENT_KEYS: [&str; 7] = ["datasets", "methods", "seeds", "output", "jobs", "resampler_k", "split_seed"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative dataset paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        for key in ["regime", "seed"] {
            if table.contains_key(key) {
                return Err(HarnessError::Config(format!(
                    "`{key}` is set per cell; use `methods` / `seeds` instead"
                )));
            }
        }
        let mut exp = toml::Table::new();
        for key in EXPERIMENT_KEYS {
            if let Some(v) = table.remove(key) {
                exp.insert(key.to_string(), v);
            }
        }
        let train: TrainConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Keys {
            datasets: Vec<PathBuf>,
            methods: Vec<String>,
            #[serde(default = "default_seeds")]
            seeds: Vec<u64>,
            #[serde(default = "default_output")]
            output: PathBuf,
            #[serde(default = "one")]
            jobs: usize,
            #[serde(default = "five")]
            resampler_k: usize,
            #[serde(default = "one_u64")]
            split_seed: u64,
        }
        let keys: Keys = toml::Value::Table(exp)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let methods = keys.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
        let cfg = ExperimentConfig {
            datasets: keys
                .datasets
                .into_iter()
                .map(|p| if p.is_absolute() { p } else { base.join(p) })
                .collect(),
            methods,
            seeds: keys.seeds,
            output: keys.output,
            jobs: keys.jobs,
            resampler_k: keys.resampler_k,
            split_seed: keys.split_seed,
            train,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.datasets.is_empty() {
            return Err(HarnessError::Config("no datasets configured".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.jobs == 0 {
            return Err(HarnessError::Config("jobs must be at least 1".into()));
        }
        if self.resampler_k == 0 {
            return Err(HarnessError::Config("resampler_k must be at least 1".into()));
        }
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Hex SHA-256 of the config's JSON form with `jobs` cleared, since
    /// concurrency does not change results; embedded in every result.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { jobs: 0, ..self.clone() };
        hex_digest(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }

    /// Output directory, placed under `$ADVOS_OUTPUT_ROOT` when relative and
    /// the variable is set.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output.is_relative() => PathBuf::from(root).join(&self.output),
            _ => self.output.clone(),
        }
    }

    /// Training settings for one cell.
    pub fn cell_train_config(&self, method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            regime: method.regime(),
            seed,
            ..self.train.clone()
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

fn five() -> usize {
    5
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Config(format!("cannot parse grid `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // round to 12 decimals so 0.1 + 2·0.1 prints as 0.3
            (0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(HarnessError::Config(format!("grid values must lie in [0, 1]: `{s}`")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_config_with_training_overrides() {
        let cfg = ExperimentConfig::parse(
            "datasets = [\"d.toml\"]\nmethods = [\"Q\", \"smote+q\", \"DO\"]\nepochs = 7\nf = 0.5\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.datasets, vec![PathBuf::from("/base/d.toml")]);
        assert_eq!(cfg.methods, vec![Method::Q, Method::SmoteQ, Method::Do]);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.f, 0.5);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.cell_train_config(Method::Do, 9).regime, Regime::Do);
    }

    #[test]
    fn unknown_keys_and_methods_are_config_errors() {
        for text in [
            "datasets = [\"a\"]\nmethods = [\"Q\"]\nepochz = 3\n",
            "datasets = [\"a\"]\nmethods = [\"GAMO\"]\n",
            "datasets = [\"a\"]\nmethods = [\"Q\"]\nseeds = []\n",
            "datasets = [\"a\"]\nmethods = [\"Q\"]\nseed = 4\n",
            "datasets = [\"a\"]\nmethods = [\"Q\"]\nf = 2.0\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(text, Path::new("")), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1:1.0:0.1").unwrap().len(), 10);
        assert_eq!(parse_grid("0.1:1.0:0.1").unwrap()[2], 0.3);
        assert_eq!(parse_grid("0.25,0.5,0.75,1.0").unwrap(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("1.0").unwrap(), vec![1.0]);
        assert!(parse_grid("0:2:1").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
    }
}
