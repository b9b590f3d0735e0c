//! Classical oversampling baselines: random duplication, SMOTE,
//! Borderline-SMOTE (variant 1) and ADASYN.
//!
//! Every non-largest class is oversampled up to the largest class size,
//! treating the union of all other classes as "majority" where a method
//! needs one. Neighbor searches are brute-force Euclidean with ties broken
//! by row index.

use log::warn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::nn::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("resampling needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("not applicable: class {class} has {size} samples, needs at least {needed}")]
    NotApplicable { class: usize, size: usize, needed: usize },
    #[error("neighbor count must be at least 1")]
    ZeroNeighbors,
    #[error("shape: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResampleMethod {
    #[serde(rename = "RO")]
    Random,
    #[serde(rename = "SMOTE")]
    Smote,
    #[serde(rename = "B-SMOTE")]
    BorderlineSmote,
    #[serde(rename = "ADASYN")]
    Adasyn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    /// Neighbor count for interpolation and, for B-SMOTE/ADASYN, for the
    /// whole-set neighborhood.
    pub k: usize,
    pub seed: u64,
}

impl ResampleSpec {
    pub fn new(method: ResampleMethod, seed: u64) -> Self {
        Self { method, k: 5, seed }
    }
}

/// Origin of one synthetic row: `x[base] + u·(x[neighbor] − x[base])`, or a
/// plain copy of `base` when `neighbor` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthetic {
    pub class: usize,
    pub base: usize,
    pub neighbor: Option<usize>,
    pub u: f64,
}

#[derive(Debug, Clone)]
pub struct Resampled {
    /// Original rows first, in order, followed by the synthetic rows.
    pub dataset: Dataset,
    /// One entry per appended row, indices refer to the input dataset.
    pub synthetic: Vec<Synthetic>,
}

pub fn resample(train: &Dataset, spec: &ResampleSpec) -> Result<Resampled, ResampleError> {
    match spec.method {
        ResampleMethod::Random => random_oversample(train, spec),
        ResampleMethod::Smote => smote(train, spec),
        ResampleMethod::BorderlineSmote => borderline_smote(train, spec),
        ResampleMethod::Adasyn => adasyn(train, spec),
    }
}

fn check(train: &Dataset, spec: &ResampleSpec) -> Result<usize, ResampleError> {
    if train.n_classes() < 2 {
        return Err(ResampleError::TooFewClasses(train.n_classes()));
    }
    if spec.k == 0 {
        return Err(ResampleError::ZeroNeighbors);
    }
    Ok(train.class_sizes().into_iter().max().unwrap_or(0))
}

/// Duplicates rows (with replacement) until every class has `p_C` rows.
pub fn random_oversample(train: &Dataset, spec: &ResampleSpec) -> Result<Resampled, ResampleError> {
    let target = check(train, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synth = Vec::new();
    for (k, rows) in train.class_index().iter().enumerate() {
        for _ in rows.len()..target {
            let base = rows[rng.gen_range(0..rows.len())];
            synth.push(Synthetic { class: k, base, neighbor: None, u: 0.0 });
        }
    }
    materialize(train, synth)
}

pub fn smote(train: &Dataset, spec: &ResampleSpec) -> Result<Resampled, ResampleError> {
    let target = check(train, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synth = Vec::new();
    for k in 0..train.n_classes() {
        let rows = &train.class_index()[k];
        smote_class(train, k, rows, target - rows.len(), spec.k, &mut rng, &mut synth);
    }
    materialize(train, synth)
}

/// SMOTE for class `k` with bases drawn uniformly from `bases`.
fn smote_class(
    train: &Dataset,
    k: usize,
    bases: &[usize],
    count: usize,
    k_nn: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Synthetic>,
) {
    if count == 0 {
        return;
    }
    let rows = &train.class_index()[k];
    let neighbors = same_class_neighbors(train, k, k_nn);
    for _ in 0..count {
        let base = bases[rng.gen_range(0..bases.len())];
        out.push(interpolate(k, base, &neighbors[&base], rng));
    }
    if rows.len() == 1 {
        warn!("class {k} has a single sample; duplicating instead of interpolating");
    }
}

fn interpolate(class: usize, base: usize, nn: &[usize], rng: &mut ChaCha8Rng) -> Synthetic {
    if nn.is_empty() {
        return Synthetic { class, base, neighbor: None, u: 0.0 };
    }
    let neighbor = nn[rng.gen_range(0..nn.len())];
    let u: f64 = rng.gen();
    Synthetic { class, base, neighbor: Some(neighbor), u }
}

/// Same-class `k`-NN lists keyed by row, with `k` lowered to `n_k − 1`
/// (with a warning) for small classes.
fn same_class_neighbors(train: &Dataset, class: usize, k: usize) -> std::collections::HashMap<usize, Vec<usize>> {
    let rows = &train.class_index()[class];
    let k_eff = k.min(rows.len().saturating_sub(1));
    if k_eff < k && rows.len() > 1 {
        warn!("class {class} has {} samples; using {k_eff} neighbors instead of {k}", rows.len());
    }
    rows.par_iter()
        .map(|&r| (r, nearest(train.x(), rows, r, k_eff)))
        .collect()
}

/// Indices of the `k` rows among `candidates` closest to row `query`
/// (excluding `query` itself), nearest first, ties by index.
pub fn nearest(x: &Tensor, candidates: &[usize], query: usize, k: usize) -> Vec<usize> {
    let q = x.row(query);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (sq_dist(q, x.row(c)), c))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    d.select_nth_unstable_by(k - 1, cmp);
    d.truncate(k);
    d.sort_by(cmp);
    d.into_iter().map(|(_, c)| c).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Number of rows among the `m` nearest neighbors of each row of `class`
/// (searched over the whole set) that belong to another class.
fn other_class_counts(train: &Dataset, class: usize, m: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..train.n()).collect();
    let y = train.y();
    train.class_index()[class]
        .par_iter()
        .map(|&r| nearest(train.x(), &all, r, m).into_iter().filter(|&o| y[o] != class).count())
        .collect()
}

/// Rows of `class` whose `m`-neighborhood holds at least `m/2` but fewer than
/// `m` rows of other classes.
pub fn danger_set(train: &Dataset, class: usize, m: usize) -> Vec<usize> {
    let counts = other_class_counts(train, class, m);
    let m_eff = m.min(train.n().saturating_sub(1));
    train.class_index()[class]
        .iter()
        .zip(counts)
        .filter(|&(_, c)| 2 * c >= m_eff && c < m_eff)
        .map(|(&r, _)| r)
        .collect()
}

/// Borderline-SMOTE: interpolation bases restricted to the danger set,
/// falling back to plain SMOTE for a class with no danger rows.
pub fn borderline_smote(train: &Dataset, spec: &ResampleSpec) -> Result<Resampled, ResampleError> {
    let target = check(train, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synth = Vec::new();
    for k in 0..train.n_classes() {
        let rows = &train.class_index()[k];
        let count = target - rows.len();
        if count == 0 {
            continue;
        }
        let danger = danger_set(train, k, spec.k);
        let bases: &[usize] = if danger.is_empty() {
            warn!("class {k} has no borderline samples; falling back to SMOTE");
            rows
        } else {
            &danger
        };
        smote_class(train, k, bases, count, spec.k, &mut rng, &mut synth);
    }
    materialize(train, synth)
}

/// Splits `total` in proportion to `weights` by largest remainder, ties to
/// the lower index. All-zero weights give a uniform split.
pub fn adasyn_allocation(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let share: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut alloc: Vec<usize> = share.iter().map(|s| s.floor() as usize).collect();
    let mut left = total - alloc.iter().sum::<usize>().min(total);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = share[a] - share[a].floor();
        let rb = share[b] - share[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    alloc
}

/// ADASYN: each minority row synthesizes in proportion to the share of other
/// classes among its `k` nearest neighbors in the whole set.
pub fn adasyn(train: &Dataset, spec: &ResampleSpec) -> Result<Resampled, ResampleError> {
    let target = check(train, spec)?;
    for (k, &p) in train.class_sizes().iter().enumerate() {
        if p < target && p < spec.k + 1 {
            return Err(ResampleError::NotApplicable { class: k, size: p, needed: spec.k + 1 });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut synth = Vec::new();
    for k in 0..train.n_classes() {
        let rows = &train.class_index()[k];
        let count = target - rows.len();
        if count == 0 {
            continue;
        }
        let ratios: Vec<f64> = other_class_counts(train, k, spec.k)
            .into_iter()
            .map(|c| c as f64 / spec.k as f64)
            .collect();
        if ratios.iter().all(|&r| r == 0.0) {
            warn!("class {k}: no other-class neighbors; allocating uniformly");
        }
        let alloc = adasyn_allocation(&ratios, count);
        let neighbors = same_class_neighbors(train, k, spec.k);
        for (&base, &g) in rows.iter().zip(&alloc) {
            for _ in 0..g {
                synth.push(interpolate(k, base, &neighbors[&base], &mut rng));
            }
        }
    }
    materialize(train, synth)
}

fn materialize(train: &Dataset, synthetic: Vec<Synthetic>) -> Result<Resampled, ResampleError> {
    let d = train.d();
    let mut data = Vec::with_capacity(synthetic.len() * d);
    for s in &synthetic {
        let b = train.x().row(s.base);
        match s.neighbor {
            None => data.extend_from_slice(b),
            Some(n) => {
                let nb = train.x().row(n);
                data.extend(b.iter().zip(nb).map(|(x, y)| x + s.u * (y - x)));
            }
        }
    }
    let x = Tensor::new(synthetic.len(), d, data).map_err(|e| ResampleError::Shape(e.to_string()))?;
    let y: Vec<usize> = synthetic.iter().map(|s| s.class).collect();
    let dataset = train.append(&x, &y).map_err(|e| ResampleError::Shape(e.to_string()))?;
    Ok(Resampled { dataset, synthetic })
}
