//! Randomized oracle comparisons for metrics and the SMOTE family.

use advos::data::Dataset;
use advos::metrics::{ConfusionMatrix, EvalReport};
use advos::nn::Tensor;
use advos::resamplers::{resample, ResampleMethod, ResampleSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{brute_knn, sq_dist};

/// Recall by counting, ACSA as their mean, GM as the C-th root of the product.
pub fn brute_metrics(cm: &[Vec<u64>]) -> (f64, f64) {
    let recalls: Vec<f64> = cm
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut hit = 0u64;
            let mut all = 0u64;
            for (j, &c) in row.iter().enumerate() {
                all += c;
                if j == k {
                    hit += c;
                }
            }
            hit as f64 / all as f64
        })
        .collect();
    let c = recalls.len() as f64;
    let acsa = 100.0 * recalls.iter().sum::<f64>() / c;
    let gm = 100.0 * recalls.iter().product::<f64>().powf(1.0 / c);
    (acsa, gm)
}

#[derive(Debug, Default)]
pub struct MetricCheck {
    pub max_diff: f64,
    pub gm_above_acsa: usize,
    pub binary_mismatch: usize,
}

pub fn metrics_check(cases: usize, seed: u64) -> MetricCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MetricCheck::default();
    for _ in 0..cases {
        let c = rng.gen_range(2..=10);
        let cm: Vec<Vec<u64>> = (0..c)
            .map(|k| {
                let mut row: Vec<u64> = (0..c).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..20) }).collect();
                if row.iter().all(|&v| v == 0) {
                    row[(k + 1) % c] = 1;
                }
                row
            })
            .collect();
        let r = EvalReport::from_confusion(ConfusionMatrix::from_counts(cm.clone()), None).unwrap();
        let (acsa, gm) = brute_metrics(&cm);
        out.max_diff = out.max_diff.max((r.acsa - acsa).abs()).max((r.gm - gm).abs());
        if r.gm > r.acsa {
            out.gm_above_acsa += 1;
        }
        let (tp, fn_, fp, tn) = (cm[0][0], cm[0][1], cm[1][0], cm[1][1]);
        if c == 2 {
            let n_p = (tp + fn_) as f64;
            let n_n = (fp + tn) as f64;
            let formula = 100.0 * 0.5 * (tp as f64 / n_p + tn as f64 / n_n);
            if r.acsa != formula {
                out.binary_mismatch += 1;
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct SmoteCheck {
    pub synthetic: usize,
    pub bad_interpolation: usize,
    pub bad_neighbor: usize,
    pub bad_danger_base: usize,
    pub bad_adasyn_allocation: usize,
    pub max_residual: f64,
}

fn random_set(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.gen_range(8..=30);
    let n_min = rng.gen_range(2..=n / 2);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let class = usize::from(i >= n_min);
        let shift = if class == 0 { rng.gen_range(0.0..0.8) } else { 0.0 };
        rows.push(vec![rng.gen_range(0.0..1.0) + shift, rng.gen_range(0.0..1.0)]);
        y.push(class);
    }
    Dataset::new(Tensor::from_rows(&rows).unwrap(), y, vec!["min".into(), "maj".into()]).unwrap()
}

/// Brute-force danger rows of `class`: at least half but not all of the `m`
/// nearest other rows belong to another class.
pub fn brute_danger(rows: &[Vec<f64>], y: &[usize], class: usize, m: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..rows.len()).collect();
    let m = m.min(rows.len() - 1);
    (0..rows.len())
        .filter(|&i| y[i] == class)
        .filter(|&i| {
            let c = brute_knn(rows, &all, i, m).iter().filter(|&&j| y[j] != class).count();
            2 * c >= m && c < m
        })
        .collect()
}

pub fn smote_family_check(cases: usize, seed: u64) -> SmoteCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SmoteCheck::default();
    let k = 5;
    for case in 0..cases {
        let ds = random_set(&mut rng);
        let rows: Vec<Vec<f64>> = ds.x().iter_rows().map(<[f64]>::to_vec).collect();
        let y = ds.y().to_vec();
        let members = ds.class_index()[0].clone();
        for method in [ResampleMethod::Smote, ResampleMethod::BorderlineSmote, ResampleMethod::Adasyn] {
            if method == ResampleMethod::Adasyn && members.len() < k + 1 {
                continue;
            }
            let res = resample(&ds, &ResampleSpec { method, k, seed: case as u64 }).unwrap();
            let k_eff = k.min(members.len() - 1);
            for (j, s) in res.synthetic.iter().enumerate() {
                out.synthetic += 1;
                let new = res.dataset.x().row(ds.n() + j);
                let base = &rows[s.base];
                let Some(nb) = s.neighbor else {
                    out.bad_interpolation += usize::from(new != base.as_slice());
                    continue;
                };
                let nbr = &rows[nb];
                let residual = new.iter().zip(base).zip(nbr).map(|((x, b), n)| (x - (b + s.u * (n - b))).abs()).fold(0.0, f64::max);
                out.max_residual = out.max_residual.max(residual);
                if !(0.0..=1.0).contains(&s.u) || residual > 1e-12 {
                    out.bad_interpolation += 1;
                }
                let knn = brute_knn(&rows, &members, s.base, k_eff);
                // a neighbor tied in distance with the k-th is equally valid
                let kth = knn.last().map(|&i| sq_dist(base, &rows[i])).unwrap_or(0.0);
                if !knn.contains(&nb) && sq_dist(base, nbr) > kth {
                    out.bad_neighbor += 1;
                }
            }
            match method {
                ResampleMethod::BorderlineSmote => {
                    let danger = brute_danger(&rows, &y, 0, k);
                    if !danger.is_empty() {
                        out.bad_danger_base += res.synthetic.iter().filter(|s| !danger.contains(&s.base)).count();
                    }
                }
                ResampleMethod::Adasyn => {
                    let all: Vec<usize> = (0..rows.len()).collect();
                    let ratios: Vec<f64> = members
                        .iter()
                        .map(|&i| brute_knn(&rows, &all, i, k).iter().filter(|&&j| y[j] != 0).count() as f64 / k as f64)
                        .collect();
                    let total = ds.class_sizes()[1] - members.len();
                    let sum: f64 = ratios.iter().sum();
                    let got: Vec<usize> =
                        members.iter().map(|&m| res.synthetic.iter().filter(|s| s.base == m).count()).collect();
                    for (g, r) in got.iter().zip(&ratios) {
                        let ideal = if sum > 0.0 { r / sum * total as f64 } else { total as f64 / members.len() as f64 };
                        if (*g as f64 - ideal).abs() >= 1.0 {
                            out.bad_adasyn_allocation += 1;
                        }
                    }
                    if got.iter().sum::<usize>() != total {
                        out.bad_adasyn_allocation += 1;
                    }
                }
                _ => {}
            }
        }
    }
    out
}
