//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

pub mod checks;
pub mod grad;

use advos::nn::{Activation, Tensor};

/// Plain-loop MLP forward. Returns the output rows and the smallest
/// |pre-activation| seen at a rectifier, so callers can avoid kinks.
pub fn mlp_forward(acts: &[Activation], params: &[Tensor], x: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let mut h: Vec<Vec<f64>> = x.to_vec();
    let mut min_kink = f64::INFINITY;
    for (l, act) in acts.iter().enumerate() {
        let w = &params[2 * l];
        let b = &params[2 * l + 1];
        let mut next = Vec::with_capacity(h.len());
        for row in &h {
            let mut z = vec![0.0; w.cols()];
            for (j, zj) in z.iter_mut().enumerate() {
                let mut s = b.get(0, j);
                for (i, xi) in row.iter().enumerate() {
                    s += xi * w.get(i, j);
                }
                *zj = s;
            }
            if matches!(act, Activation::LeakyRelu(_) | Activation::Relu) {
                for v in &z {
                    min_kink = min_kink.min(v.abs());
                }
            }
            next.push(apply(*act, &z));
        }
        h = next;
    }
    (h, min_kink)
}

pub fn apply(act: Activation, z: &[f64]) -> Vec<f64> {
    match act {
        Activation::LeakyRelu(a) => z.iter().map(|&v| if v > 0.0 { v } else { a * v }).collect(),
        Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Sigmoid => z.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
        Activation::Identity => z.to_vec(),
        Activation::Softmax => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        }
    }
}

/// Derivative of a pointwise activation at pre-activation `v`.
pub fn slope(act: Activation, v: f64) -> f64 {
    match act {
        Activation::LeakyRelu(a) => if v > 0.0 { 1.0 } else { a },
        Activation::Relu => if v > 0.0 { 1.0 } else { 0.0 },
        Activation::Identity => 1.0,
        Activation::Sigmoid => {
            let s = 1.0 / (1.0 + (-v).exp());
            s * (1.0 - s)
        }
        Activation::Softmax => panic!("not pointwise"),
    }
}

/// Gradient of a scalar-output MLP with pointwise activations with respect
/// to one input row, by the chain rule written out by hand.
pub fn input_grad(acts: &[Activation], params: &[Tensor], x: &[f64]) -> Vec<f64> {
    let mut pre = Vec::new();
    let mut h = x.to_vec();
    for (l, act) in acts.iter().enumerate() {
        let w = &params[2 * l];
        let b = &params[2 * l + 1];
        let z: Vec<f64> = (0..w.cols())
            .map(|j| b.get(0, j) + h.iter().enumerate().map(|(i, xi)| xi * w.get(i, j)).sum::<f64>())
            .collect();
        h = apply(*act, &z);
        pre.push(z);
    }
    let mut delta = vec![1.0];
    for l in (0..acts.len()).rev() {
        let w = &params[2 * l];
        let dz: Vec<f64> = delta.iter().zip(&pre[l]).map(|(d, &z)| d * slope(acts[l], z)).collect();
        delta = (0..w.rows()).map(|i| (0..w.cols()).map(|j| w.get(i, j) * dz[j]).sum()).collect();
    }
    delta
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute-force k nearest rows among `cands` (excluding `q`), ties by index.
pub fn brute_knn(rows: &[Vec<f64>], cands: &[usize], q: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = cands.iter().filter(|&&c| c != q).map(|&c| (sq_dist(&rows[q], &rows[c]), c)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, c)| c).collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)` with a floor on the denominator.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-10)
}
