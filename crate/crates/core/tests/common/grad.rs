//! Finite-difference gradient checks against the plain-loop oracles.

use advos::nn::{forward_mlp, gradient_penalty_with_eps, Activation, Mlp, MlpSpec, Tape, Tensor, PROB_FLOOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{input_grad, mlp_forward, rel_err};

pub const H: f64 = 1e-4;
pub const KINK: f64 = 1e-3;

fn hidden_act(rng: &mut ChaCha8Rng) -> Activation {
    match rng.gen_range(0..4) {
        0 => Activation::LeakyRelu(0.2),
        1 => Activation::Relu,
        2 => Activation::Sigmoid,
        _ => Activation::Identity,
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
}

struct Instance {
    spec: MlpSpec,
    params: Vec<Tensor>,
    x: Vec<Vec<f64>>,
    targets: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl Instance {
    fn oracle_loss(&self, params: &[Tensor]) -> f64 {
        let (out, _) = mlp_forward(self.spec.activations(), params, &self.x);
        let n = out.len() as f64;
        if *self.spec.activations().last().unwrap() == Activation::Softmax {
            out.iter().zip(&self.targets).map(|(p, &t)| -p[t].max(PROB_FLOOR).ln()).sum::<f64>() / n
        } else {
            let sq: f64 = out.iter().flatten().map(|v| v * v).sum::<f64>() / (n * out[0].len() as f64);
            let lin: f64 = out.iter().flatten().zip(self.weights.iter().flatten()).map(|(a, b)| a * b).sum();
            sq + lin
        }
    }

    fn tape_grads(&self) -> Vec<Tensor> {
        let mut tape = Tape::new();
        let ids: Vec<_> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let x = tape.constant(Tensor::from_rows(&self.x).unwrap());
        let out = forward_mlp(&self.spec, &ids, x, &mut tape).unwrap();
        let loss = if *self.spec.activations().last().unwrap() == Activation::Softmax {
            let nll = tape.pick_neg_log(out, &self.targets, false, PROB_FLOOR).unwrap();
            tape.mean(nll)
        } else {
            let sq = tape.square(out);
            let sq = tape.mean(sq);
            let lin = tape.mul_const(out, Tensor::from_rows(&self.weights).unwrap()).unwrap();
            let lin = tape.sum(lin);
            tape.add(sq, lin).unwrap()
        };
        let g = tape.backward(loss).unwrap();
        ids.iter().zip(&self.params).map(|(id, p)| g.get_or_zeros(*id, p.shape())).collect()
    }
}

fn draw_instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let depth = rng.gen_range(1..=3);
        let widths: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=5)).collect();
        let mut acts: Vec<Activation> = (0..depth - 1).map(|_| hidden_act(rng)).collect();
        let out_dim = *widths.last().unwrap();
        acts.push(match rng.gen_range(0..3) {
            0 if out_dim > 1 => Activation::Softmax,
            1 => Activation::Sigmoid,
            _ => Activation::Identity,
        });
        let spec = MlpSpec::new(widths.clone(), acts).unwrap();
        let params: Vec<Tensor> = spec
            .param_shapes()
            .into_iter()
            .map(|(r, c)| Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let n = rng.gen_range(1..=4);
        let x = random_rows(rng, n, widths[0]);
        let (_, kink) = mlp_forward(spec.activations(), &params, &x);
        if kink < KINK {
            continue;
        }
        let targets = (0..n).map(|_| rng.gen_range(0..out_dim)).collect();
        let weights = random_rows(rng, n, out_dim);
        return Instance { spec, params, x, targets, weights };
    }
}

pub fn fd_grads(params: &[Tensor], loss: impl Fn(&[Tensor]) -> f64) -> Vec<Tensor> {
    let mut out = Vec::new();
    for (k, p) in params.iter().enumerate() {
        let mut g = Tensor::zeros(p.rows(), p.cols());
        for i in 0..p.len() {
            let mut plus = params.to_vec();
            plus[k].data_mut()[i] += H;
            let mut minus = params.to_vec();
            minus[k].data_mut()[i] -= H;
            g.data_mut()[i] = (loss(&plus) - loss(&minus)) / (2.0 * H);
        }
        out.push(g);
    }
    out
}

pub fn flat(ts: &[Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data().to_vec()).collect()
}

pub fn critic(rng: &mut ChaCha8Rng, d: usize) -> (MlpSpec, Vec<Tensor>) {
    let spec = MlpSpec::uniform(vec![d, 4, 3, 1], Activation::LeakyRelu(0.2), Activation::Identity).unwrap();
    let mlp = Mlp::new(spec.clone(), rng);
    (spec, mlp.params().to_vec())
}

pub fn oracle_gp(spec: &MlpSpec, params: &[Tensor], mixed: &[Vec<f64>], lambda: f64) -> f64 {
    let total: f64 = mixed
        .iter()
        .map(|row| {
            let g = input_grad(spec.activations(), params, row);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm - 1.0).powi(2)
        })
        .sum();
    lambda * total / mixed.len() as f64
}

/// Worst relative error over `cases` random MLP/loss instances.
pub fn mlp_gradient_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|_| {
            let inst = draw_instance(&mut rng);
            rel_err(&flat(&inst.tape_grads()), &flat(&fd_grads(&inst.params, |p| inst.oracle_loss(p))))
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of gradient-penalty parameter gradients, and the
/// largest penalty-value mismatch, over `cases` random critics.
pub fn gp_gradient_worst(cases: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_grad, mut worst_value) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < cases {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=5);
        let (spec, params) = critic(&mut rng, d);
        let real = random_rows(&mut rng, n, d);
        let fake = random_rows(&mut rng, n, d);
        let eps: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mixed: Vec<Vec<f64>> = real
            .iter()
            .zip(&fake)
            .zip(&eps)
            .map(|((r, f), e)| r.iter().zip(f).map(|(a, b)| e * a + (1.0 - e) * b).collect())
            .collect();
        if mlp_forward(spec.activations(), &params, &mixed).1 < KINK {
            continue;
        }
        let mut tape = Tape::new();
        let ids: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
        let gp = gradient_penalty_with_eps(
            &mut tape,
            &spec,
            &ids,
            &Tensor::from_rows(&real).unwrap(),
            &Tensor::from_rows(&fake).unwrap(),
            10.0,
            &eps,
        )
        .unwrap();
        let expect = oracle_gp(&spec, &params, &mixed, 10.0);
        worst_value = worst_value.max((tape.value(gp).get(0, 0) - expect).abs() / expect.abs().max(1.0));
        let g = tape.backward(gp).unwrap();
        let analytic: Vec<Tensor> = ids.iter().zip(&params).map(|(id, p)| g.get_or_zeros(*id, p.shape())).collect();
        let numeric = fd_grads(&params, |p| oracle_gp(&spec, p, &mixed, 10.0));
        worst_grad = worst_grad.max(rel_err(&flat(&analytic), &flat(&numeric)));
        checked += 1;
    }
    (worst_grad, worst_value)
}
