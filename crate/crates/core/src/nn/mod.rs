//! Minimal dense-tensor neural network kernel: tensors, a reverse-mode tape
//! with enough second-order support for a gradient penalty, MLPs, floored
//! log losses and Adam.

mod mlp;
mod optim;
mod tape;
mod tensor;

pub use mlp::{forward_mlp, Activation, Init, Mlp, MlpSpec};
pub use optim::{AdamConfig, AdamState};
pub use tape::{softmax_rows, Gradients, NodeId, Tape};
pub use tensor::Tensor;

use rand::Rng;
use thiserror::Error;

/// Probability floor applied inside both log losses.
pub const PROB_FLOOR: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("op `{0}` has no second-order rule")]
    UnsupportedSecondOrder(&'static str),
}

/// Cross-entropy `−ln p[class]` with the probability floor.
pub fn ce_loss(probs: &[f64], class: usize) -> f64 {
    -probs[class].max(PROB_FLOOR).ln()
}

/// Complement cross-entropy `−ln(1 − p[class])` with the probability floor.
pub fn cce_loss(probs: &[f64], class: usize) -> f64 {
    -(1.0 - probs[class]).max(PROB_FLOOR).ln()
}

/// WGAN-GP penalty `λ·mean((‖∇D(x̂)‖ − 1)²)` on random interpolates
/// `x̂ = ε·real + (1 − ε)·fake`, one `ε ~ U(0,1)` per row.
///
/// `critic` holds the critic's parameter nodes on `tape`; the returned node is
/// differentiable with respect to them.
pub fn gradient_penalty<R: Rng + ?Sized>(
    tape: &mut Tape,
    spec: &MlpSpec,
    critic: &[NodeId],
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    rng: &mut R,
) -> Result<NodeId, NnError> {
    let eps: Vec<f64> = (0..real.rows()).map(|_| rng.gen::<f64>()).collect();
    gradient_penalty_with_eps(tape, spec, critic, real, fake, lambda, &eps)
}

/// [`gradient_penalty`] with the interpolation weights supplied.
pub fn gradient_penalty_with_eps(
    tape: &mut Tape,
    spec: &MlpSpec,
    critic: &[NodeId],
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    eps: &[f64],
) -> Result<NodeId, NnError> {
    if !(lambda >= 0.0) {
        return Err(NnError::Config(format!(
            "gradient penalty weight must be >= 0, got {lambda}"
        )));
    }
    real.expect_shape(fake.shape())?;
    if eps.len() != real.rows() {
        return Err(NnError::Shape(format!(
            "{} interpolation weights for {} rows",
            eps.len(),
            real.rows()
        )));
    }
    let mut mixed = real.clone();
    for (r, &e) in eps.iter().enumerate() {
        for (m, f) in mixed.row_mut(r).iter_mut().zip(fake.row(r)) {
            *m = e * *m + (1.0 - e) * f;
        }
    }
    let x_hat = tape.constant(mixed);
    let score = forward_mlp(spec, critic, x_hat, tape)?;
    let grad = tape.input_gradient(score, x_hat)?;
    let norm = tape.row_norm(grad);
    let shifted = tape.add_scalar(norm, -1.0);
    let sq = tape.square(shifted);
    let mean = tape.mean(sq);
    Ok(tape.scale(mean, lambda))
}
