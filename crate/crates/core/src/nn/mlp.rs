use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Softmax,
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `U(−a, a)` with `a = √(6 / (fan_in + fan_out))`; zero biases.
    #[default]
    GlorotUniform,
}

/// Layer widths `[in, h1, …, out]` and one activation per weight layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    #[serde(default)]
    init: Init,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::Config(
                "an MLP needs at least an input and an output width".into(),
            ));
        }
        if activations.len() != widths.len() - 1 {
            return Err(NnError::Config(format!(
                "{} activations for {} weight layers",
                activations.len(),
                widths.len() - 1
            )));
        }
        if widths.contains(&0) {
            return Err(NnError::Config("layer widths must be positive".into()));
        }
        Ok(Self {
            widths,
            activations,
            init: Init::GlorotUniform,
        })
    }

    /// Hidden layers share `hidden` as activation; the last layer uses `output`.
    pub fn uniform(widths: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self, NnError> {
        let n = widths.len().saturating_sub(1);
        let mut acts = vec![hidden; n.saturating_sub(1)];
        acts.push(output);
        Self::new(widths, acts)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    /// Expected `(rows, cols)` of every parameter tensor: `W₁, b₁, W₂, b₂, …`.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.widths
            .windows(2)
            .flat_map(|w| [(w[0], w[1]), (1, w[1])])
            .collect()
    }
}

/// An MLP's layer layout and its current parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<Tensor>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = spec
            .param_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, (rows, cols))| {
                // odd slots are biases
                if i % 2 == 1 {
                    return Tensor::zeros(rows, cols);
                }
                match spec.init {
                    Init::GlorotUniform => {
                        let a = (6.0 / (rows + cols) as f64).sqrt();
                        let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
                        Tensor::new(rows, cols, data).expect("init shape")
                    }
                }
            })
            .collect();
        Self { spec, params }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<Tensor>) -> Result<Self, NnError> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(NnError::Shape(format!(
                "{} parameter tensors for {} expected",
                params.len(),
                shapes.len()
            )));
        }
        for (p, s) in params.iter().zip(&shapes) {
            p.expect_shape(*s)?;
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params.iter().map(Tensor::shape).collect()
    }

    /// Copies the parameters onto `tape`, trainable or frozen.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<NodeId> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect()
    }

    /// Forward pass without recording gradients.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let x = tape.constant(input.clone());
        let out = forward_mlp(&self.spec, &params, x, &mut tape)?;
        Ok(tape.value(out).clone())
    }
}

/// Records the forward pass of an MLP on `tape`.
pub fn forward_mlp(
    spec: &MlpSpec,
    params: &[NodeId],
    input: NodeId,
    tape: &mut Tape,
) -> Result<NodeId, NnError> {
    let shapes = spec.param_shapes();
    if params.len() != shapes.len() {
        return Err(NnError::Config(format!(
            "{} parameter nodes for {} expected",
            params.len(),
            shapes.len()
        )));
    }
    for (p, s) in params.iter().zip(&shapes) {
        if tape.value(*p).shape() != *s {
            let (r, c) = tape.value(*p).shape();
            return Err(NnError::Config(format!(
                "parameter is {r}x{c}, spec expects {}x{}",
                s.0, s.1
            )));
        }
    }
    if tape.value(input).cols() != spec.input_dim() {
        return Err(NnError::Config(format!(
            "input has {} columns, network expects {}",
            tape.value(input).cols(),
            spec.input_dim()
        )));
    }
    let mut h = input;
    for (layer, act) in spec.activations.iter().enumerate() {
        let z = tape.matmul(h, params[2 * layer])?;
        let z = tape.add_row(z, params[2 * layer + 1])?;
        h = match act {
            Activation::LeakyRelu(slope) => tape.leaky_relu(z, *slope),
            Activation::Relu => tape.relu(z),
            Activation::Softmax => tape.softmax(z),
            Activation::Sigmoid => tape.sigmoid(z),
            Activation::Identity => z,
        };
    }
    if !tape.value(h).is_finite() {
        return Err(NnError::NonFinite("network output".into()));
    }
    Ok(h)
}
