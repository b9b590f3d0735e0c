use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AdversarialError;
use crate::data::Dataset;
use crate::nn::{forward_mlp, Activation, Mlp, MlpSpec, NodeId, Tape, Tensor};

/// Class-conditional generator whose output for class `k` is a convex
/// combination of that class's training rows `τ_k`:
/// `G(z|k) = softmax(head_k(trunk(z ⊕ onehot(k))))ᵀ τ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMixture {
    latent_dim: usize,
    trunk_spec: MlpSpec,
    head_specs: Vec<MlpSpec>,
    /// Trunk parameters followed by each head's parameters, in class order.
    params: Vec<Tensor>,
    tau: Vec<Tensor>,
}

/// Generator parameters bound to a tape.
#[derive(Debug, Clone)]
pub struct BoundGenerator {
    trunk: Vec<NodeId>,
    heads: Vec<Vec<NodeId>>,
}

/// One generated batch on a tape. Rows are grouped by class in ascending
/// order; `classes[r]` is the class of row `r`.
#[derive(Debug, Clone)]
pub struct Generated {
    pub samples: NodeId,
    pub classes: Vec<usize>,
    /// `(class, weights node)` per class present, in row order.
    pub weights: Vec<(usize, NodeId)>,
}

impl GeneratorMixture {
    /// Builds the mixture over the class blocks of `train`. `hidden` are the
    /// trunk's hidden widths; the last one feeds every head.
    pub fn new<R: Rng + ?Sized>(
        train: &Dataset,
        latent_dim: usize,
        hidden: &[usize],
        slope: f64,
        rng: &mut R,
    ) -> Result<Self, AdversarialError> {
        let tau: Vec<Tensor> = (0..train.n_classes()).map(|k| train.class_rows(k)).collect();
        Self::from_blocks(tau, latent_dim, hidden, slope, rng)
    }

    pub fn from_blocks<R: Rng + ?Sized>(
        tau: Vec<Tensor>,
        latent_dim: usize,
        hidden: &[usize],
        slope: f64,
        rng: &mut R,
    ) -> Result<Self, AdversarialError> {
        if let Some(k) = tau.iter().position(Tensor::is_empty) {
            return Err(AdversarialError::Config(format!("class {k} has no training rows")));
        }
        if hidden.is_empty() {
            return Err(AdversarialError::Config("the generator trunk needs a hidden layer".into()));
        }
        let c = tau.len();
        let mut widths = vec![latent_dim + c];
        widths.extend_from_slice(hidden);
        let trunk_spec = MlpSpec::uniform(widths, Activation::LeakyRelu(slope), Activation::LeakyRelu(slope))?;
        let mut params = Mlp::new(trunk_spec.clone(), rng).params().to_vec();
        let last = *hidden.last().expect("nonempty");
        let mut head_specs = Vec::with_capacity(c);
        for block in &tau {
            let spec = MlpSpec::new(vec![last, block.rows()], vec![Activation::Softmax])?;
            params.extend(Mlp::new(spec.clone(), rng).params().iter().cloned());
            head_specs.push(spec);
        }
        Ok(Self {
            latent_dim,
            trunk_spec,
            head_specs,
            params,
            tau,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn n_classes(&self) -> usize {
        self.tau.len()
    }

    /// Training rows of class `k`.
    pub fn block(&self, k: usize) -> &Tensor {
        &self.tau[k]
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

    /// Replaces all parameters; shapes must match.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<(), AdversarialError> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(AdversarialError::Config("generator parameter shapes do not match".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundGenerator {
        let nodes: Vec<NodeId> = self
            .params
            .iter()
            .map(|p| if trainable { tape.param(p.clone()) } else { tape.constant(p.clone()) })
            .collect();
        let t = self.trunk_spec.param_shapes().len();
        let trunk = nodes[..t].to_vec();
        let heads = nodes[t..].chunks(2).map(<[NodeId]>::to_vec).collect();
        BoundGenerator { trunk, heads }
    }

    /// All parameter nodes of a bound generator, in [`Self::params`] order.
    pub fn nodes(bound: &BoundGenerator) -> Vec<NodeId> {
        bound.trunk.iter().chain(bound.heads.iter().flatten()).copied().collect()
    }

    /// Records `G(z_r | classes[r])` for every row on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundGenerator,
        z: &Tensor,
        classes: &[usize],
    ) -> Result<Generated, AdversarialError> {
        let c = self.n_classes();
        if z.rows() != classes.len() || z.cols() != self.latent_dim {
            return Err(AdversarialError::Config(format!(
                "latent batch is {}x{}, expected {}x{}",
                z.rows(),
                z.cols(),
                classes.len(),
                self.latent_dim
            )));
        }
        if let Some(&k) = classes.iter().find(|&&k| k >= c) {
            return Err(AdversarialError::Config(format!("class {k} out of range for {c} classes")));
        }
        let mut parts = Vec::new();
        let mut weights = Vec::new();
        let mut order = Vec::with_capacity(classes.len());
        for k in 0..c {
            let rows: Vec<usize> = (0..classes.len()).filter(|&r| classes[r] == k).collect();
            if rows.is_empty() {
                continue;
            }
            let mut input = Vec::with_capacity(rows.len() * (self.latent_dim + c));
            for &r in &rows {
                input.extend_from_slice(z.row(r));
                input.extend((0..c).map(|j| if j == k { 1.0 } else { 0.0 }));
            }
            let input = tape.constant(Tensor::new(rows.len(), self.latent_dim + c, input)?);
            let h = forward_mlp(&self.trunk_spec, &bound.trunk, input, tape)?;
            let g = forward_mlp(&self.head_specs[k], &bound.heads[k], h, tape)?;
            let block = tape.constant(self.tau[k].clone());
            parts.push(tape.matmul(g, block)?);
            weights.push((k, g));
            order.extend(std::iter::repeat_n(k, rows.len()));
        }
        let samples = if parts.len() == 1 { parts[0] } else { tape.concat_rows(&parts)? };
        Ok(Generated { samples, classes: order, weights })
    }

    /// Numeric generation without gradients: `(samples, classes)` grouped by
    /// class as in [`Self::forward`].
    pub fn sample(&self, z: &Tensor, classes: &[usize]) -> Result<(Tensor, Vec<usize>), AdversarialError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let g = self.forward(&mut tape, &bound, z, classes)?;
        Ok((tape.value(g.samples).clone(), g.classes))
    }

    /// Mixture weights `g(z|k)` (one row per latent row) and samples `G(z|k)`.
    pub fn cwi_generate(&self, k: usize, z: &Tensor) -> Result<(Tensor, Tensor), AdversarialError> {
        if k >= self.n_classes() {
            return Err(AdversarialError::Config(format!("class {k} out of range")));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let g = self.forward(&mut tape, &bound, z, &vec![k; z.rows()])?;
        Ok((tape.value(g.weights[0].1).clone(), tape.value(g.samples).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn latent(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::new(n, m, (0..n * m).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn blocks() -> Vec<Tensor> {
        vec![
            Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap(),
            Tensor::from_rows(&[[0.3, 0.6]]).unwrap(),
        ]
    }

    #[test]
    fn weights_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = GeneratorMixture::from_blocks(blocks(), 4, &[8, 6], 0.2, &mut rng).unwrap();
        let (w, x) = g.cwi_generate(0, &latent(20, 4, &mut rng)).unwrap();
        assert_eq!(w.shape(), (20, 4));
        assert_eq!(x.shape(), (20, 2));
        for r in 0..20 {
            assert!(w.row(r).iter().all(|&v| v >= 0.0));
            assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(x.row(r).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn single_row_class_always_returns_that_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GeneratorMixture::from_blocks(blocks(), 3, &[5], 0.2, &mut rng).unwrap();
        let (_, x) = g.cwi_generate(1, &latent(6, 3, &mut rng)).unwrap();
        for r in 0..6 {
            assert_eq!(x.row(r), &[0.3, 0.6]);
        }
    }

    #[test]
    fn one_hot_head_selects_a_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = GeneratorMixture::from_blocks(blocks(), 2, &[3], 0.2, &mut rng).unwrap();
        // zero weights and a bias spike on instance 2 of class 0
        let n_trunk = g.trunk_spec.param_shapes().len();
        g.params[n_trunk] = Tensor::zeros(3, 4);
        g.params[n_trunk + 1] = Tensor::new(1, 4, vec![0.0, 0.0, 800.0, 0.0]).unwrap();
        let (_, x) = g.cwi_generate(0, &latent(3, 2, &mut rng)).unwrap();
        for r in 0..3 {
            assert_eq!(x.row(r), &[0.0, 1.0]);
        }
    }

    #[test]
    fn rows_are_grouped_by_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GeneratorMixture::from_blocks(blocks(), 2, &[3], 0.2, &mut rng).unwrap();
        let (x, classes) = g.sample(&latent(4, 2, &mut rng), &[1, 0, 1, 0]).unwrap();
        assert_eq!(classes, vec![0, 0, 1, 1]);
        assert_eq!(x.row(3), &[0.3, 0.6]);
    }

    #[test]
    fn empty_class_block_is_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tau = vec![Tensor::zeros(0, 2), Tensor::ones(2, 2)];
        assert!(matches!(
            GeneratorMixture::from_blocks(tau, 2, &[3], 0.2, &mut rng),
            Err(AdversarialError::Config(_))
        ));
    }
}
