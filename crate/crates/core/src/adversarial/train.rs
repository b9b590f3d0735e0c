use std::fmt;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    classifier_loss, critic_loss, generator_loss, make_sampling_plan, AdversarialError, Checkpoint, GeneratorMixture,
    Regime, SamplingPlan, TrainConfig,
};
use crate::data::Dataset;
use crate::metrics::EvalReport;
use crate::nn::{
    forward_mlp, gradient_penalty, Activation, AdamState, Mlp, MlpSpec, NodeId, Tape, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    Generator,
    Critic,
    Classifier,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Generator => "generator",
            Player::Critic => "critic",
            Player::Classifier => "classifier",
        })
    }
}

/// Independent random streams, so that enabling the adversarial players does
/// not perturb the classifier's initialization or batch order.
#[derive(Clone, Copy)]
enum Stream {
    ClassifierInit = 0,
    CriticInit = 1,
    GeneratorInit = 2,
    Batches = 3,
    Adversarial = 4,
    Schedule = 5,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub acsa: f64,
    pub gm: f64,
    /// Mean critic loss over this epoch's updates.
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub loss_q: f64,
    /// Generated rows fed to the classifier this epoch, per class.
    pub generated: Vec<usize>,
}

/// Parameters and optimizer state of all three players plus the random
/// streams driving training. The generator and critic exist only when the
/// regime is adversarial and the sampling plan is active.
#[derive(Debug, Clone)]
pub struct ThreePlayerState {
    config: TrainConfig,
    plan: SamplingPlan,
    generator: Option<GeneratorMixture>,
    critic: Option<Mlp>,
    classifier: Mlp,
    adam_g: Option<AdamState>,
    adam_d: Option<AdamState>,
    adam_q: AdamState,
    epoch: usize,
    rng_batches: ChaCha8Rng,
    rng_adv: ChaCha8Rng,
    rng_schedule: ChaCha8Rng,
}

fn grads_of(tape: &Tape, loss: NodeId, nodes: &[NodeId]) -> Result<Vec<Tensor>, AdversarialError> {
    let g = tape.backward(loss)?;
    Ok(nodes.iter().map(|&n| g.get_or_zeros(n, tape.value(n).shape())).collect())
}

impl ThreePlayerState {
    pub fn new(train: &Dataset, config: &TrainConfig) -> Result<Self, AdversarialError> {
        config.validate()?;
        if train.n() == 0 {
            return Err(AdversarialError::Config("empty training set".into()));
        }
        let sizes = train.class_sizes();
        if let Some(k) = sizes.iter().position(|&p| p == 0) {
            return Err(AdversarialError::Config(format!("class {k} has no training rows")));
        }
        let plan = make_sampling_plan(&sizes, if config.regime == Regime::Baseline { 0.0 } else { config.f })?;
        let d = train.d();
        let c = train.n_classes();

        let mut q_widths = vec![d];
        q_widths.extend(&config.q_widths);
        q_widths.push(c);
        let q_spec = MlpSpec::uniform(q_widths, Activation::Relu, Activation::Softmax)?;
        let classifier = Mlp::new(q_spec, &mut stream(config.seed, Stream::ClassifierInit));
        let adam_q = AdamState::new(config.adam_q, &classifier.param_shapes());

        let adversarial = config.regime != Regime::Baseline && plan.is_active();
        if config.regime != Regime::Baseline && !adversarial {
            warn!("no generated rows scheduled (balanced data or f = 0); training the classifier alone");
        }
        let (generator, critic, adam_g, adam_d) = if adversarial {
            let slope = Activation::LeakyRelu(config.leaky_slope);
            let mut d_widths = vec![d];
            d_widths.extend(&config.d_widths);
            d_widths.push(1);
            let critic = Mlp::new(
                MlpSpec::uniform(d_widths, slope, Activation::Identity)?,
                &mut stream(config.seed, Stream::CriticInit),
            );
            let generator = GeneratorMixture::new(
                train,
                config.latent_dim,
                &config.g_widths,
                config.leaky_slope,
                &mut stream(config.seed, Stream::GeneratorInit),
            )?;
            let ag = AdamState::new(config.adam_g, &generator.param_shapes());
            let ad = AdamState::new(config.adam_d, &critic.param_shapes());
            (Some(generator), Some(critic), Some(ag), Some(ad))
        } else {
            (None, None, None, None)
        };
        Ok(Self {
            config: config.clone(),
            plan,
            generator,
            critic,
            classifier,
            adam_g,
            adam_d,
            adam_q,
            epoch: 0,
            rng_batches: stream(config.seed, Stream::Batches),
            rng_adv: stream(config.seed, Stream::Adversarial),
            rng_schedule: stream(config.seed, Stream::Schedule),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn classifier(&self) -> &Mlp {
        &self.classifier
    }

    pub fn critic(&self) -> Option<&Mlp> {
        self.critic.as_ref()
    }

    pub fn generator(&self) -> Option<&GeneratorMixture> {
        self.generator.as_ref()
    }

    /// True when the generator and critic take part in training.
    pub fn is_adversarial(&self) -> bool {
        self.generator.is_some()
    }

    fn check(&self, player: Player, value: f64) -> Result<f64, AdversarialError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(AdversarialError::NonFinite { epoch: self.epoch + 1, player, value })
        }
    }

    fn latent(&mut self, n: usize) -> Tensor {
        let m = self.config.latent_dim;
        let data = (0..n * m).map(|_| self.rng_adv.sample(StandardNormal)).collect();
        Tensor::new(n, m, data).expect("latent shape")
    }

    fn adversaries(&self) -> Result<(&GeneratorMixture, &Mlp), AdversarialError> {
        match (&self.generator, &self.critic) {
            (Some(g), Some(d)) => Ok((g, d)),
            _ => Err(AdversarialError::Config("the adversarial players are not active".into())),
        }
    }

    /// One critic update on `x_real` against generated rows of the same
    /// classes. Returns the critic loss.
    pub fn critic_step(&mut self, x_real: &Tensor, y_real: &[usize]) -> Result<f64, AdversarialError> {
        self.adversaries()?;
        // pair real and generated rows class by class
        let mut order: Vec<usize> = (0..y_real.len()).collect();
        order.sort_by_key(|&r| y_real[r]);
        let real = x_real.select_rows(&order);
        let classes: Vec<usize> = order.iter().map(|&r| y_real[r]).collect();
        let z = self.latent(classes.len());
        let (generator, critic) = self.adversaries()?;
        let (fake, _) = generator.sample(&z, &classes)?;

        let mut tape = Tape::new();
        let params = critic.bind(&mut tape, true);
        let spec = critic.spec().clone();
        let xr = tape.constant(real.clone());
        let xf = tape.constant(fake.clone());
        let d_real = forward_mlp(&spec, &params, xr, &mut tape)?;
        let d_fake = forward_mlp(&spec, &params, xf, &mut tape)?;
        let penalty = match self.config.operator {
            super::Operator::WganGp => Some(gradient_penalty(
                &mut tape,
                &spec,
                &params,
                &real,
                &fake,
                self.config.lambda,
                &mut self.rng_adv,
            )?),
            super::Operator::Vanilla => None,
        };
        let loss = critic_loss(&mut tape, self.config.operator, d_real, d_fake, penalty)?;
        let value = self.check(Player::Critic, tape.value(loss).get(0, 0))?;
        let grads = grads_of(&tape, loss, &params)?;
        let critic = self.critic.as_mut().expect("checked above");
        self.adam_d.as_mut().expect("critic optimizer").step(critic.params_mut(), &grads)?;
        Ok(value)
    }

    /// One generator update on `n` rows with classes drawn uniformly.
    pub fn generator_step(&mut self, n: usize) -> Result<f64, AdversarialError> {
        self.adversaries()?;
        let classes = self.plan.generator_classes(n, &mut self.rng_adv);
        let z = self.latent(n);
        let (generator, critic) = self.adversaries()?;

        let mut tape = Tape::new();
        let bound = generator.bind(&mut tape, true);
        let d_params = critic.bind(&mut tape, false);
        let q_params = self.classifier.bind(&mut tape, false);
        let gen = generator.forward(&mut tape, &bound, &z, &classes)?;
        let d_fake = forward_mlp(critic.spec(), &d_params, gen.samples, &mut tape)?;
        let q_fake = forward_mlp(self.classifier.spec(), &q_params, gen.samples, &mut tape)?;
        let loss = generator_loss(&mut tape, self.config.regime, self.config.operator, d_fake, q_fake, &gen.classes)?;
        let value = self.check(Player::Generator, tape.value(loss).get(0, 0))?;
        let grads = grads_of(&tape, loss, &GeneratorMixture::nodes(&bound))?;
        let generator = self.generator.as_mut().expect("checked above");
        self.adam_g.as_mut().expect("generator optimizer").step(generator.params_mut(), &grads)?;
        Ok(value)
    }

    /// One classifier update on a real minibatch plus generated rows of the
    /// given classes (detached from the generator).
    pub fn classifier_step(
        &mut self,
        x_real: &Tensor,
        y_real: &[usize],
        generated: &[usize],
    ) -> Result<f64, AdversarialError> {
        let fake = if generated.is_empty() {
            None
        } else {
            let z = self.latent(generated.len());
            let (generator, _) = self.adversaries()?;
            Some(generator.sample(&z, generated)?)
        };
        let mut tape = Tape::new();
        let params = self.classifier.bind(&mut tape, true);
        let spec = self.classifier.spec().clone();
        let xr = tape.constant(x_real.clone());
        let q_real = forward_mlp(&spec, &params, xr, &mut tape)?;
        let gen = match &fake {
            Some((x, classes)) => {
                let xg = tape.constant(x.clone());
                Some((forward_mlp(&spec, &params, xg, &mut tape)?, classes.as_slice()))
            }
            None => None,
        };
        let loss = classifier_loss(&mut tape, self.config.regime, q_real, y_real, gen)?;
        let value = self.check(Player::Classifier, tape.value(loss).get(0, 0))?;
        let grads = grads_of(&tape, loss, &params)?;
        self.adam_q.step(self.classifier.params_mut(), &grads)?;
        Ok(value)
    }

    /// One pass over `train` in shuffled minibatches.
    pub fn run_epoch(&mut self, train: &Dataset) -> Result<EpochLosses, AdversarialError> {
        let n = train.n();
        let bs = self.config.batch_size.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut self.rng_batches);
        let batches: Vec<&[usize]> = perm.chunks(bs).collect();
        let schedule = if self.is_adversarial() {
            self.plan.epoch_schedule(batches.len(), &mut self.rng_schedule)
        } else {
            vec![Vec::new(); batches.len()]
        };
        let mut losses = EpochLosses::default();
        let mut generated = vec![0; train.n_classes()];
        for (idx, gen) in batches.iter().zip(&schedule) {
            let x = train.x().select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| train.y()[i]).collect();
            if self.is_adversarial() {
                for _ in 0..self.config.critic_steps {
                    losses.d.push(self.critic_step(&x, &y)?);
                }
                losses.g.push(self.generator_step(y.len())?);
            }
            losses.q.push(self.classifier_step(&x, &y, gen)?);
            for &k in gen {
                generated[k] += 1;
            }
        }
        losses.generated = generated;
        self.epoch += 1;
        Ok(losses)
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<EvalReport, AdversarialError> {
        let (pred, _) = predict(&self.classifier, test.x())?;
        Ok(EvalReport::new(test.y(), &pred, test.n_classes(), Some(self.epoch))?)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.config, self.classifier.clone(), self.critic.clone(), self.generator.clone())
    }
}

/// Loss values collected over one epoch.
#[derive(Debug, Clone, Default)]
pub struct EpochLosses {
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
    pub generated: Vec<usize>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ThreePlayerState,
    pub history: Vec<EpochRecord>,
    pub final_report: EvalReport,
    /// Highest test ACSA over epochs, earliest epoch on ties.
    pub best_report: EvalReport,
}

/// Trains for `config.epochs`, evaluating on `test` after every epoch.
pub fn train(train: &Dataset, test: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, AdversarialError> {
    if test.n_classes() != train.n_classes() || test.d() != train.d() {
        return Err(AdversarialError::Config("train and test sets disagree on classes or features".into()));
    }
    let mut state = ThreePlayerState::new(train, config)?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<EvalReport> = None;
    let mut last = None;
    for _ in 0..config.epochs {
        let losses = state.run_epoch(train)?;
        let report = state.evaluate(test)?;
        history.push(EpochRecord {
            epoch: state.epoch(),
            acsa: report.acsa,
            gm: report.gm,
            loss_d: mean(&losses.d),
            loss_g: mean(&losses.g),
            loss_q: mean(&losses.q).unwrap_or(0.0),
            generated: losses.generated,
        });
        if best.as_ref().is_none_or(|b| report.acsa > b.acsa) {
            best = Some(report.clone());
        }
        last = Some(report);
    }
    Ok(TrainOutcome {
        state,
        history,
        final_report: last.expect("at least one epoch"),
        best_report: best.expect("at least one epoch"),
    })
}

/// Class ids (argmax, ties to the lower id) and probability rows.
pub fn predict(q: &Mlp, x: &Tensor) -> Result<(Vec<usize>, Tensor), AdversarialError> {
    let probs = q.predict(x)?;
    let labels = probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok((labels, probs))
}
