use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AdversarialError;

/// How many generated rows of each class feed the classifier per epoch, and
/// which class distributions the generator and classifier updates draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub f: f64,
    pub sizes: Vec<usize>,
    /// `m_k = ⌈f·(p_C − p_k)⌉`.
    pub counts: Vec<usize>,
    /// Uniform over classes.
    pub generator_dist: Vec<f64>,
    /// `m_k / Σ m`; all zero when the plan is inactive.
    pub classifier_dist: Vec<f64>,
}

/// Builds the plan for training class sizes `sizes`. `f = 0` is accepted and
/// yields an inactive plan.
pub fn make_sampling_plan(sizes: &[usize], f: f64) -> Result<SamplingPlan, AdversarialError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(AdversarialError::Config(format!("f must lie in [0, 1], got {f}")));
    }
    if sizes.is_empty() {
        return Err(AdversarialError::Config("no classes".into()));
    }
    let p_max = *sizes.iter().max().expect("nonempty");
    let counts: Vec<usize> = sizes
        .iter()
        // the small slack keeps products like 0.3·10 from rounding up to 4
        .map(|&p| (f * (p_max - p) as f64 - 1e-9).ceil().max(0.0) as usize)
        .collect();
    let total: usize = counts.iter().sum();
    let classifier_dist = counts
        .iter()
        .map(|&m| if total == 0 { 0.0 } else { m as f64 / total as f64 })
        .collect();
    Ok(SamplingPlan {
        f,
        sizes: sizes.to_vec(),
        generator_dist: vec![1.0 / sizes.len() as f64; sizes.len()],
        counts,
        classifier_dist,
    })
}

impl SamplingPlan {
    /// True when at least one generated row is scheduled per epoch.
    pub fn is_active(&self) -> bool {
        self.total() > 0
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// One epoch's generated-row classes, shuffled and dealt out to
    /// `n_batches` minibatches as evenly as possible.
    pub fn epoch_schedule<R: Rng + ?Sized>(&self, n_batches: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let mut classes: Vec<usize> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(k, &m)| std::iter::repeat_n(k, m))
            .collect();
        classes.shuffle(rng);
        let n = classes.len();
        (0..n_batches)
            .map(|b| classes[b * n / n_batches..(b + 1) * n / n_batches].to_vec())
            .collect()
    }

    /// `n` classes drawn uniformly, for a generator update.
    pub fn generator_classes<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let c = self.sizes.len();
        (0..n).map(|_| rng.gen_range(0..c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_balancing_plan() {
        let p = make_sampling_plan(&[10, 90], 1.0).unwrap();
        assert_eq!(p.counts, vec![80, 0]);
        assert_eq!(p.classifier_dist, vec![1.0, 0.0]);
        assert_eq!(p.generator_dist, vec![0.5, 0.5]);
    }

    #[test]
    fn half_rate_on_split_counts() {
        let p = make_sampling_plan(&[73, 1023], 0.5).unwrap();
        assert_eq!(p.counts, vec![475, 0]);
        assert_eq!(make_sampling_plan(&[73, 1023], 1.0).unwrap().counts[0], 950);
    }

    #[test]
    fn balanced_sizes_give_an_inactive_plan() {
        for f in [0.1, 0.7, 1.0] {
            assert!(!make_sampling_plan(&[50, 50], f).unwrap().is_active());
        }
        assert!(!make_sampling_plan(&[10, 90], 0.0).unwrap().is_active());
    }

    #[test]
    fn fraction_out_of_range() {
        assert!(make_sampling_plan(&[1, 2], 1.2).is_err());
        assert!(make_sampling_plan(&[1, 2], -0.5).is_err());
    }

    #[test]
    fn schedule_covers_the_counts_exactly() {
        let p = make_sampling_plan(&[3, 7, 20], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sched = p.epoch_schedule(4, &mut rng);
        assert_eq!(sched.len(), 4);
        let flat: Vec<usize> = sched.iter().flatten().copied().collect();
        for k in 0..3 {
            assert_eq!(flat.iter().filter(|&&c| c == k).count(), p.counts[k]);
        }
        let lens: Vec<usize> = sched.iter().map(Vec::len).collect();
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
    }
}
