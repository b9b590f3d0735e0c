//! Confusion matrices, average class-specific accuracy (ACSA) and the
//! geometric mean (GM) of per-class recalls.
//!
//! ACSA is the macro-averaged recall; for two classes it is
//! `0.5·(tp/Np + tn/Nn)`. Both scores are reported in percent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("class {0} has no samples in the ground truth")]
    EmptyClass(usize),
}

/// `C×C` counts; entry `(i, j)` counts true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix(Vec<Vec<u64>>);

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        Self(counts)
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.0[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.0
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.0[class].iter().sum()
    }

    /// Diagonal over row sum, per class.
    pub fn recalls(&self) -> Result<Vec<f64>, MetricError> {
        (0..self.n_classes())
            .map(|k| {
                let n = self.row_sum(k);
                if n == 0 {
                    Err(MetricError::EmptyClass(k))
                } else {
                    Ok(self.0[k][k] as f64 / n as f64)
                }
            })
            .collect()
    }
}

pub fn confusion(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix, MetricError> {
    if truth.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(MetricError::LabelOutOfRange {
                    label,
                    classes: n_classes,
                });
            }
        }
        m[t][p] += 1;
    }
    Ok(ConfusionMatrix(m))
}

/// Average class-specific accuracy, in percent.
pub fn acsa(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let r = cm.recalls()?;
    Ok(100.0 * r.iter().sum::<f64>() / r.len() as f64)
}

/// Geometric mean of per-class recalls, in percent. Exactly 0 when any class
/// has zero recall.
pub fn gmean(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let r = cm.recalls()?;
    Ok(gmean_of(&r))
}

fn gmean_of(recalls: &[f64]) -> f64 {
    if recalls.contains(&0.0) {
        return 0.0;
    }
    // log-space so many small recalls do not underflow
    let mean_log = recalls.iter().map(|x| x.ln()).sum::<f64>() / recalls.len() as f64;
    100.0 * mean_log.exp()
}

/// Rounds to two decimals, the precision scores are reported at.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Evaluation of one classifier snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acsa: f64,
    pub gm: f64,
    pub recalls: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub epoch: Option<usize>,
}

impl EvalReport {
    pub fn new(truth: &[usize], pred: &[usize], n_classes: usize, epoch: Option<usize>) -> Result<Self, MetricError> {
        let cm = confusion(truth, pred, n_classes)?;
        Self::from_confusion(cm, epoch)
    }

    pub fn from_confusion(confusion: ConfusionMatrix, epoch: Option<usize>) -> Result<Self, MetricError> {
        let recalls = confusion.recalls()?;
        let acsa = 100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64;
        let gm = gmean_of(&recalls);
        Ok(Self {
            acsa,
            gm,
            recalls,
            confusion,
            epoch,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm_from_recalls(hits: &[(u64, u64)]) -> ConfusionMatrix {
        // (correct, total) per class; misses go to the next class
        let c = hits.len();
        let mut m = vec![vec![0; c]; c];
        for (k, &(ok, n)) in hits.iter().enumerate() {
            m[k][k] = ok;
            m[k][(k + 1) % c] += n - ok;
        }
        ConfusionMatrix(m)
    }

    #[test]
    fn perfect_predictions_give_a_diagonal_matrix() {
        let y = [0, 1, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        assert_eq!(cm.rows(), &[vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn constant_predictor_fills_one_column() {
        let cm = confusion(&[0, 1, 1, 2], &[0, 0, 0, 0], 3).unwrap();
        for r in cm.rows() {
            assert!(r[1..].iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn hand_tallied_confusion() {
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 1, 0, 2];
        let cm = confusion(&truth, &pred, 3).unwrap();
        assert_eq!(cm.rows(), &[vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn out_of_range_label() {
        assert!(matches!(
            confusion(&[0, 3], &[0, 0], 3),
            Err(MetricError::LabelOutOfRange { label: 3, .. })
        ));
    }

    #[test]
    fn majority_predictor_scores_fifty() {
        let cm = confusion(&[0, 0, 0, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(acsa(&cm).unwrap(), 50.0);
        assert_eq!(gmean(&cm).unwrap(), 0.0);
    }

    #[test]
    fn perfect_recalls_score_hundred() {
        let cm = cm_from_recalls(&[(4, 4), (7, 7)]);
        assert_eq!(acsa(&cm).unwrap(), 100.0);
        assert!((gmean(&cm).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn three_class_acsa_is_the_mean_recall() {
        let cm = cm_from_recalls(&[(8, 10), (6, 10), (4, 10)]);
        assert!((acsa(&cm).unwrap() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn gmean_of_point_nine_and_point_four_is_sixty() {
        let cm = cm_from_recalls(&[(9, 10), (4, 10)]);
        assert!((gmean(&cm).unwrap() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_row_is_an_error() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![0, 0]]);
        assert_eq!(acsa(&cm), Err(MetricError::EmptyClass(1)));
    }

    #[test]
    fn report_serializes_with_stable_keys() {
        let r = EvalReport::new(&[0, 1], &[0, 0], 2, Some(4)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["acsa", "gm", "recalls", "confusion", "epoch"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
