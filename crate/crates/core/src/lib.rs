//! Adversarial oversampling for imbalanced tabular classification.

// `!(x >= 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod data;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod resamplers;
