//! Discrepancy-based sample reweighting for best-effort adaptation and
//! domain adaptation.
//!
//! Per-example weights and a linear hypothesis are learned jointly by
//! alternating minimization or DC programming. The crate also provides
//! discrepancy estimators, generalization-bound evaluators, synthetic task
//! generators and an experiment harness.

pub mod algorithms;
pub mod bounds;
pub mod datagen;
pub mod harness;
pub mod dataset;
pub mod discrepancy;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod weights;

pub use dataset::{Domain, LabeledDataset};
pub use error::{Error, Result};
pub use hypothesis::{HypothesisSpace, LinearHypothesis, LocalBall};
pub use loss::{per_example_losses, weighted_empirical_loss, LossKind};
pub use metrics::{evaluate_metrics, Metrics, Task};
pub use weights::{Constraint, WeightVector};
