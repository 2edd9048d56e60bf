//! Learning algorithms: weighted ERM, SBEST/BEST, BEST-DA and the baselines.

mod alpha;
mod baseline;
mod bestda;
mod dm;
mod erm;
mod fit;
mod sbest;

pub use alpha::{alpha_reweighting_train, alpha_weights, alpha_weights_for};
pub use baseline::{baseline_train, Baseline};
pub use bestda::{bestda_am, bestda_objective, bestda_objective_terms, BestDaHyperparams, BestDaTerms};
pub use dm::{dm_baseline, dm_second_stage, dm_weights, DmFit, DmParams};
pub use erm::{weighted_erm, weighted_erm_from, ErmOptions};
pub use fit::{FitResult, FitWeights};
pub use sbest::{sbest_am, sbest_dc, sbest_init, sbest_objective, source_charges, SbestDc, SbestHyperparams, SbestInit, Variant};
