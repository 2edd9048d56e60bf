//! Uniform-weight baselines.

use serde::{Deserialize, Serialize};

use super::erm::{weighted_erm, ErmOptions};
use crate::dataset::{Domain, LabeledDataset};
use crate::error::Result;
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    TargetOnly,
    SourceOnly,
    PooledUniform,
}

impl Baseline {
    pub fn weights(self, data: &LabeledDataset) -> Result<WeightVector> {
        match self {
            Baseline::TargetOnly => WeightVector::uniform_on(data.domains(), Domain::Target),
            Baseline::SourceOnly => WeightVector::uniform_on(data.domains(), Domain::Source),
            Baseline::PooledUniform => {
                if data.is_empty() {
                    return Err(crate::Error::EmptyData("no rows to pool".into()));
                }
                Ok(WeightVector::uniform(data.len()))
            }
        }
    }
}

pub fn baseline_train(
    data: &LabeledDataset,
    which: Baseline,
    space: &HypothesisSpace,
    ridge: f64,
    erm: &ErmOptions,
) -> Result<(LinearHypothesis, WeightVector)> {
    let q = which.weights(data)?;
    let h = weighted_erm(data, q.values(), space, ridge, erm)?;
    Ok((h, q))
}
