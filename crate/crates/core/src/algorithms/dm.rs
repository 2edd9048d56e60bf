//! Two-stage discrepancy minimization: source weights first, then weighted ERM.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::erm::{weighted_erm, ErmOptions};
use crate::dataset::LabeledDataset;
use crate::discrepancy::unlabeled_discrepancy;
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::LossKind;
use crate::optim::{project_simplex, projected_gradient_descent, PgdOptions};
use crate::weights::{Constraint, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmParams {
    pub ridge: f64,
    pub step: PgdOptions,
    #[serde(default)]
    pub erm: ErmOptions,
}

impl Default for DmParams {
    fn default() -> Self {
        Self {
            ridge: 1e-3,
            step: PgdOptions {
                step: 1e-2,
                ..Default::default()
            },
            erm: ErmOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DmFit {
    pub hypothesis: LinearHypothesis,
    /// Stage-one weights over the source rows.
    pub q: WeightVector,
    /// Stage-one discrepancy trace.
    pub trace: Vec<f64>,
}

/// Stage one: q* = argmin over the simplex of 𝑑𝑖𝑠̄(uniform on S′, q).
pub fn dm_weights(source: &LabeledDataset, target: &LabeledDataset, radius: f64, step: &PgdOptions) -> Result<(WeightVector, Vec<f64>)> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyData("DM needs source and target rows".into()));
    }
    let qt = DVector::from_element(target.len(), 1.0 / target.len() as f64);
    let q0 = DVector::from_element(source.len(), 1.0 / source.len() as f64);
    let out = projected_gradient_descent(
        |q| {
            let u = unlabeled_discrepancy(&qt, target.features(), q, source.features(), radius, LossKind::Squared)?;
            Ok((u.value, u.grad_source))
        },
        project_simplex,
        q0,
        step,
    )?;
    Ok((WeightVector::from_projected(out.x, Constraint::Simplex), out.trace))
}

/// Stage two on given weights. The target sample enters only through q.
pub fn dm_second_stage(
    source: &LabeledDataset,
    q: &WeightVector,
    space: &HypothesisSpace,
    params: &DmParams,
) -> Result<LinearHypothesis> {
    weighted_erm(source, q.values(), space, params.ridge, &params.erm)
}

pub fn dm_baseline(
    source: &LabeledDataset,
    target: &LabeledDataset,
    space: &HypothesisSpace,
    params: &DmParams,
) -> Result<DmFit> {
    if space.loss != LossKind::Squared {
        return Err(Error::UnsupportedLoss(format!("DM needs the squared loss, not {}", space.loss.name())));
    }
    let (q, trace) = dm_weights(source, target, space.radius, &params.step)?;
    let hypothesis = dm_second_stage(source, &q, space, params)?;
    Ok(DmFit { hypothesis, q, trace })
}
