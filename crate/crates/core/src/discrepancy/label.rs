//! Label-discrepancy terms that correct unlabeled discrepancies toward labeled ones.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::algorithms::{weighted_erm, ErmOptions};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::LossKind;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum H0Mode {
    Delta,
    Eta,
}

fn check_dims(data_p: &LabeledDataset, data_q: &LabeledDataset, h0: &LinearHypothesis) -> Result<()> {
    if data_p.dim() != data_q.dim() || h0.dim() != data_p.dim() {
        return Err(Error::Dimension(format!(
            "P has {} features, Q has {}, h0 has {}",
            data_p.dim(),
            data_q.dim(),
            h0.dim()
        )));
    }
    Ok(())
}

// E_D̂[x (y − h₀(x))]
fn residual_moment(data: &LabeledDataset, h0: &LinearHypothesis) -> DVector<f64> {
    if data.is_empty() {
        return DVector::zeros(data.dim());
    }
    let r = data.labels() - h0.predict_all(data.features());
    data.features().tr_mul(&r) / data.len() as f64
}

fn mean_abs_residual(data: &LabeledDataset, h0: &LinearHypothesis) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let r = data.labels() - h0.predict_all(data.features());
    r.abs().sum() / data.len() as f64
}

/// δ = sup_{‖w‖≤Λ} |E_P̂[h(x)(y − h₀(x))] − E_Q̂[h(x)(y − h₀(x))]| = Λ‖v_P − v_Q‖.
pub fn delta_label_discrepancy(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    h0: &LinearHypothesis,
    radius: f64,
) -> Result<f64> {
    check_dims(data_p, data_q, h0)?;
    Ok(radius * (residual_moment(data_p, h0) - residual_moment(data_q, h0)).norm())
}

/// η = E_P̂|y − h₀(x)| + E_Q̂|y − h₀(x)|.
pub fn eta_label_discrepancy(data_p: &LabeledDataset, data_q: &LabeledDataset, h0: &LinearHypothesis) -> Result<f64> {
    check_dims(data_p, data_q, h0)?;
    Ok(mean_abs_residual(data_p, h0) + mean_abs_residual(data_q, h0))
}

/// The candidate minimizing δ or η; ties go to the smaller ‖w‖, then the earlier candidate.
pub fn select_h0(
    candidates: &[LinearHypothesis],
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    mode: H0Mode,
    radius: f64,
) -> Result<LinearHypothesis> {
    let mut best: Option<(f64, f64, &LinearHypothesis)> = None;
    for h in candidates {
        let score = match mode {
            H0Mode::Delta => delta_label_discrepancy(data_p, data_q, h, radius)?,
            H0Mode::Eta => eta_label_discrepancy(data_p, data_q, h)?,
        };
        let norm = h.norm_sq();
        let better = match best {
            None => true,
            Some((s, n, _)) => score < s || (score == s && norm < n),
        };
        if better {
            best = Some((score, norm, h));
        }
    }
    best.map(|(_, _, h)| h.clone())
        .ok_or_else(|| Error::EmptyData("no h0 candidates".into()))
}

/// The zero hypothesis plus squared-loss fits on `data_p` at several ridge levels.
pub fn default_h0_candidates(data_p: &LabeledDataset, space: &HypothesisSpace) -> Result<Vec<LinearHypothesis>> {
    let mut out = vec![LinearHypothesis::zero(data_p.dim(), space.radius)];
    if data_p.is_empty() {
        return Ok(out);
    }
    let q = WeightVector::uniform(data_p.len());
    let sq = HypothesisSpace::new(LossKind::Squared, space.radius)?;
    for ridge in [1e-3, 1e-2, 1e-1, 1.0] {
        out.push(weighted_erm(data_p, q.values(), &sq, ridge, &ErmOptions::default())?);
    }
    Ok(out)
}
