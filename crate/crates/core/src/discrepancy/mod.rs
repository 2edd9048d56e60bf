//! Discrepancy quantities between samples and between weightings of one sample.

mod ascent;
mod label;
mod unlabeled;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::weights::WeightVector;

pub use ascent::{maximize_over_ball, AscentOptions, AscentResult, SignedLoss};
pub use label::{default_h0_candidates, delta_label_discrepancy, eta_label_discrepancy, select_h0, H0Mode};
pub use unlabeled::{
    build_m, empirical_unlabeled_discrepancy, empirical_unlabeled_raw, signed_softmax, signed_softmax_nonneg,
    signed_unlabeled_discrepancy, softmax_mu_for, softmax_unlabeled_discrepancy, unlabeled_discrepancy,
    weighted_scatter, SignedUnlabeled, SoftmaxDiscrepancy, UnlabeledDiscrepancy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GridRestart,
    Eigen,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Gradient norm of the inner objective at the maximizer.
    #[serde(default)]
    pub gradient_norm: Option<f64>,
    /// Value before any clamp at zero.
    #[serde(default)]
    pub unclamped_value: Option<f64>,
    /// Set when `value` is a lower bound on the supremum rather than its exact value.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEstimate {
    pub value: f64,
    pub method: Method,
    pub maximizer_w: Vec<f64>,
    /// Starting points tried by the ascent.
    pub restarts: usize,
    pub diagnostics: Diagnostics,
}

impl DiscrepancyEstimate {
    fn from_ascent(r: AscentResult) -> Self {
        Self {
            value: r.value,
            method: Method::GridRestart,
            maximizer_w: r.w.iter().copied().collect(),
            restarts: r.starts,
            diagnostics: Diagnostics {
                gradient_norm: Some(r.gradient_norm),
                unclamped_value: None,
                lower_bound: true,
            },
        }
    }

    pub fn maximizer(&self, norm_bound: f64) -> LinearHypothesis {
        LinearHypothesis::clipped(DVector::from_column_slice(&self.maximizer_w), norm_bound)
    }
}

fn ensure_nonempty(data: &LabeledDataset, what: &str) -> Result<()> {
    if data.is_empty() {
        Err(Error::EmptyData(format!("{what} sample is empty")))
    } else {
        Ok(())
    }
}

/// Coefficients 1/n on P rows and −1/m on Q rows, with features and targets stacked.
fn contrast(data_p: &LabeledDataset, data_q: &LabeledDataset) -> Result<(LabeledDataset, DVector<f64>)> {
    ensure_nonempty(data_p, "P")?;
    ensure_nonempty(data_q, "Q")?;
    let stacked = data_p.concat(data_q)?;
    let (n, m) = (data_p.len(), data_q.len());
    let c = DVector::from_iterator(
        n + m,
        (0..n + m).map(|i| if i < n { 1.0 / n as f64 } else { -1.0 / m as f64 }),
    );
    Ok((stacked, c))
}

/// One-sided labeled discrepancy sup_h [L(P̂, h) − L(Q̂, h)] by projected gradient ascent.
pub fn estimate_labeled_discrepancy(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    space: &HypothesisSpace,
    opts: &AscentOptions,
) -> Result<DiscrepancyEstimate> {
    space.validate()?;
    let (stacked, c) = contrast(data_p, data_q)?;
    space.loss.check_labels(&stacked)?;
    let obj = SignedLoss::new(stacked.features(), stacked.labels(), &c, space.loss)?;
    let (center, radius) = space.search_ball(stacked.dim());
    check_center(&center, stacked.dim())?;
    Ok(DiscrepancyEstimate::from_ascent(maximize_over_ball(&obj, &center, radius, opts)?))
}

/// max of both one-sided discrepancies.
pub fn estimate_abs_labeled_discrepancy(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    space: &HypothesisSpace,
    opts: &AscentOptions,
) -> Result<DiscrepancyEstimate> {
    let a = estimate_labeled_discrepancy(data_p, data_q, space, opts)?;
    let b = estimate_labeled_discrepancy(data_q, data_p, space, opts)?;
    Ok(if b.value > a.value { b } else { a })
}

/// dis(q, p⁰) = sup_h Σ (qᵢ − p⁰ᵢ) ℓ(h(xᵢ), yᵢ).
pub fn index_weight_discrepancy(
    q: &WeightVector,
    p0: &WeightVector,
    data: &LabeledDataset,
    space: &HypothesisSpace,
    opts: &AscentOptions,
) -> Result<DiscrepancyEstimate> {
    if q.len() != data.len() || p0.len() != data.len() {
        return Err(Error::Dimension(format!(
            "weights of length {} and {} for {} rows",
            q.len(),
            p0.len(),
            data.len()
        )));
    }
    space.validate()?;
    space.loss.check_labels(data)?;
    let c = q.values() - p0.values();
    let obj = SignedLoss::new(data.features(), data.labels(), &c, space.loss)?;
    let (center, radius) = space.search_ball(data.dim());
    check_center(&center, data.dim())?;
    Ok(DiscrepancyEstimate::from_ascent(maximize_over_ball(&obj, &center, radius, opts)?))
}

/// sup_h [E_P̂ ℓ(h(x), h₀(x)) − E_Q̂ ℓ(h(x), h₀(x))], the unlabeled discrepancy with the
/// second hypothesis frozen at h₀. Labels are ignored.
pub fn local_unlabeled_discrepancy(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    h0: &LinearHypothesis,
    space: &HypothesisSpace,
    opts: &AscentOptions,
) -> Result<DiscrepancyEstimate> {
    space.validate()?;
    let (stacked, c) = contrast(data_p, data_q)?;
    if h0.dim() != stacked.dim() {
        return Err(Error::Dimension(format!(
            "h0 has {} weights, data has {} features",
            h0.dim(),
            stacked.dim()
        )));
    }
    let targets = h0.predict_all(stacked.features());
    let obj = SignedLoss::new(stacked.features(), &targets, &c, space.loss)?;
    let (center, radius) = space.search_ball(stacked.dim());
    check_center(&center, stacked.dim())?;
    Ok(DiscrepancyEstimate::from_ascent(maximize_over_ball(&obj, &center, radius, opts)?))
}

fn check_center(center: &DVector<f64>, d: usize) -> Result<()> {
    if center.len() != d {
        return Err(Error::Dimension(format!("local ball center has {} weights, data has {d} features", center.len())));
    }
    Ok(())
}

/// Eigenvalue estimate of the empirical unlabeled discrepancy, as a report.
pub fn empirical_unlabeled_estimate(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    radius: f64,
) -> Result<DiscrepancyEstimate> {
    let raw = empirical_unlabeled_raw(data_p, data_q, radius)?;
    Ok(DiscrepancyEstimate {
        value: raw.value,
        method: Method::Eigen,
        maximizer_w: Vec::new(),
        restarts: 0,
        diagnostics: Diagnostics {
            gradient_norm: None,
            unclamped_value: Some(4.0 * radius * radius * raw.lambda_max),
            lower_bound: false,
        },
    })
}
