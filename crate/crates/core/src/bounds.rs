//! Itemized evaluation of the generalization bounds for reweighted samples.
//!
//! Every evaluator returns a [`BoundReport`] whose `total` is the plain sum of
//! its terms. Suprema over the hypothesis set are estimated by projected
//! gradient ascent, so terms built from them are estimates, not certificates.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Domain, LabeledDataset};
use crate::discrepancy::{
    delta_label_discrepancy, eta_label_discrepancy, local_unlabeled_discrepancy, maximize_over_ball, AscentOptions,
    SignedLoss,
};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::per_example_losses;
use crate::rng;
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RademacherOptions {
    pub samples: usize,
    /// Random restarts of each inner supremum.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for RademacherOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            restarts: 8,
            seed: 0,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo estimate of E_σ sup_h Σ σᵢ qᵢ ℓ(h(xᵢ), yᵢ).
///
/// Draw k takes its signs from stream k of `opts.seed`, so two calls with the
/// same options share their sign vectors.
pub fn rademacher_estimate(
    data: &LabeledDataset,
    q: &DVector<f64>,
    space: &HypothesisSpace,
    opts: &RademacherOptions,
) -> Result<RademacherEstimate> {
    if opts.samples == 0 {
        return Err(Error::InvalidParameter("at least one sign sample is required".into()));
    }
    if q.len() != data.len() {
        return Err(Error::Dimension(format!("q has length {}, data has {} rows", q.len(), data.len())));
    }
    space.validate()?;
    space.loss.check_labels(data)?;
    let (center, radius) = space.search_ball(data.dim());
    let values: Vec<Result<f64>> = (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(opts.seed, k as u64);
            let c = DVector::from_iterator(
                q.len(),
                q.iter().map(|&qi| if rand::Rng::random::<bool>(&mut r) { qi } else { -qi }),
            );
            let ascent = AscentOptions {
                restarts: opts.restarts,
                seed: rng::child_seed(&mut r),
                max_iters: opts.max_iters,
                tol: 1e-10,
            };
            let obj = SignedLoss::new(data.features(), data.labels(), &c, space.loss)?;
            Ok(maximize_over_ball(&obj, &center, radius, &ascent)?.value)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        mean,
        std_error,
        samples: values.len(),
    })
}

/// ‖q‖_∞ (m + n) times the complexity under uniform weights: an upper bound
/// on the q-weighted complexity that needs no sampling for each q.
pub fn rademacher_from_uniform(q: &DVector<f64>, uniform_estimate: f64) -> f64 {
    let linf = q.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    linf * q.len() as f64 * uniform_estimate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Theorem1,
    Theorem3,
    Corollary4,
    Theorem5Da,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundTerms {
    pub weighted_loss: f64,
    pub discrepancy_term: f64,
    pub index_discrepancy: f64,
    pub rademacher: f64,
    pub l1_deviation: f64,
    /// Present only when ‖q − p⁰‖₁ < 1.
    pub loglog_term: Option<f64>,
    pub confidence_term: f64,
    pub total: f64,
}

impl BoundTerms {
    pub fn sum_of_parts(&self) -> f64 {
        self.weighted_loss
            + self.discrepancy_term
            + self.index_discrepancy
            + self.rademacher
            + self.l1_deviation
            + self.loglog_term.unwrap_or(0.0)
            + self.confidence_term
    }

    fn finish(mut self) -> Self {
        self.total = self.sum_of_parts();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub delta: f64,
    pub q_l1: f64,
    pub q_l2: f64,
    pub q_linf: f64,
    pub q_bar: f64,
    #[serde(default)]
    pub q_minus_p0_l1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub terms: BoundTerms,
    pub inputs: BoundInputs,
    /// Terms computed from upper-bounding surrogates instead of the quantity itself.
    pub surrogate_terms: Vec<String>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "kind",
        "weighted_loss",
        "discrepancy_term",
        "index_discrepancy",
        "rademacher",
        "l1_deviation",
        "loglog_term",
        "confidence_term",
        "total",
        "delta",
        "q_l1",
        "q_l2",
        "q_linf",
        "q_bar",
        "q_minus_p0_l1",
    ];

    /// One flat row matching [`Self::CSV_HEADER`]; absent values are empty.
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let t = &self.terms;
        let i = &self.inputs;
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        vec![
            kind,
            t.weighted_loss.to_string(),
            t.discrepancy_term.to_string(),
            t.index_discrepancy.to_string(),
            t.rademacher.to_string(),
            t.l1_deviation.to_string(),
            opt(t.loglog_term),
            t.confidence_term.to_string(),
            t.total.to_string(),
            i.delta.to_string(),
            i.q_l1.to_string(),
            i.q_l2.to_string(),
            i.q_linf.to_string(),
            i.q_bar.to_string(),
            opt(i.q_minus_p0_l1),
        ]
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("confidence parameter δ must lie in (0, 1), got {delta}")))
    }
}

fn check_weights(q: &WeightVector, data: &LabeledDataset) -> Result<()> {
    if q.len() != data.len() {
        return Err(Error::Dimension(format!("q has length {}, data has {} rows", q.len(), data.len())));
    }
    Ok(())
}

fn inputs(q: &WeightVector, data: &LabeledDataset, delta: f64) -> BoundInputs {
    BoundInputs {
        delta,
        q_l1: q.l1(),
        q_l2: q.l2(),
        q_linf: q.linf(),
        q_bar: q.mass_on(data.domains(), Domain::Source),
        q_minus_p0_l1: None,
    }
}

fn weighted_loss(h: &LinearHypothesis, data: &LabeledDataset, q: &DVector<f64>, space: &HypothesisSpace) -> Result<f64> {
    let l = per_example_losses(h, data, space.loss)?;
    Ok(q.iter().zip(&l).map(|(a, b)| a * b).sum())
}

fn clamp(name: &str, value: f64, warnings: &mut Vec<String>) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("{name} = {value}")));
    }
    if value < 0.0 {
        warnings.push(format!("{name} estimate {value} is negative and was clamped to 0"));
        Ok(0.0)
    } else {
        Ok(value)
    }
}

fn degenerate(q_l1: f64, warnings: &mut Vec<String>) {
    if q_l1 == 0.0 {
        warnings.push("all weights are zero: the bound is degenerate".into());
    }
}

// Mixed-measure discrepancy q̄·d̂, plus |1 − ‖q‖₁| when q is not a distribution.
fn mixed_discrepancy(q_bar: f64, q_l1: f64, d_hat: f64, surrogates: &mut Vec<String>) -> f64 {
    let gap = (1.0 - q_l1).abs();
    if gap <= 1e-12 {
        q_bar * d_hat
    } else {
        surrogates.push("discrepancy_term".into());
        q_bar * d_hat + gap
    }
}

/// Bound for one fixed q: Σqℓ + dis + 2𝔑_q + ‖q‖₂√(log(1/δ)/2).
///
/// `data` is the sample S followed by S′ with domain tags, and `rademacher`
/// is the value of 𝔑_q. The mixed-measure discrepancy is q̄·d̂ when ‖q‖₁ = 1
/// and is upper-bounded by q̄·d̂ + |1 − ‖q‖₁| otherwise.
pub fn bound_theorem1(
    h: &LinearHypothesis,
    q: &WeightVector,
    data: &LabeledDataset,
    space: &HypothesisSpace,
    d_hat: f64,
    delta: f64,
    rademacher: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    check_weights(q, data)?;
    let inputs = inputs(q, data, delta);
    let mut warnings = Vec::new();
    let mut surrogates = Vec::new();
    degenerate(inputs.q_l1, &mut warnings);
    let d_hat = clamp("discrepancy", d_hat, &mut warnings)?;
    let rademacher = clamp("rademacher", rademacher, &mut warnings)?;
    let terms = BoundTerms {
        weighted_loss: weighted_loss(h, data, q.values(), space)?,
        discrepancy_term: mixed_discrepancy(inputs.q_bar, inputs.q_l1, d_hat, &mut surrogates),
        rademacher: 2.0 * rademacher,
        confidence_term: inputs.q_l2 * ((1.0 / delta).ln() / 2.0).sqrt(),
        ..Default::default()
    }
    .finish();
    Ok(BoundReport {
        kind: BoundKind::Theorem1,
        terms,
        inputs,
        surrogate_terms: surrogates,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn uniform_bound(
    kind: BoundKind,
    h: &LinearHypothesis,
    q: &WeightVector,
    p0: &WeightVector,
    data: &LabeledDataset,
    space: &HypothesisSpace,
    d_hat: f64,
    delta: f64,
    rademacher: f64,
    index_discrepancy: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    check_weights(q, data)?;
    check_weights(p0, data)?;
    let t = q.l1_distance(p0);
    if !(t < 1.0) {
        return Err(Error::OutOfDomain(format!(
            "‖q − p⁰‖₁ = {t} must be below 1 for the log-log term to be defined"
        )));
    }
    let mut inputs = inputs(q, data, delta);
    inputs.q_minus_p0_l1 = Some(t);
    let mut warnings = Vec::new();
    let mut surrogates = Vec::new();
    degenerate(inputs.q_l1, &mut warnings);
    let d_hat = clamp("discrepancy", d_hat, &mut warnings)?;
    let rademacher = clamp("rademacher", rademacher, &mut warnings)?;
    let index_discrepancy = clamp("index discrepancy", index_discrepancy, &mut warnings)?;
    let (discrepancy_term, l1_coef) = match kind {
        BoundKind::Theorem3 => (mixed_discrepancy(inputs.q_bar, inputs.q_l1, d_hat, &mut surrogates), 5.0),
        _ => (inputs.q_bar * d_hat, 6.0),
    };
    let lead = inputs.q_l2 + 2.0 * t;
    let terms = BoundTerms {
        weighted_loss: weighted_loss(h, data, q.values(), space)?,
        discrepancy_term,
        index_discrepancy,
        rademacher: 2.0 * rademacher,
        l1_deviation: l1_coef * t,
        loglog_term: Some(lead * (2.0 / (1.0 - t)).log2().ln().max(0.0).sqrt()),
        confidence_term: lead * ((2.0 / delta).ln() / 2.0).sqrt(),
        total: 0.0,
    }
    .finish();
    Ok(BoundReport {
        kind,
        terms,
        inputs,
        surrogate_terms: surrogates,
        warnings,
    })
}

/// Bound holding uniformly over q with ‖q − p⁰‖₁ < 1, with constant 5 on ‖q − p⁰‖₁.
#[allow(clippy::too_many_arguments)]
pub fn bound_theorem3(
    h: &LinearHypothesis,
    q: &WeightVector,
    p0: &WeightVector,
    data: &LabeledDataset,
    space: &HypothesisSpace,
    d_hat: f64,
    delta: f64,
    rademacher: f64,
    index_discrepancy: f64,
) -> Result<BoundReport> {
    uniform_bound(BoundKind::Theorem3, h, q, p0, data, space, d_hat, delta, rademacher, index_discrepancy)
}

/// Simplified uniform bound: q̄ d̂ + dis(q, p⁰) + 2𝔑_q + 6‖q − p⁰‖₁ plus the
/// log-log and confidence terms.
#[allow(clippy::too_many_arguments)]
pub fn bound_corollary4(
    h: &LinearHypothesis,
    q: &WeightVector,
    p0: &WeightVector,
    data: &LabeledDataset,
    space: &HypothesisSpace,
    d_hat: f64,
    delta: f64,
    rademacher: f64,
    index_discrepancy: f64,
) -> Result<BoundReport> {
    uniform_bound(BoundKind::Corollary4, h, q, p0, data, space, d_hat, delta, rademacher, index_discrepancy)
}

/// Unlabeled stand-ins for the labeled discrepancies of the adaptation bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DaSurrogates {
    /// 𝑑𝑖𝑠̄(q′, p): weighted unlabeled discrepancy between target and source weights.
    pub weighted_unlabeled: Option<f64>,
    /// Label correction added to `weighted_unlabeled`.
    #[serde(default)]
    pub weighted_correction: f64,
    /// 𝑑̄: unlabeled discrepancy between the source and target samples.
    pub unlabeled: Option<f64>,
    /// Label correction added to `unlabeled`, e.g. 2δ or μη.
    #[serde(default)]
    pub correction: f64,
}

/// Adaptation bound with weights q on S, q′ on S′ and p on S; only source labels are read.
///
/// dis(q′, p) is replaced by 𝑑𝑖𝑠̄(q′, p) + correction, and the mixed-measure
/// term by ‖q‖₁(𝑑̄ + correction) + |1 − ‖q′‖₁ − ‖q‖₁|.
#[allow(clippy::too_many_arguments)]
pub fn bound_theorem5_da(
    h: &LinearHypothesis,
    q: &DVector<f64>,
    p: &DVector<f64>,
    q_prime: &DVector<f64>,
    source: &LabeledDataset,
    space: &HypothesisSpace,
    surrogates: &DaSurrogates,
    delta: f64,
    rademacher: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if q.len() != source.len() || p.len() != source.len() {
        return Err(Error::Dimension(format!(
            "q and p have lengths {} and {}, source has {} rows",
            q.len(),
            p.len(),
            source.len()
        )));
    }
    let missing = |name: &str| Error::InvalidParameter(format!("surrogate `{name}` is required"));
    let weighted = surrogates.weighted_unlabeled.ok_or_else(|| missing("weighted_unlabeled"))?;
    let unlabeled = surrogates.unlabeled.ok_or_else(|| missing("unlabeled"))?;
    let mut warnings = Vec::new();
    let weighted = clamp("weighted unlabeled discrepancy", weighted, &mut warnings)?;
    let unlabeled = clamp("unlabeled discrepancy", unlabeled, &mut warnings)?;
    let weighted_correction = clamp("weighted correction", surrogates.weighted_correction, &mut warnings)?;
    let correction = clamp("correction", surrogates.correction, &mut warnings)?;
    let rademacher = clamp("rademacher", rademacher, &mut warnings)?;

    let q_l1 = q.abs().sum();
    let qp_l1 = q_prime.abs().sum();
    let all = q.iter().chain(q_prime.iter());
    let linf = all.clone().fold(0.0_f64, |a, x| a.max(x.abs()));
    let l2_sq = q.norm_squared() + q_prime.norm_squared();
    degenerate(q_l1 + qp_l1 + p.abs().sum(), &mut warnings);

    let qp = q + p;
    let terms = BoundTerms {
        weighted_loss: weighted_loss(h, source, &qp, space)?,
        discrepancy_term: q_l1 * (unlabeled + correction) + (1.0 - qp_l1 - q_l1).abs(),
        index_discrepancy: weighted + weighted_correction,
        rademacher: 2.0 * rademacher,
        confidence_term: (l2_sq * (1.0 / delta).ln() / 2.0).sqrt(),
        ..Default::default()
    }
    .finish();
    Ok(BoundReport {
        kind: BoundKind::Theorem5Da,
        terms,
        inputs: BoundInputs {
            delta,
            q_l1: q_l1 + qp_l1,
            q_l2: l2_sq.sqrt(),
            q_linf: linf,
            q_bar: q_l1,
            q_minus_p0_l1: None,
        },
        surrogate_terms: vec!["discrepancy_term".into(), "index_discrepancy".into()],
        warnings,
    })
}

/// Correction used to turn an unlabeled discrepancy into a labeled one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelCorrection {
    /// 2δ, for the squared loss.
    Delta,
    /// μη, for a μ-Lipschitz loss.
    Eta { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledUpperBound {
    pub local_unlabeled: f64,
    pub correction: f64,
    /// |E_P̂[y² − h₀(x)²] − E_Q̂[y² − h₀(x)²]|, present for the squared loss.
    pub label_offset: Option<f64>,
    /// local_unlabeled + correction.
    pub stated: f64,
    /// stated + label_offset; the version that holds for every sample.
    pub total: f64,
}

/// Upper bound on the labeled discrepancy dis(P̂, Q̂) from the local unlabeled
/// discrepancy around h₀ and a label correction.
///
/// For the squared loss, (h − y)² − (h − h₀)² = y² − h₀² − 2h(y − h₀), so the
/// gap between labeled and local unlabeled losses also carries the
/// h-independent offset E[y² − h₀²]. The sum without it is `stated`; `total`
/// adds it back.
pub fn labeled_discrepancy_upper_bound(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    h0: &LinearHypothesis,
    space: &HypothesisSpace,
    correction: LabelCorrection,
    opts: &AscentOptions,
) -> Result<LabeledUpperBound> {
    let a = local_unlabeled_discrepancy(data_p, data_q, h0, space, opts)?.value;
    let b = local_unlabeled_discrepancy(data_q, data_p, h0, space, opts)?.value;
    let local_unlabeled = a.max(b);
    let corr = match correction {
        LabelCorrection::Delta => 2.0 * delta_label_discrepancy(data_p, data_q, h0, space.radius)?,
        LabelCorrection::Eta { mu } => {
            if !(mu >= 0.0) {
                return Err(Error::InvalidParameter(format!("Lipschitz constant must be non-negative, got {mu}")));
            }
            mu * eta_label_discrepancy(data_p, data_q, h0)?
        }
    };
    let label_offset = match (correction, space.loss) {
        (LabelCorrection::Delta, crate::loss::LossKind::Squared) => {
            let offset = |d: &LabeledDataset| {
                let f = h0.predict_all(d.features());
                d.labels().iter().zip(f.iter()).map(|(y, f)| y * y - f * f).sum::<f64>() / d.len() as f64
            };
            Some((offset(data_p) - offset(data_q)).abs())
        }
        _ => None,
    };
    let stated = local_unlabeled + corr;
    Ok(LabeledUpperBound {
        local_unlabeled,
        correction: corr,
        label_offset,
        stated,
        total: stated + label_offset.unwrap_or(0.0),
    })
}
