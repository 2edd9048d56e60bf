//! Pointwise losses and the weighted empirical loss.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hypothesis::LinearHypothesis;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
}

impl LossKind {
    /// Loss of `prediction` against `label`, checking the label domain.
    pub fn value(self, prediction: f64, label: f64) -> Result<f64> {
        if let LossKind::Logistic = self {
            check_binary(label)?;
        }
        Ok(self.eval(prediction, label))
    }

    /// Unchecked loss value. Logistic labels are assumed to be ±1.
    #[inline]
    pub fn eval(self, prediction: f64, label: f64) -> f64 {
        match self {
            LossKind::Squared => {
                let r = prediction - label;
                r * r
            }
            LossKind::Logistic => softplus(-label * prediction),
        }
    }

    /// Derivative of the loss with respect to the prediction.
    #[inline]
    pub fn derivative(self, prediction: f64, label: f64) -> f64 {
        match self {
            LossKind::Squared => 2.0 * (prediction - label),
            LossKind::Logistic => -label * sigmoid(-label * prediction),
        }
    }

    /// Value and derivative in one pass.
    #[inline]
    pub fn eval_with_derivative(self, prediction: f64, label: f64) -> (f64, f64) {
        (self.eval(prediction, label), self.derivative(prediction, label))
    }

    /// Checks every label of `data` is admissible for this loss.
    pub fn check_labels(self, data: &LabeledDataset) -> Result<()> {
        if let LossKind::Logistic = self {
            for &y in data.labels().iter() {
                check_binary(y)?;
            }
        }
        Ok(())
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::InvalidParameter(format!("unknown loss '{other}'"))),
        }
    }
}

fn check_binary(label: f64) -> Result<()> {
    if label == 1.0 || label == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLabel { label })
    }
}

/// ln(1 + e^z) without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-example losses of `h` on `data`.
pub fn per_example_losses(h: &LinearHypothesis, data: &LabeledDataset, loss: LossKind) -> Result<Vec<f64>> {
    if h.dim() != data.dim() {
        return Err(Error::Dimension(format!(
            "hypothesis has {} weights, data has {} features",
            h.dim(),
            data.dim()
        )));
    }
    loss.check_labels(data)?;
    let preds = h.predict_all(data.features());
    Ok(preds
        .iter()
        .zip(data.labels().iter())
        .map(|(&p, &y)| loss.eval(p, y))
        .collect())
}

/// Σᵢ qᵢ ℓ(h(xᵢ), yᵢ).
pub fn weighted_empirical_loss(
    h: &LinearHypothesis,
    data: &LabeledDataset,
    q: &WeightVector,
    loss: LossKind,
) -> Result<f64> {
    if q.len() != data.len() {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, data has {} rows",
            q.len(),
            data.len()
        )));
    }
    let losses = per_example_losses(h, data, loss)?;
    Ok(losses.iter().zip(q.values().iter()).map(|(l, w)| l * w).sum())
}
