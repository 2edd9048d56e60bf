//! Evaluation metrics on held-out data.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hypothesis::LinearHypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of rows with sign(h(x)) = y. A zero prediction counts as +1.
    pub accuracy: f64,
    pub mse: f64,
}

impl Metrics {
    /// The metric that drives model selection, oriented so larger is better.
    pub fn score(&self, task: Task) -> f64 {
        match task {
            Task::Classification => self.accuracy,
            Task::Regression => -self.mse,
        }
    }

    pub fn headline(&self, task: Task) -> f64 {
        match task {
            Task::Classification => self.accuracy,
            Task::Regression => self.mse,
        }
    }
}

pub fn evaluate_metrics(h: &LinearHypothesis, data: &LabeledDataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
    }
    if h.dim() != data.dim() {
        return Err(Error::Dimension(format!(
            "hypothesis has {} weights, data has {} features",
            h.dim(),
            data.dim()
        )));
    }
    let preds = h.predict_all(data.features());
    let n = data.len() as f64;
    let mut correct = 0usize;
    let mut sse = 0.0;
    for (&p, &y) in preds.iter().zip(data.labels().iter()) {
        let sign = if p >= 0.0 { 1.0 } else { -1.0 };
        if sign == y {
            correct += 1;
        }
        sse += (p - y) * (p - y);
    }
    Ok(Metrics {
        accuracy: correct as f64 / n,
        mse: sse / n,
    })
}
