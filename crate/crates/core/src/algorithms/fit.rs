use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::LinearHypothesis;
use crate::weights::WeightVector;

/// Learned weights. `q` spans every row for best-effort fits and the source
/// rows for domain-adaptation fits, which also carry `q_prime` and `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWeights {
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_prime: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hypothesis: LinearHypothesis,
    pub q: WeightVector,
    pub q_prime: Option<DVector<f64>>,
    pub p: Option<DVector<f64>>,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct FitRecord {
    w: Vec<f64>,
    bias: f64,
    norm_bound: f64,
    weights: FitWeights,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    objective_final: Option<f64>,
}

impl FitResult {
    /// A fit with no optimization trace, for closed-form learners.
    pub fn from_hypothesis(hypothesis: LinearHypothesis, q: WeightVector) -> Self {
        Self {
            hypothesis,
            q,
            q_prime: None,
            p: None,
            trace: Vec::new(),
            converged: true,
            iterations: 0,
        }
    }

    pub fn objective_final(&self) -> Option<f64> {
        self.trace.last().copied()
    }

    pub fn weights(&self) -> FitWeights {
        FitWeights {
            q: self.q.values().iter().copied().collect(),
            q_prime: self.q_prime.as_ref().map(|v| v.iter().copied().collect()),
            p: self.p.as_ref().map(|v| v.iter().copied().collect()),
        }
    }

    /// Largest increase between consecutive trace entries (≤ 0 for a monotone trace).
    pub fn max_trace_increase(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = FitRecord {
            w: self.hypothesis.weights().iter().copied().collect(),
            bias: self.hypothesis.bias(),
            norm_bound: self.hypothesis.norm_bound(),
            weights: self.weights(),
            trace: self.trace.clone(),
            converged: self.converged,
            iterations: self.iterations,
            objective_final: self.objective_final(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: FitRecord = serde_json::from_str(s)?;
        let hypothesis = LinearHypothesis::with_bias(DVector::from_vec(rec.w), rec.bias, rec.norm_bound)?;
        let qv = DVector::from_vec(rec.weights.q);
        let q = WeightVector::new(qv.clone(), crate::weights::Constraint::Simplex)
            .or_else(|_| WeightVector::new(qv, crate::weights::Constraint::Box01))
            .map_err(|e| Error::Config(format!("fit weights: {e}")))?;
        Ok(Self {
            hypothesis,
            q,
            q_prime: rec.weights.q_prime.map(DVector::from_vec),
            p: rec.weights.p.map(DVector::from_vec),
            trace: rec.trace,
            converged: rec.converged,
            iterations: rec.iterations,
        })
    }
}
