//! Linear hypotheses in a norm ball and the hypothesis space description.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;

const NORM_TOL: f64 = 1e-9;

/// x ↦ w·x + bias with ‖w‖₂ ≤ norm_bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRepr", into = "HypothesisRepr")]
pub struct LinearHypothesis {
    w: DVector<f64>,
    bias: f64,
    norm_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct HypothesisRepr {
    w: Vec<f64>,
    #[serde(default)]
    bias: f64,
    norm_bound: f64,
}

impl TryFrom<HypothesisRepr> for LinearHypothesis {
    type Error = Error;

    fn try_from(r: HypothesisRepr) -> Result<Self> {
        LinearHypothesis::with_bias(DVector::from_vec(r.w), r.bias, r.norm_bound)
    }
}

impl From<LinearHypothesis> for HypothesisRepr {
    fn from(h: LinearHypothesis) -> Self {
        HypothesisRepr {
            w: h.w.iter().copied().collect(),
            bias: h.bias,
            norm_bound: h.norm_bound,
        }
    }
}

impl LinearHypothesis {
    pub fn new(w: DVector<f64>, norm_bound: f64) -> Result<Self> {
        Self::with_bias(w, 0.0, norm_bound)
    }

    pub fn with_bias(w: DVector<f64>, bias: f64, norm_bound: f64) -> Result<Self> {
        if !(norm_bound > 0.0) || !norm_bound.is_finite() {
            return Err(Error::InvalidParameter(format!("norm bound must be positive, got {norm_bound}")));
        }
        if w.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
            return Err(Error::NonFinite("hypothesis weights".into()));
        }
        let norm = w.norm();
        if norm > norm_bound + NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "weight norm {norm} exceeds bound {norm_bound}"
            )));
        }
        Ok(Self { w, bias, norm_bound })
    }

    /// Builds from an arbitrary vector, rescaling onto the ball if needed.
    pub fn clipped(mut w: DVector<f64>, norm_bound: f64) -> Self {
        let n = w.norm();
        if n > norm_bound {
            w *= norm_bound / n;
        }
        Self { w, bias: 0.0, norm_bound }
    }

    pub fn zero(d: usize, norm_bound: f64) -> Self {
        Self {
            w: DVector::zeros(d),
            bias: 0.0,
            norm_bound,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Predictions for every row of `x`.
    pub fn predict_all(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = x * &self.w;
        if self.bias != 0.0 {
            out.add_scalar_mut(self.bias);
        }
        out
    }
}

/// Ball B(center, radius) the supremum over H is restricted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBall {
    pub center: LinearHypothesis,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpace {
    pub loss: LossKind,
    /// Λ, the radius of the weight ball.
    pub radius: f64,
    #[serde(default)]
    pub local_ball: Option<LocalBall>,
}

impl HypothesisSpace {
    pub fn new(loss: LossKind, radius: f64) -> Result<Self> {
        let s = Self {
            loss,
            radius,
            local_ball: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_local_ball(mut self, center: LinearHypothesis, radius: f64) -> Result<Self> {
        self.local_ball = Some(LocalBall { center, radius });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {}", self.radius)));
        }
        if let Some(ball) = &self.local_ball {
            if ball.radius < 0.0 || !ball.radius.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "local ball radius must be non-negative, got {}",
                    ball.radius
                )));
            }
            if ball.center.norm_sq().sqrt() > ball.center.norm_bound() + NORM_TOL {
                return Err(Error::InvalidParameter("local ball center violates its norm bound".into()));
            }
        }
        Ok(())
    }

    /// Center and radius of the ball searched by supremum estimators.
    pub fn search_ball(&self, d: usize) -> (DVector<f64>, f64) {
        match &self.local_ball {
            Some(b) => (b.center.weights().clone(), b.radius),
            None => (DVector::zeros(d), self.radius),
        }
    }
}
