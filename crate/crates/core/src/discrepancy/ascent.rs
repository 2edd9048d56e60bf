//! Projected gradient ascent for suprema of signed weighted losses over a ball.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::optim::{project_ball, projected_gradient_descent, PgdOptions};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Random starts drawn uniformly in the ball, on top of the deterministic ones.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            max_iters: 300,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    /// Best value found. A lower bound on the supremum.
    pub value: f64,
    pub w: DVector<f64>,
    pub gradient_norm: f64,
    /// Number of starting points tried.
    pub starts: usize,
}

/// Σ cᵢ ℓ(w·xᵢ, yᵢ) with signed coefficients cᵢ.
#[derive(Debug, Clone)]
pub struct SignedLoss {
    x: DMatrix<f64>,
    y: DVector<f64>,
    c: DVector<f64>,
    loss: LossKind,
}

impl SignedLoss {
    /// Keeps only rows with a nonzero coefficient.
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, c: &DVector<f64>, loss: LossKind) -> Result<Self> {
        if x.nrows() != y.len() || x.nrows() != c.len() {
            return Err(Error::Dimension(format!(
                "{} rows, {} targets, {} coefficients",
                x.nrows(),
                y.len(),
                c.len()
            )));
        }
        let active: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
        Ok(Self {
            x: x.select_rows(&active),
            y: y.select_rows(&active),
            c: c.select_rows(&active),
            loss,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn value_grad(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let preds = &self.x * w;
        let mut v = 0.0;
        let mut dl = DVector::zeros(preds.len());
        for i in 0..preds.len() {
            let (l, d) = self.loss.eval_with_derivative(preds[i], self.y[i]);
            v += self.c[i] * l;
            dl[i] = self.c[i] * d;
        }
        (v, self.x.tr_mul(&dl))
    }

    fn curvature(&self) -> f64 {
        let k = match self.loss {
            LossKind::Squared => 2.0,
            LossKind::Logistic => 0.25,
        };
        k * (0..self.x.nrows())
            .map(|i| self.c[i].abs() * self.x.row(i).norm_squared())
            .sum::<f64>()
    }
}

/// Maximizes `objective` over the ball B(center, radius).
///
/// Starts from the center, from the origin when it lies in the ball, and from
/// `opts.restarts` uniform draws. Draw k uses stream k of `opts.seed`, so a
/// run with more restarts only adds starting points and never lowers the value.
pub fn maximize_over_ball(
    objective: &SignedLoss,
    center: &DVector<f64>,
    radius: f64,
    opts: &AscentOptions,
) -> Result<AscentResult> {
    let d = objective.dim();
    if center.len() != d {
        return Err(Error::Dimension(format!("ball center of length {} for {d} features", center.len())));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be non-negative, got {radius}")));
    }
    let mut starts = vec![center.clone()];
    let origin = DVector::zeros(d);
    if center.norm() <= radius && center.norm() > 0.0 {
        starts.push(origin);
    }
    starts.extend((0..opts.restarts).map(|k| rng::in_ball(&mut rng::stream(opts.seed, k as u64), center, radius)));

    let curvature = objective.curvature();
    if radius == 0.0 || curvature == 0.0 {
        let (v, g) = objective.value_grad(center);
        return Ok(AscentResult {
            value: v,
            w: center.clone(),
            gradient_norm: g.norm(),
            starts: starts.len(),
        });
    }
    let pgd = PgdOptions {
        step: 1.0 / curvature,
        max_iters: opts.max_iters,
        tol: opts.tol,
        growth: 1.5,
        ..Default::default()
    };
    let runs: Vec<Result<(f64, DVector<f64>)>> = starts
        .par_iter()
        .map(|x0| {
            let out = projected_gradient_descent(
                |w| {
                    let (v, g) = objective.value_grad(w);
                    Ok((-v, -g))
                },
                |w| project_ball(w, center, radius),
                x0.clone(),
                &pgd,
            )?;
            Ok((-out.objective(), out.x))
        })
        .collect();

    let mut best: Option<(f64, DVector<f64>)> = None;
    for r in runs {
        let (v, w) = r?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, w));
        }
    }
    let (value, w) = best.expect("at least one start");
    let gradient_norm = objective.value_grad(&w).1.norm();
    Ok(AscentResult {
        value,
        w,
        gradient_norm,
        starts: starts.len(),
    })
}
