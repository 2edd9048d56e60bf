use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdOptions {
    /// Initial step size.
    pub step: f64,
    pub max_iters: usize,
    /// Stop once an accepted step changes the objective by at most this much.
    pub tol: f64,
    /// Halvings tried before a step is declared unproductive.
    pub max_backtracks: usize,
    /// Multiplier applied to the step after an accepted iteration.
    pub growth: f64,
    /// Per-coordinate step multipliers, for decision vectors whose blocks live on
    /// different scales.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            step: 1e-2,
            max_iters: 1000,
            tol: 1e-6,
            max_backtracks: 40,
            growth: 1.0,
            scales: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgdOutput {
    pub x: DVector<f64>,
    /// Objective at x₀ followed by the objective after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Step size in force when the solver stopped.
    pub final_step: f64,
}

impl PgdOutput {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds at least the initial objective")
    }
}

/// Projected (sub)gradient descent with backtracking.
///
/// `f` returns the objective and a (sub)gradient. A trial point
/// `project(x − step·g)` is accepted only if it does not increase the
/// objective; otherwise the step is halved. The returned iterate is therefore
/// also the best point visited and the trace is non-increasing.
pub fn projected_gradient_descent<F, P>(
    mut f: F,
    project: P,
    x0: DVector<f64>,
    opts: &PgdOptions,
) -> Result<PgdOutput>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
    P: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(opts.step > 0.0) || !opts.step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", opts.step)));
    }
    if let Some(s) = &opts.scales {
        if s.len() != x0.len() {
            return Err(Error::Dimension(format!(
                "{} step scales for a vector of length {}",
                s.len(),
                x0.len()
            )));
        }
    }
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    check_finite(fx, &g, 0)?;
    let mut trace = vec![fx];
    let mut step = opts.step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        if let Some(s) = &opts.scales {
            g.iter_mut().zip(s).for_each(|(gi, si)| *gi *= si);
        }
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = project(&(&x - &g * step));
            let (ft, gt) = f(&trial)?;
            check_finite(ft, &gt, iterations)?;
            if ft <= fx {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            // No descent along the projected direction at any tried scale.
            converged = true;
            break;
        };
        let delta = (fx - fnew).abs();
        x = xn;
        fx = fnew;
        g = gnew;
        trace.push(fx);
        step *= opts.growth;
        if delta <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(PgdOutput {
        x,
        trace,
        iterations,
        converged,
        final_step: step,
    })
}

fn check_finite(fx: f64, g: &DVector<f64>, iteration: usize) -> Result<()> {
    if !fx.is_finite() {
        return Err(Error::Divergence {
            iteration,
            reason: "non-finite objective".into(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iteration,
            reason: "non-finite gradient".into(),
        });
    }
    Ok(())
}
