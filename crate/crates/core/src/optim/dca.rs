use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::pgd::{projected_gradient_descent, PgdOptions};
use crate::error::{Error, Result};

type ValueGrad<'a> = Box<dyn Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + Send + Sync + 'a>;
type Projection<'a> = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a>;

/// Objective g₁ − g₂ with both parts convex, over a set given by its projection.
pub struct DcaProgram<'a> {
    /// g₁ and a subgradient.
    pub convex_part: ValueGrad<'a>,
    /// g₂ and its gradient.
    pub concave_part: ValueGrad<'a>,
    pub project: Projection<'a>,
}

impl<'a> DcaProgram<'a> {
    pub fn new(
        convex_part: impl Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + Send + Sync + 'a,
        concave_part: impl Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + Send + Sync + 'a,
        project: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a,
    ) -> Self {
        Self {
            convex_part: Box::new(convex_part),
            concave_part: Box::new(concave_part),
            project: Box::new(project),
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((self.convex_part)(x)?.0 - (self.concave_part)(x)?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcaOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub subproblem: PgdOptions,
}

impl Default for DcaOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            subproblem: PgdOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DcaOutput {
    pub x: DVector<f64>,
    /// Objective at x₀ and after each accepted outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Outer iterations whose candidate raised the objective and was discarded.
    pub rejected: usize,
}

/// DC algorithm: repeatedly minimize g₁(x) − ∇g₂(x_t)·x over the feasible set.
///
/// Each subproblem is solved by projected gradient descent started at x_t.
/// A candidate that raises g₁ − g₂ beyond 1e-12 is rejected and the solver
/// stops at x_t.
pub fn dca_solve(program: &DcaProgram<'_>, x0: DVector<f64>, opts: &DcaOptions) -> Result<DcaOutput> {
    let mut x = x0;
    let mut fx = program.objective(&x)?;
    if !fx.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            reason: "non-finite objective at the starting point".into(),
        });
    }
    let mut trace = vec![fx];
    let mut converged = false;
    let mut rejected = 0;
    let mut iterations = 0;
    let mut step = opts.subproblem.step;

    while iterations < opts.max_iters {
        iterations += 1;
        let (_, lin) = (program.concave_part)(&x)?;
        let sub = |z: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
            let (v, g) = (program.convex_part)(z)?;
            Ok((v - lin.dot(z), g - &lin))
        };
        let sub_opts = PgdOptions { step, ..opts.subproblem.clone() };
        let out = projected_gradient_descent(sub, &program.project, x.clone(), &sub_opts).map_err(|e| {
            Error::Subproblem {
                iteration: iterations,
                source: Box::new(e),
            }
        })?;
        step = out.final_step.max(opts.subproblem.step * 1e-6);
        let fnew = program.objective(&out.x)?;
        if !(fnew <= fx + 1e-12) {
            rejected += 1;
            converged = true;
            break;
        }
        let delta = fx - fnew;
        x = out.x;
        fx = fnew.min(fx);
        trace.push(fx);
        if delta.abs() <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(DcaOutput {
        x,
        trace,
        iterations,
        converged,
        rejected,
    })
}
