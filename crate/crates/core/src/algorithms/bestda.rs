//! BEST-DA: unlabeled-target domain adaptation with weights q, q′ and p.
//!
//! Rows of the joint vector (q, q′) follow the source sample, then the target
//! sample. The reference p⁰ uses the same layout.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::erm::{weighted_erm, weighted_erm_from, ErmOptions};
use super::fit::FitResult;
use crate::dataset::LabeledDataset;
use crate::discrepancy::{signed_softmax_nonneg, signed_unlabeled_discrepancy};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::{per_example_losses, LossKind};
use crate::optim::{project_box_uniform, project_simplex, projected_gradient_descent, PgdOptions};
use crate::weights::{Constraint, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestDaHyperparams {
    pub lambda_inf: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// Empirical unlabeled discrepancy 𝑑̄ between the two samples.
    pub d_bar: f64,
    /// Reference over the m + n rows; uniform over the target rows when absent.
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    /// Softmax smoothing of the eigenvalue terms when set.
    #[serde(default)]
    pub mu_smooth: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub step: PgdOptions,
    #[serde(default)]
    pub erm: ErmOptions,
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
}

impl Default for BestDaHyperparams {
    fn default() -> Self {
        Self {
            lambda_inf: 1e-3,
            lambda_1: 0.0,
            lambda_2: 0.0,
            d_bar: 0.0,
            p0: None,
            mu_smooth: None,
            tol: 1e-6,
            max_iters: 50,
            step: PgdOptions {
                step: 1e-2,
                max_iters: 200,
                ..Default::default()
            },
            erm: ErmOptions::default(),
            time_budget_secs: None,
        }
    }
}

impl BestDaHyperparams {
    fn validate(&self, m: usize, n: usize) -> Result<()> {
        for (name, v) in [
            ("lambda_inf", self.lambda_inf),
            ("lambda_1", self.lambda_1),
            ("lambda_2", self.lambda_2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if !self.d_bar.is_finite() {
            return Err(Error::NonFinite("d_bar".into()));
        }
        if let Some(mu) = self.mu_smooth {
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter(format!("mu_smooth must be positive, got {mu}")));
            }
        }
        if let Some(p0) = &self.p0 {
            if p0.len() != m + n {
                return Err(Error::Dimension(format!("p0 has length {}, expected {}", p0.len(), m + n)));
            }
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("tol must be positive and max_iters at least 1".into()));
        }
        Ok(())
    }

    fn reference(&self, m: usize, n: usize) -> DVector<f64> {
        match &self.p0 {
            Some(p) => DVector::from_column_slice(p),
            None => DVector::from_iterator(m + n, (0..m + n).map(|i| if i < m { 0.0 } else { 1.0 / n as f64 })),
        }
    }
}

/// Every term of the BEST-DA objective, itemized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestDaTerms {
    pub weighted_loss: f64,
    pub distribution_term: f64,
    pub weighted_discrepancy: f64,
    pub reference_discrepancy: f64,
    pub linf_penalty: f64,
    pub l1_penalty: f64,
    pub l2_penalty: f64,
}

impl BestDaTerms {
    pub fn total(&self) -> f64 {
        self.weighted_loss
            + self.distribution_term
            + self.weighted_discrepancy
            + self.reference_discrepancy
            + self.linf_penalty
            + self.l1_penalty
            + self.l2_penalty
    }
}

// Fixed geometry of one problem instance.
struct Problem<'a> {
    /// Target rows stacked over source rows, for 𝑑𝑖𝑠̄(q′, p).
    tx_sx: DMatrix<f64>,
    /// Source rows stacked over target rows, for 𝑑𝑖𝑠̄((q, q′), p⁰).
    sx_tx: DMatrix<f64>,
    p0: DVector<f64>,
    m: usize,
    n: usize,
    radius: f64,
    params: &'a BestDaHyperparams,
}

impl<'a> Problem<'a> {
    fn new(
        source: &'a LabeledDataset,
        target: &'a LabeledDataset,
        params: &'a BestDaHyperparams,
        space: &HypothesisSpace,
    ) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::EmptyData("BEST-DA needs source and target rows".into()));
        }
        if source.dim() != target.dim() {
            return Err(Error::Dimension(format!(
                "source has {} features, target has {}",
                source.dim(),
                target.dim()
            )));
        }
        if space.loss != LossKind::Squared {
            return Err(Error::UnsupportedLoss(format!(
                "the eigenvalue discrepancy terms need the squared loss, not {}",
                space.loss.name()
            )));
        }
        let (m, n) = (source.len(), target.len());
        params.validate(m, n)?;
        space.validate()?;
        let tx_sx = stack(target.features(), source.features());
        let sx_tx = stack(source.features(), target.features());
        Ok(Self {
            tx_sx,
            sx_tx,
            p0: params.reference(m, n),
            m,
            n,
            radius: space.radius,
            params,
        })
    }

    // 4Λ²·[max(0, λ_max) or its smooth surrogate] of Σ cᵢxᵢxᵢᵀ, with gradient in c.
    fn spectral(&self, c: &DVector<f64>, x: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
        let scale = 4.0 * self.radius * self.radius;
        match self.params.mu_smooth {
            None => {
                let s = signed_unlabeled_discrepancy(c, x, self.radius)?;
                Ok((s.value, s.gradient))
            }
            Some(mu) => {
                let (f, _, g) = signed_softmax_nonneg(c, x, mu)?;
                Ok((scale * f, g * scale))
            }
        }
    }

    fn terms(&self, losses: &DVector<f64>, w_norm_sq: f64, v: &DVector<f64>) -> Result<(BestDaTerms, DVector<f64>)> {
        let (m, n) = (self.m, self.n);
        let q = v.rows(0, m);
        let qp = v.rows(m, n);
        let p = v.rows(m + n, m);
        let z = v.rows(0, m + n);
        let pr = self.params;

        let c1 = DVector::from_iterator(n + m, qp.iter().copied().chain(p.iter().map(|x| -x)));
        let (dis1, g1) = self.spectral(&c1, &self.tx_sx)?;
        let c2 = &z - &self.p0;
        let (dis2, g2) = self.spectral(&c2, &self.sx_tx)?;
        let (zmax, imax) = z.iter().enumerate().fold((f64::NEG_INFINITY, 0), |acc, (i, &x)| {
            if x.abs() > acc.0 {
                (x.abs(), i)
            } else {
                acc
            }
        });

        let terms = BestDaTerms {
            weighted_loss: (q + p).dot(losses),
            distribution_term: q.iter().map(|x| x.abs()).sum::<f64>() * pr.d_bar,
            weighted_discrepancy: dis1,
            reference_discrepancy: dis2,
            linf_penalty: pr.lambda_inf * zmax * w_norm_sq,
            l1_penalty: pr.lambda_1 * c2.abs().sum(),
            l2_penalty: pr.lambda_2 * (q.norm_squared() + qp.norm_squared()),
        };

        let mut g = DVector::zeros(2 * m + n);
        for i in 0..m {
            g[i] = losses[i] + pr.d_bar * sign0(q[i]) + g2[i] + 2.0 * pr.lambda_2 * q[i] + pr.lambda_1 * sign0(c2[i]);
            g[m + n + i] = losses[i] - g1[n + i];
        }
        for j in 0..n {
            g[m + j] = g1[j] + g2[m + j] + 2.0 * pr.lambda_2 * qp[j] + pr.lambda_1 * sign0(c2[m + j]);
        }
        g[imax] += pr.lambda_inf * w_norm_sq;
        Ok((terms, g))
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.m, self.n);
        let z = project_simplex(&v.rows(0, m + n).into_owned());
        let p = project_box_uniform(&v.rows(m + n, m).into_owned(), 0.0, 1.0).expect("0 ≤ 1");
        DVector::from_iterator(2 * m + n, z.iter().chain(p.iter()).copied())
    }

    fn h_weights(&self, v: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.m, self.n);
        v.rows(0, m) + v.rows(m + n, m)
    }

    fn ridge(&self, v: &DVector<f64>) -> f64 {
        let zmax = v.rows(0, self.m + self.n).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        self.params.lambda_inf * zmax
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, d) = a.shape();
    DMatrix::from_fn(na + b.nrows(), d, |i, j| if i < na { a[(i, j)] } else { b[(i - na, j)] })
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The BEST-DA objective at (h, q, q′, p), itemized.
#[allow(clippy::too_many_arguments)]
pub fn bestda_objective_terms(
    h: &LinearHypothesis,
    q: &DVector<f64>,
    p: &DVector<f64>,
    q_prime: &DVector<f64>,
    source: &LabeledDataset,
    target: &LabeledDataset,
    params: &BestDaHyperparams,
    space: &HypothesisSpace,
) -> Result<BestDaTerms> {
    let prob = Problem::new(source, target, params, space)?;
    if q.len() != prob.m || p.len() != prob.m || q_prime.len() != prob.n {
        return Err(Error::Dimension(format!(
            "q, p of length {} and {}, q′ of length {}, for m = {} and n = {}",
            q.len(),
            p.len(),
            q_prime.len(),
            prob.m,
            prob.n
        )));
    }
    let losses = DVector::from_vec(per_example_losses(h, source, space.loss)?);
    let v = DVector::from_iterator(
        2 * prob.m + prob.n,
        q.iter().chain(q_prime.iter()).chain(p.iter()).copied(),
    );
    Ok(prob.terms(&losses, h.norm_sq(), &v)?.0)
}

#[allow(clippy::too_many_arguments)]
pub fn bestda_objective(
    h: &LinearHypothesis,
    q: &DVector<f64>,
    p: &DVector<f64>,
    q_prime: &DVector<f64>,
    source: &LabeledDataset,
    target: &LabeledDataset,
    params: &BestDaHyperparams,
    space: &HypothesisSpace,
) -> Result<f64> {
    Ok(bestda_objective_terms(h, q, p, q_prime, source, target, params, space)?.total())
}

/// Alternating minimization of the BEST-DA objective. Target labels are never read.
pub fn bestda_am(
    source: &LabeledDataset,
    target: &LabeledDataset,
    params: &BestDaHyperparams,
    space: &HypothesisSpace,
) -> Result<FitResult> {
    let prob = Problem::new(source, target, params, space)?;
    let start = Instant::now();
    let budget = params.time_budget_secs.map(Duration::from_secs_f64);
    let (m, n) = (prob.m, prob.n);
    let u = 1.0 / (m + n) as f64;
    let p_init = (n as f64 * u) / m as f64;
    let mut v = DVector::from_iterator(2 * m + n, (0..2 * m + n).map(|i| if i < m + n { u } else { p_init }));

    let mut h = weighted_erm(source, &prob.h_weights(&v), space, prob.ridge(&v), &params.erm)?;
    let mut losses = DVector::from_vec(per_example_losses(&h, source, space.loss)?);
    let mut curr = prob.terms(&losses, h.norm_sq(), &v)?.0.total();
    let mut trace = vec![curr];
    let mut converged = false;
    let mut iterations = 0;
    let mut step = params.step.step;

    while iterations < params.max_iters {
        if let Some(b) = budget {
            if start.elapsed() > b {
                return Err(Error::TimeBudget {
                    budget_secs: b.as_secs_f64(),
                });
            }
        }
        iterations += 1;
        let w2 = h.norm_sq();
        let opts = PgdOptions { step, ..params.step.clone() };
        let out = projected_gradient_descent(
            |x| {
                let (t, g) = prob.terms(&losses, w2, x)?;
                Ok((t.total(), g))
            },
            |x| prob.project(x),
            v.clone(),
            &opts,
        )
        .map_err(|e| Error::Subproblem {
            iteration: iterations,
            source: Box::new(e),
        })?;
        step = out.final_step.max(params.step.step * 1e-6);
        v = out.x;
        let with_old = out.trace.last().copied().unwrap_or(curr);

        let candidate = weighted_erm_from(
            source,
            &prob.h_weights(&v),
            space,
            prob.ridge(&v),
            Some(h.weights()),
            &params.erm,
        )?;
        let cand_losses = DVector::from_vec(per_example_losses(&candidate, source, space.loss)?);
        let with_new = prob.terms(&cand_losses, candidate.norm_sq(), &v)?.0.total();
        let new = if with_new <= with_old {
            h = candidate;
            losses = cand_losses;
            with_new
        } else {
            with_old
        };
        let new = new.min(curr);
        let delta = curr - new;
        trace.push(new);
        curr = new;
        if delta.abs() <= params.tol {
            converged = true;
            break;
        }
    }

    let q = v.rows(0, m).into_owned();
    let q_prime = v.rows(m, n).into_owned();
    let p = v.rows(m + n, m).into_owned();
    Ok(FitResult {
        hypothesis: h,
        q: WeightVector::from_projected(q, Constraint::Box01),
        q_prime: Some(q_prime),
        p: Some(p),
        trace,
        converged,
        iterations,
    })
}
