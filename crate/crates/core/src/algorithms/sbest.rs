//! SBEST and BEST: joint learning of per-example weights and a hypothesis.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::erm::{weighted_erm, weighted_erm_from, ErmOptions};
use super::fit::FitResult;
use crate::dataset::{Domain, LabeledDataset};
use crate::discrepancy::{index_weight_discrepancy, AscentOptions};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::{per_example_losses, LossKind};
use crate::optim::{
    dca_solve, project_ball, project_box_uniform, project_simplex, projected_gradient_descent, DcaOptions, DcaProgram,
    PgdOptions,
};
use crate::weights::{Constraint, WeightVector};

/// Which weight penalty stands in for dis(q, p⁰).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Variant {
    /// dis(q, p⁰) is bounded by ‖q − p⁰‖₁ and absorbed into the λ₁ term.
    #[default]
    Sbest,
    /// dis(q, p⁰) is estimated by gradient ascent at every weight update.
    Best { ascent: AscentOptions },
}

/// Starting weights q₀ of the alternating and DC solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbestInit {
    /// Uniform over all m + n rows.
    #[default]
    Uniform,
    /// The reference p⁰.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbestHyperparams {
    pub lambda_inf: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// Discrepancy estimate d̂ charged to every source row.
    pub d_hat: f64,
    /// Reference weights; uniform over the target rows when absent.
    #[serde(default)]
    pub p0: Option<WeightVector>,
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub constraint: Constraint,
    /// Weight-step solver settings; `step` is the tunable step size.
    #[serde(default)]
    pub q_step: PgdOptions,
    #[serde(default)]
    pub erm: ErmOptions,
    #[serde(default)]
    pub variant: Variant,
    /// Scale s in qℓ = ½[(sq + ℓ/s)² − s²q² − ℓ²/s²]; defaults to max((m + n)^¼, √(2λ₂)).
    #[serde(default)]
    pub dc_scale: Option<f64>,
    #[serde(default)]
    pub dca: Option<DcaOptions>,
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
    #[serde(default)]
    pub init: SbestInit,
}

impl Default for SbestHyperparams {
    fn default() -> Self {
        Self {
            lambda_inf: 1e-3,
            lambda_1: 1.0,
            lambda_2: 1000.0,
            d_hat: 0.0,
            p0: None,
            tol: 1e-6,
            max_iters: 100,
            constraint: Constraint::Simplex,
            q_step: PgdOptions {
                step: 1e-3,
                ..Default::default()
            },
            erm: ErmOptions::default(),
            variant: Variant::Sbest,
            dc_scale: None,
            dca: None,
            time_budget_secs: None,
            init: SbestInit::Uniform,
        }
    }
}

impl SbestHyperparams {
    pub fn validate(&self, rows: usize) -> Result<()> {
        for (name, v) in [
            ("lambda_inf", self.lambda_inf),
            ("lambda_1", self.lambda_1),
            ("lambda_2", self.lambda_2),
            ("d_hat", self.d_hat),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let Some(p0) = &self.p0 {
            if p0.len() != rows {
                return Err(Error::Dimension(format!("p0 has length {}, data has {rows} rows", p0.len())));
            }
        }
        Ok(())
    }

    pub fn reference(&self, data: &LabeledDataset) -> Result<WeightVector> {
        match &self.p0 {
            Some(p) => Ok(p.clone()),
            None => WeightVector::uniform_on(data.domains(), Domain::Target),
        }
    }

    fn budget(&self) -> Option<Duration> {
        self.time_budget_secs.map(Duration::from_secs_f64)
    }
}

/// Per-row charge dᵢ = d̂·1{row i is a source row}.
pub fn source_charges(data: &LabeledDataset, d_hat: f64) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        data.domains().iter().map(|&d| if d == Domain::Source { d_hat } else { 0.0 }),
    )
}

fn linf(q: &DVector<f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &v) in q.iter().enumerate() {
        if v.abs() > best.0 {
            best = (v.abs(), i);
        }
    }
    if q.is_empty() {
        (0.0, 0)
    } else {
        best
    }
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

/// Σ qᵢ[ℓᵢ + dᵢ] + λ∞‖q‖∞‖h‖² + λ₁‖q − p⁰‖₁ + λ₂‖q‖₂².
pub fn sbest_objective(
    h: &LinearHypothesis,
    q: &WeightVector,
    data: &LabeledDataset,
    params: &SbestHyperparams,
    loss: LossKind,
) -> Result<f64> {
    if q.len() != data.len() {
        return Err(Error::Dimension(format!("weights of length {} for {} rows", q.len(), data.len())));
    }
    let p0 = params.reference(data)?;
    let losses = DVector::from_vec(per_example_losses(h, data, loss)?);
    let terms = WeightTerms::new(&losses, &source_charges(data, params.d_hat), &p0, params, h.norm_sq());
    Ok(terms.value(q.values()))
}

// The weight-step objective for a fixed hypothesis.
struct WeightTerms<'a> {
    a: DVector<f64>,
    p0: &'a WeightVector,
    linf_coef: f64,
    lambda_1: f64,
    lambda_2: f64,
}

impl<'a> WeightTerms<'a> {
    fn new(
        losses: &DVector<f64>,
        charges: &DVector<f64>,
        p0: &'a WeightVector,
        params: &SbestHyperparams,
        w_norm_sq: f64,
    ) -> Self {
        Self {
            a: losses + charges,
            p0,
            linf_coef: params.lambda_inf * w_norm_sq,
            lambda_1: params.lambda_1,
            lambda_2: params.lambda_2,
        }
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        self.a.dot(q)
            + self.linf_coef * linf(q).0
            + self.lambda_1 * (q - self.p0.values()).abs().sum()
            + self.lambda_2 * q.norm_squared()
    }

    fn value_grad(&self, q: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut g = &self.a + q * (2.0 * self.lambda_2);
        let (_, imax) = linf(q);
        if !q.is_empty() {
            g[imax] += self.linf_coef;
        }
        let p0 = self.p0.values();
        for i in 0..q.len() {
            g[i] += self.lambda_1 * sign0(q[i] - p0[i]);
        }
        (self.value(q), g)
    }
}

fn project_weights(constraint: Constraint) -> impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync {
    move |v| match constraint {
        Constraint::Simplex => project_simplex(v),
        Constraint::Box01 => project_box_uniform(v, 0.0, 1.0).expect("0 ≤ 1"),
    }
}

fn check_inputs(data: &LabeledDataset, params: &SbestHyperparams, space: &HypothesisSpace) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData("no training rows".into()));
    }
    params.validate(data.len())?;
    space.validate()?;
    space.loss.check_labels(data)
}

fn check_budget(start: Instant, budget: Option<Duration>) -> Result<()> {
    match budget {
        Some(b) if start.elapsed() > b => Err(Error::TimeBudget {
            budget_secs: b.as_secs_f64(),
        }),
        _ => Ok(()),
    }
}

/// Starting point shared by both solvers: q₀ (uniform over all rows by default) and h₀ its ERM fit.
pub fn sbest_init(
    data: &LabeledDataset,
    params: &SbestHyperparams,
    space: &HypothesisSpace,
) -> Result<(WeightVector, LinearHypothesis)> {
    let q0 = match params.init {
        SbestInit::Uniform => WeightVector::uniform(data.len()),
        SbestInit::Reference => params.reference(data)?,
    };
    let ridge = params.lambda_inf * q0.linf();
    let h0 = weighted_erm(data, q0.values(), space, ridge, &params.erm)?;
    Ok((q0, h0))
}

/// Alternating minimization: a projected-gradient weight step followed by a
/// weighted-ERM hypothesis step, until the objective changes by at most τ.
pub fn sbest_am(data: &LabeledDataset, params: &SbestHyperparams, space: &HypothesisSpace) -> Result<FitResult> {
    check_inputs(data, params, space)?;
    let start = Instant::now();
    let loss = space.loss;
    let p0 = params.reference(data)?;
    let charges = source_charges(data, params.d_hat);
    let project = project_weights(params.constraint);

    let (q0, mut h) = sbest_init(data, params, space)?;
    let mut q = q0.into_values();
    let mut losses = DVector::from_vec(per_example_losses(&h, data, loss)?);
    let mut curr = full_objective(&losses, &charges, &p0, params, &h, &q, data, space)?;
    let mut trace = vec![curr];
    let mut converged = false;
    let mut iterations = 0;
    let mut step = params.q_step.step;

    while iterations < params.max_iters {
        check_budget(start, params.budget())?;
        iterations += 1;

        let terms = WeightTerms::new(&losses, &charges, &p0, params, h.norm_sq());
        let best = BestTerm::new(params, &p0, data, space);
        let opts = PgdOptions { step, ..params.q_step.clone() };
        let out = projected_gradient_descent(
            |v| {
                let (f, g) = terms.value_grad(v);
                match &best {
                    Some(b) => {
                        let (df, dg) = b.value_grad(v)?;
                        Ok((f + df, g + dg))
                    }
                    None => Ok((f, g)),
                }
            },
            &project,
            q.clone(),
            &opts,
        )
        .map_err(|e| Error::Subproblem {
            iteration: iterations,
            source: Box::new(e),
        })?;
        step = out.final_step.max(params.q_step.step * 1e-6);
        q = out.x;

        let ridge = params.lambda_inf * linf(&q).0;
        let candidate = weighted_erm_from(data, &q, space, ridge, Some(h.weights()), &params.erm)?;
        let cand_losses = DVector::from_vec(per_example_losses(&candidate, data, loss)?);
        let with_old = full_objective(&losses, &charges, &p0, params, &h, &q, data, space)?;
        let with_new = full_objective(&cand_losses, &charges, &p0, params, &candidate, &q, data, space)?;
        // Keep the previous hypothesis if the inexact h-step did not help.
        let new = if with_new <= with_old {
            h = candidate;
            losses = cand_losses;
            with_new
        } else {
            with_old
        };
        let delta = (curr - new).abs();
        trace.push(new.min(curr));
        curr = new.min(curr);
        if delta <= params.tol {
            converged = true;
            break;
        }
    }

    let q = WeightVector::from_projected(q, params.constraint);
    Ok(FitResult {
        hypothesis: h,
        q,
        q_prime: None,
        p: None,
        trace,
        converged,
        iterations,
    })
}

#[allow(clippy::too_many_arguments)]
fn full_objective(
    losses: &DVector<f64>,
    charges: &DVector<f64>,
    p0: &WeightVector,
    params: &SbestHyperparams,
    h: &LinearHypothesis,
    q: &DVector<f64>,
    data: &LabeledDataset,
    space: &HypothesisSpace,
) -> Result<f64> {
    let base = WeightTerms::new(losses, charges, p0, params, h.norm_sq()).value(q);
    match BestTerm::new(params, p0, data, space) {
        Some(b) => Ok(base + b.value_grad(q)?.0),
        None => Ok(base),
    }
}

// dis(q, p⁰) for the BEST variant, with the maximizer's losses as subgradient.
struct BestTerm<'a> {
    p0: &'a WeightVector,
    data: &'a LabeledDataset,
    space: &'a HypothesisSpace,
    ascent: AscentOptions,
}

impl<'a> BestTerm<'a> {
    fn new(
        params: &SbestHyperparams,
        p0: &'a WeightVector,
        data: &'a LabeledDataset,
        space: &'a HypothesisSpace,
    ) -> Option<Self> {
        match &params.variant {
            Variant::Sbest => None,
            Variant::Best { ascent } => Some(Self {
                p0,
                data,
                space,
                ascent: ascent.clone(),
            }),
        }
    }

    fn value_grad(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let qv = WeightVector::from_projected(q.clone(), Constraint::Box01);
        let est = index_weight_discrepancy(&qv, self.p0, self.data, self.space, &self.ascent)?;
        let h = est.maximizer(self.space.radius);
        let g = DVector::from_vec(per_example_losses(&h, self.data, self.space.loss)?);
        Ok((est.value, g))
    }
}

/// DC programming over the joint variable (w, q).
///
/// With scale s, qᵢℓᵢ = ½[(sqᵢ + ℓᵢ/s)² − s²qᵢ² − ℓᵢ²/s²] and
/// ‖q‖∞‖w‖² = ½[(s‖q‖∞ + ‖w‖²/s)² − s²‖q‖∞² − ‖w‖⁴/s²]. The first square of
/// each pair goes to g₁ with the remaining convex terms, the rest to g₂.
pub fn sbest_dc(data: &LabeledDataset, params: &SbestHyperparams, space: &HypothesisSpace) -> Result<FitResult> {
    check_inputs(data, params, space)?;
    if params.variant != Variant::Sbest {
        return Err(Error::InvalidParameter("the DC solver supports the SBEST variant only".into()));
    }
    let start = Instant::now();
    let (q0, h0) = sbest_init(data, params, space)?;
    let dc = SbestDc::new(data, params, space)?;
    let x0 = dc.join(h0.weights(), q0.values());
    let program = dc.program();
    let mut opts = params.dca.clone().unwrap_or_default();
    opts.subproblem.scales = Some(dc.block_scales(&x0));
    if params.dca.is_none() {
        opts.subproblem.step = 1.0;
        opts.subproblem.growth = 1.25;
        opts.subproblem.max_iters = 200;
        opts.subproblem.tol = params.tol * 1e-2;
        opts.tol = params.tol;
        opts.max_iters = params.max_iters;
    }
    let out = dca_solve(&program, x0, &opts)?;
    check_budget(start, params.budget())?;
    let (w, q) = dc.split(&out.x);
    let h = LinearHypothesis::clipped(w, space.radius);
    Ok(FitResult {
        hypothesis: h,
        q: WeightVector::from_projected(q, params.constraint),
        q_prime: None,
        p: None,
        trace: out.trace,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// The DC decomposition of the SBEST objective, exposed for inspection.
pub struct SbestDc<'a> {
    data: &'a LabeledDataset,
    loss: LossKind,
    radius: f64,
    charges: DVector<f64>,
    p0: WeightVector,
    lambda_inf: f64,
    lambda_1: f64,
    lambda_2: f64,
    s: f64,
    constraint: Constraint,
}

impl<'a> SbestDc<'a> {
    pub fn new(data: &'a LabeledDataset, params: &SbestHyperparams, space: &HypothesisSpace) -> Result<Self> {
        let s = params
            .dc_scale
            .unwrap_or_else(|| (data.len() as f64).powf(0.25).max((2.0 * params.lambda_2).sqrt()));
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("dc_scale must be positive, got {s}")));
        }
        Ok(Self {
            data,
            loss: space.loss,
            radius: space.radius,
            charges: source_charges(data, params.d_hat),
            p0: params.reference(data)?,
            lambda_inf: params.lambda_inf,
            lambda_1: params.lambda_1,
            lambda_2: params.lambda_2,
            s,
            constraint: params.constraint,
        })
    }

    pub fn join(&self, w: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(w.len() + q.len(), w.iter().chain(q.iter()).copied())
    }

    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let d = self.data.dim();
        (x.rows(0, d).into_owned(), x.rows(d, x.len() - d).into_owned())
    }

    // Losses and their derivatives in the prediction, per row.
    fn losses(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let preds = self.data.features() * w;
        let y = self.data.labels();
        let mut l = DVector::zeros(preds.len());
        let mut dl = DVector::zeros(preds.len());
        for i in 0..preds.len() {
            let (v, d) = self.loss.eval_with_derivative(preds[i], y[i]);
            l[i] = v;
            dl[i] = d;
        }
        (l, dl)
    }

    /// g₁ and a subgradient.
    pub fn convex_part(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (w, q) = self.split(x);
        let s = self.s;
        let (l, dl) = self.losses(&w);
        let wn2 = w.norm_squared();
        let (qmax, imax) = linf(&q);
        let p0 = self.p0.values();

        let r = &q * s + &l / s;
        let inf_r = s * qmax + wn2 / s;
        let value = 0.5 * r.norm_squared()
            + q.dot(&self.charges)
            + self.lambda_inf * 0.5 * inf_r * inf_r
            + self.lambda_1 * (&q - p0).abs().sum()
            + self.lambda_2 * q.norm_squared();

        let mut gq = &r * s + &self.charges + &q * (2.0 * self.lambda_2);
        if !q.is_empty() {
            gq[imax] += self.lambda_inf * inf_r * s;
        }
        for i in 0..q.len() {
            gq[i] += self.lambda_1 * sign0(q[i] - p0[i]);
        }
        let coef = r.component_mul(&dl) / s;
        let gw = self.data.features().tr_mul(&coef) + &w * (self.lambda_inf * inf_r * 2.0 / s);
        (value, self.join(&gw, &gq))
    }

    /// g₂ and its gradient.
    pub fn concave_part(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (w, q) = self.split(x);
        let s = self.s;
        let s2 = s * s;
        let (l, dl) = self.losses(&w);
        let wn2 = w.norm_squared();
        let (qmax, imax) = linf(&q);
        let value = 0.5 * (s2 * q.norm_squared() + l.norm_squared() / s2)
            + self.lambda_inf * 0.5 * (s2 * qmax * qmax + wn2 * wn2 / s2);
        let mut gq = &q * s2;
        if !q.is_empty() {
            gq[imax] += self.lambda_inf * s2 * qmax;
        }
        let coef = l.component_mul(&dl) / s2;
        let gw = self.data.features().tr_mul(&coef) + &w * (self.lambda_inf * 2.0 * wn2 / s2);
        (value, self.join(&gw, &gq))
    }

    /// g₁ − g₂, equal to the SBEST objective.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.convex_part(x).0 - self.concave_part(x).0
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let (w, q) = self.split(x);
        let w = project_ball(&w, &DVector::zeros(w.len()), self.radius);
        let q = project_weights(self.constraint)(&q);
        self.join(&w, &q)
    }

    fn program(&self) -> DcaProgram<'_> {
        DcaProgram::new(
            |x| Ok(self.convex_part(x)),
            |x| Ok(self.concave_part(x)),
            |x| self.project(x),
        )
    }

    /// Step multipliers of 1/curvature for each block of (w, q).
    fn block_scales(&self, x: &DVector<f64>) -> Vec<f64> {
        let (w, q) = self.split(x);
        let (l, _) = self.losses(&w);
        let s2 = self.s * self.s;
        let kappa = match self.loss {
            LossKind::Squared => 2.0,
            LossKind::Logistic => 0.25,
        };
        let x = self.data.features();
        let curv_w: f64 = (0..x.nrows())
            .map(|i| {
                let row = x.row(i).norm_squared();
                (q[i] + l[i] / s2) * kappa * row + row * kappa.max(1.0) / s2
            })
            .sum::<f64>()
            + self.lambda_inf * (self.s * linf(&q).0 + w.norm_squared() / self.s) * 2.0 / self.s
            + 1e-12;
        let curv_q = s2 + 2.0 * self.lambda_2 + self.lambda_inf * s2;
        let d = self.data.dim();
        (0..x.nrows() + d)
            .map(|i| if i < d { 1.0 / curv_w } else { 1.0 / curv_q })
            .collect()
    }
}
