//! Unlabeled discrepancy for the squared loss through the spectrum of M.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigendecomposition, SymMatrix};
use crate::loss::LossKind;

/// Value and subgradient of 4Λ² max(0, λ_max(Σ cᵢ xᵢxᵢᵀ)) in the coefficients c.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignedUnlabeled {
    pub value: f64,
    /// Top eigenvalue before the clamp at zero.
    pub lambda_max: f64,
    pub gradient: DVector<f64>,
}

/// Value and gradient split by role: target weights q′ and source weights p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnlabeledDiscrepancy {
    pub value: f64,
    pub lambda_max: f64,
    pub grad_target: DVector<f64>,
    pub grad_source: DVector<f64>,
}

/// Σ cᵢ xᵢxᵢᵀ over the rows of `x`.
pub fn weighted_scatter(c: &DVector<f64>, x: &DMatrix<f64>) -> Result<SymMatrix> {
    if c.len() != x.nrows() {
        return Err(Error::Dimension(format!("{} weights for {} rows", c.len(), x.nrows())));
    }
    let mut scaled = x.clone();
    for (i, &ci) in c.iter().enumerate() {
        scaled.row_mut(i).scale_mut(ci);
    }
    Ok(SymMatrix::symmetrized(x.tr_mul(&scaled)))
}

/// M(q′, p) = Σ q′ⱼ x′ⱼx′ⱼᵀ − Σ pᵢ xᵢxᵢᵀ.
pub fn build_m(
    q_prime: &DVector<f64>,
    target_x: &DMatrix<f64>,
    p: &DVector<f64>,
    source_x: &DMatrix<f64>,
) -> Result<SymMatrix> {
    if target_x.ncols() != source_x.ncols() {
        return Err(Error::Dimension(format!(
            "target has {} features, source has {}",
            target_x.ncols(),
            source_x.ncols()
        )));
    }
    let t = weighted_scatter(q_prime, target_x)?;
    let s = weighted_scatter(p, source_x)?;
    Ok(SymMatrix::symmetrized(t.into_matrix() - s.into_matrix()))
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

pub fn signed_unlabeled_discrepancy(c: &DVector<f64>, x: &DMatrix<f64>, radius: f64) -> Result<SignedUnlabeled> {
    check_radius(radius)?;
    let m = weighted_scatter(c, x)?;
    let scale = 4.0 * radius * radius;
    if m.dim() == 0 {
        return Ok(SignedUnlabeled {
            value: 0.0,
            lambda_max: 0.0,
            gradient: DVector::zeros(c.len()),
        });
    }
    let eig = sym_eigendecomposition(&m)?;
    let lambda_max = eig.max_value();
    if lambda_max <= 0.0 {
        return Ok(SignedUnlabeled {
            value: 0.0,
            lambda_max,
            gradient: DVector::zeros(c.len()),
        });
    }
    let u = eig.top_vector();
    let proj = x * &u;
    Ok(SignedUnlabeled {
        value: scale * lambda_max,
        lambda_max,
        gradient: proj.map(|v| scale * v * v),
    })
}

/// 4Λ² max(0, λ_max(M(q′, p))) with its subgradient in (q′, p).
pub fn unlabeled_discrepancy(
    q_prime: &DVector<f64>,
    target_x: &DMatrix<f64>,
    p: &DVector<f64>,
    source_x: &DMatrix<f64>,
    radius: f64,
    loss: LossKind,
) -> Result<UnlabeledDiscrepancy> {
    if loss != LossKind::Squared {
        return Err(Error::UnsupportedLoss(format!(
            "the eigenvalue formula holds for the squared loss, not {}",
            loss.name()
        )));
    }
    let (c, x) = stack_signed(q_prime, target_x, p, source_x)?;
    let s = signed_unlabeled_discrepancy(&c, &x, radius)?;
    let n = q_prime.len();
    // Source rows enter M with coefficient −pᵢ.
    Ok(UnlabeledDiscrepancy {
        value: s.value,
        lambda_max: s.lambda_max,
        grad_target: s.gradient.rows(0, n).into_owned(),
        grad_source: -s.gradient.rows(n, p.len()).into_owned(),
    })
}

/// Softmax surrogate f = (1/μ) log Tr exp(μM), without the 4Λ² scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftmaxDiscrepancy {
    pub value: f64,
    pub lambda_max: f64,
    pub grad_target: DVector<f64>,
    pub grad_source: DVector<f64>,
}

/// f and ∂f/∂cᵢ = xᵢᵀ e^{μM} xᵢ / Tr e^{μM} for M = Σ cᵢ xᵢxᵢᵀ.
pub fn signed_softmax(c: &DVector<f64>, x: &DMatrix<f64>, mu: f64) -> Result<(f64, f64, DVector<f64>)> {
    softmax_impl(c, x, mu, false)
}

/// Smooth surrogate of max(0, λ_max): (1/μ) log(1 + Tr e^{μM}), which lies
/// within log(k + 1)/μ above max(0, λ_max).
pub fn signed_softmax_nonneg(c: &DVector<f64>, x: &DMatrix<f64>, mu: f64) -> Result<(f64, f64, DVector<f64>)> {
    softmax_impl(c, x, mu, true)
}

fn softmax_impl(c: &DVector<f64>, x: &DMatrix<f64>, mu: f64, with_zero: bool) -> Result<(f64, f64, DVector<f64>)> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let m = weighted_scatter(c, x)?;
    if m.dim() == 0 {
        return Err(Error::Dimension("softmax of a 0x0 matrix".into()));
    }
    let eig = sym_eigendecomposition(&m)?;
    let lmax = eig.max_value();
    let shift = if with_zero { lmax.max(0.0) } else { lmax };
    // Shift before exponentiating so the largest term is 1.
    let weights = eig.values.map(|l| (mu * (l - shift)).exp());
    let z: f64 = weights.sum() + if with_zero { (-mu * shift).exp() } else { 0.0 };
    let value = shift + z.ln() / mu;
    let proj = x * &eig.vectors;
    let grad = DVector::from_iterator(
        x.nrows(),
        (0..x.nrows()).map(|i| {
            (0..weights.len())
                .map(|j| weights[j] * proj[(i, j)] * proj[(i, j)])
                .sum::<f64>()
                / z
        }),
    );
    Ok((value, lmax, grad))
}

pub fn softmax_unlabeled_discrepancy(
    q_prime: &DVector<f64>,
    target_x: &DMatrix<f64>,
    p: &DVector<f64>,
    source_x: &DMatrix<f64>,
    mu: f64,
) -> Result<SoftmaxDiscrepancy> {
    let (c, x) = stack_signed(q_prime, target_x, p, source_x)?;
    let (value, lambda_max, g) = signed_softmax(&c, &x, mu)?;
    let n = q_prime.len();
    let mut grad_source = g.rows(n, p.len()).into_owned();
    grad_source.neg_mut();
    Ok(SoftmaxDiscrepancy {
        value,
        lambda_max,
        grad_target: g.rows(0, n).into_owned(),
        grad_source,
    })
}

/// The softmax parameter giving a uniform ε-approximation of λ_max in dimension k.
pub fn softmax_mu_for(k: usize, eps: f64) -> f64 {
    (k.max(2) as f64).ln() / eps
}

// Stacks target rows with coefficients q′ over source rows with coefficients −p.
fn stack_signed(
    q_prime: &DVector<f64>,
    target_x: &DMatrix<f64>,
    p: &DVector<f64>,
    source_x: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if q_prime.len() != target_x.nrows() || p.len() != source_x.nrows() {
        return Err(Error::Dimension(format!(
            "{} target weights for {} rows, {} source weights for {} rows",
            q_prime.len(),
            target_x.nrows(),
            p.len(),
            source_x.nrows()
        )));
    }
    if target_x.ncols() != source_x.ncols() {
        return Err(Error::Dimension(format!(
            "target has {} features, source has {}",
            target_x.ncols(),
            source_x.ncols()
        )));
    }
    let (n, m, d) = (target_x.nrows(), source_x.nrows(), target_x.ncols());
    let x = DMatrix::from_fn(n + m, d, |i, j| if i < n { target_x[(i, j)] } else { source_x[(i - n, j)] });
    let c = DVector::from_iterator(n + m, q_prime.iter().copied().chain(p.iter().map(|v| -v)));
    Ok((c, x))
}

/// 4Λ² max(0, λ_max(M)) with uniform weights 1/n on P and 1/m on Q.
pub fn empirical_unlabeled_discrepancy(data_p: &LabeledDataset, data_q: &LabeledDataset, radius: f64) -> Result<f64> {
    Ok(empirical_unlabeled_raw(data_p, data_q, radius)?.value)
}

/// As [`empirical_unlabeled_discrepancy`], also exposing the unclamped top eigenvalue.
pub fn empirical_unlabeled_raw(
    data_p: &LabeledDataset,
    data_q: &LabeledDataset,
    radius: f64,
) -> Result<UnlabeledDiscrepancy> {
    if data_p.is_empty() || data_q.is_empty() {
        return Err(Error::EmptyData("unlabeled discrepancy needs two non-empty samples".into()));
    }
    let qp = DVector::from_element(data_p.len(), 1.0 / data_p.len() as f64);
    let p = DVector::from_element(data_q.len(), 1.0 / data_q.len() as f64);
    unlabeled_discrepancy(&qp, data_p.features(), &p, data_q.features(), radius, LossKind::Squared)
}
