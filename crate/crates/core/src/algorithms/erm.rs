//! Weighted empirical risk minimization over the Λ-ball.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::linalg::{sym_eigendecomposition, SymMatrix};
use crate::loss::{sigmoid, softplus, LossKind};
use crate::optim::project_ball;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmOptions {
    /// Gradient-mapping norm at which the logistic solver stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ErmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 5000,
        }
    }
}

/// argmin over ‖w‖ ≤ Λ of Σ qᵢ ℓ(w·xᵢ, yᵢ) + ridge·‖w‖².
pub fn weighted_erm(
    data: &LabeledDataset,
    q: &DVector<f64>,
    space: &HypothesisSpace,
    ridge: f64,
    opts: &ErmOptions,
) -> Result<LinearHypothesis> {
    weighted_erm_from(data, q, space, ridge, None, opts)
}

/// As [`weighted_erm`], starting the iterative solver at `init`.
pub fn weighted_erm_from(
    data: &LabeledDataset,
    q: &DVector<f64>,
    space: &HypothesisSpace,
    ridge: f64,
    init: Option<&DVector<f64>>,
    opts: &ErmOptions,
) -> Result<LinearHypothesis> {
    if q.len() != data.len() {
        return Err(Error::Dimension(format!("{} weights for {} rows", q.len(), data.len())));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge must be non-negative, got {ridge}")));
    }
    if q.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter("ERM weights must be finite and non-negative".into()));
    }
    space.validate()?;
    space.loss.check_labels(data)?;
    let active: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 0.0).collect();
    let x = data.features().select_rows(&active);
    let y = data.labels().select_rows(&active);
    let qa = q.select_rows(&active);
    let w = match space.loss {
        LossKind::Squared => ridge_in_ball(&x, &y, &qa, ridge, space.radius)?,
        LossKind::Logistic => logistic_in_ball(&x, &y, &qa, ridge, space.radius, init, opts)?,
    };
    Ok(LinearHypothesis::clipped(w, space.radius))
}

/// Exact minimizer of the ball-constrained weighted ridge problem.
///
/// Solves (A + νI)w = b with A = XᵀQX + ridge·I, b = XᵀQy and ν ≥ 0 the
/// multiplier of the norm constraint, found by bisection on ‖w(ν)‖ = Λ.
fn ridge_in_ball(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &DVector<f64>,
    ridge: f64,
    radius: f64,
) -> Result<DVector<f64>> {
    let d = x.ncols();
    let mut qx = x.clone();
    for (i, &qi) in q.iter().enumerate() {
        qx.row_mut(i).scale_mut(qi);
    }
    let mut a = x.tr_mul(&qx);
    for j in 0..d {
        a[(j, j)] += ridge;
    }
    let b = qx.tr_mul(y);
    let eig = sym_eigendecomposition(&SymMatrix::symmetrized(a))?;
    let lam = &eig.values;
    let beta = eig.vectors.tr_mul(&b);
    let top = lam.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 * top.max(1.0);
    let singular = lam.iter().any(|&l| l <= floor);
    let in_range = (0..d).all(|j| lam[j] > floor || beta[j].abs() <= 1e-12 * b.norm().max(1.0));
    let w0 = solve_shifted(&eig.vectors, lam, &beta, 0.0, floor);
    if w0.norm() <= radius && in_range {
        if singular && ridge == 0.0 {
            // The minimizers form an affine set meeting the ball's interior.
            return Err(Error::RegularizationRequired);
        }
        return Ok(w0);
    }
    let norm_at = |nu: f64| -> f64 {
        (0..d)
            .map(|j| {
                let den = lam[j] + nu;
                if den > 0.0 {
                    (beta[j] / den).powi(2)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let (mut lo, mut hi) = (0.0, b.norm() / radius);
    while norm_at(hi) > radius {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(solve_shifted(&eig.vectors, lam, &beta, hi, 0.0))
}

fn solve_shifted(v: &DMatrix<f64>, lam: &DVector<f64>, beta: &DVector<f64>, nu: f64, floor: f64) -> DVector<f64> {
    let coef = DVector::from_iterator(
        lam.len(),
        (0..lam.len()).map(|j| {
            let den = lam[j] + nu;
            if den > floor {
                beta[j] / den
            } else {
                0.0
            }
        }),
    );
    v * coef
}

/// Accelerated projected gradient with adaptive restart for the weighted
/// logistic objective.
fn logistic_in_ball(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &DVector<f64>,
    ridge: f64,
    radius: f64,
    init: Option<&DVector<f64>>,
    opts: &ErmOptions,
) -> Result<DVector<f64>> {
    let d = x.ncols();
    let center = DVector::zeros(d);
    let lipschitz = 0.25
        * (0..x.nrows())
            .map(|i| q[i] * x.row(i).norm_squared())
            .sum::<f64>()
        + 2.0 * ridge;
    let mut w = match init {
        Some(w0) if w0.len() == d => project_ball(w0, &center, radius),
        _ => DVector::zeros(d),
    };
    if lipschitz == 0.0 {
        return Ok(w);
    }
    let eval = |w: &DVector<f64>| -> (f64, DVector<f64>) {
        let m = x * w;
        let mut f = ridge * w.norm_squared();
        let mut r = DVector::zeros(m.len());
        for i in 0..m.len() {
            let z = y[i] * m[i];
            f += q[i] * softplus(-z);
            r[i] = -q[i] * y[i] * sigmoid(-z);
        }
        (f, x.tr_mul(&r) + w * (2.0 * ridge))
    };
    let step = 1.0 / lipschitz;
    let mut v = w.clone();
    let mut t = 1.0_f64;
    let (mut fw, _) = eval(&w);
    for _ in 0..opts.max_iters {
        let (_, gv) = eval(&v);
        let next = project_ball(&(&v - &gv * step), &center, radius);
        let mapping = (&v - &next).norm() * lipschitz;
        let (fnext, _) = eval(&next);
        if !fnext.is_finite() {
            return Err(Error::Divergence {
                iteration: 0,
                reason: "non-finite logistic objective".into(),
            });
        }
        if fnext > fw {
            // Momentum overshot: restart from the last accepted point.
            v = w.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        v = &next + (&next - &w) * momentum;
        w = next;
        fw = fnext;
        t = t_next;
        if mapping <= opts.tol {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Domain;

    #[test]
    fn scalar_normal_equation() {
        let data = LabeledDataset::from_rows(&[vec![1.0]], &[1.0], Domain::Target).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 10.0).unwrap();
        let h = weighted_erm(&data, &DVector::from_vec(vec![1.0]), &space, 1.0, &Default::default()).unwrap();
        assert!((h.weights()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn concentrated_weight_fits_point() {
        let data =
            LabeledDataset::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]], &[2.0, 5.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 100.0).unwrap();
        let q = DVector::from_vec(vec![1.0, 0.0]);
        let h = weighted_erm(&data, &q, &space, 1e-10, &Default::default()).unwrap();
        let r = h.predict(&[1.0, 2.0]) - 2.0;
        assert!(r.abs() < 1e-6);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let data = LabeledDataset::from_rows(&[vec![1.0], vec![2.0]], &[1.0, 3.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 10.0).unwrap();
        let h = weighted_erm(&data, &DVector::from_vec(vec![0.5, 0.5]), &space, 1e12, &Default::default()).unwrap();
        assert!(h.weights().norm() < 1e-9);
    }

    #[test]
    fn singular_without_ridge() {
        let data = LabeledDataset::from_rows(&[vec![1.0, 1.0]], &[1.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 10.0).unwrap();
        let q = DVector::from_vec(vec![1.0]);
        let r = weighted_erm(&data, &q, &space, 0.0, &Default::default());
        assert!(matches!(r, Err(Error::RegularizationRequired)));
        // A binding ball makes the solution unique again.
        let data = LabeledDataset::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[1.0, 2.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 0.1).unwrap();
        let h = weighted_erm(&data, &DVector::from_vec(vec![0.5, 0.5]), &space, 0.0, &Default::default()).unwrap();
        assert!((h.weights()[0] - 0.1).abs() < 1e-9);
        assert!(h.weights()[1].abs() < 1e-12);
    }

    #[test]
    fn binding_ball_matches_kkt() {
        let data = LabeledDataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[4.0, 1.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Squared, 1.0).unwrap();
        let q = DVector::from_vec(vec![0.5, 0.5]);
        let h = weighted_erm(&data, &q, &space, 0.0, &Default::default()).unwrap();
        let w = h.weights();
        assert!((w.norm() - 1.0).abs() < 1e-9);
        // The constrained optimum is parallel to b = (2, 0.5) since A = I/2.
        assert!((w[0] / w[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn logistic_separable_points_hit_the_ball() {
        let data = LabeledDataset::from_rows(&[vec![1.0], vec![-1.0]], &[1.0, -1.0], Domain::Source).unwrap();
        let space = HypothesisSpace::new(LossKind::Logistic, 2.0).unwrap();
        let h = weighted_erm(&data, &DVector::from_vec(vec![0.5, 0.5]), &space, 0.0, &Default::default()).unwrap();
        assert!((h.weights()[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_ridge_stationarity() {
        // Overlapping classes: the unconstrained optimum is interior.
        let data = LabeledDataset::from_rows(
            &[vec![1.0], vec![-1.0], vec![0.5], vec![-0.3]],
            &[1.0, -1.0, -1.0, 1.0],
            Domain::Source,
        )
        .unwrap();
        let space = HypothesisSpace::new(LossKind::Logistic, 50.0).unwrap();
        let q = DVector::from_element(4, 0.25);
        let h = weighted_erm(&data, &q, &space, 0.1, &ErmOptions { tol: 1e-10, max_iters: 100_000 }).unwrap();
        let w = h.weights()[0];
        let g: f64 = [(1.0, 1.0), (-1.0, -1.0), (0.5, -1.0), (-0.3, 1.0)]
            .iter()
            .map(|&(x, y)| -0.25 * y * x * sigmoid(-y * w * x))
            .sum::<f64>()
            + 0.2 * w;
        assert!(g.abs() < 1e-8);
    }
}
