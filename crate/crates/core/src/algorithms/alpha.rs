//! α-reweighting: one weight level on the source rows, another on the target rows.

use nalgebra::DVector;

use super::erm::{weighted_erm, ErmOptions};
use crate::dataset::{Domain, LabeledDataset};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::metrics::{evaluate_metrics, Task};
use crate::weights::WeightVector;

/// qᵢ = α/(m+n) on the m source rows (listed first) and
/// (m(1−α) + n)/((m+n)n) on the n target rows.
pub fn alpha_weights(m: usize, n: usize, alpha: f64) -> Result<WeightVector> {
    let domains: Vec<Domain> = std::iter::repeat_n(Domain::Source, m)
        .chain(std::iter::repeat_n(Domain::Target, n))
        .collect();
    alpha_weights_for(&domains, alpha)
}

/// [`alpha_weights`] laid out along an arbitrary row order.
pub fn alpha_weights_for(domains: &[Domain], alpha: f64) -> Result<WeightVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let m = domains.iter().filter(|&&d| d == Domain::Source).count();
    let n = domains.len() - m;
    if m == 0 || n == 0 {
        return Err(Error::EmptyData(format!("alpha weights need both domains, got m = {m}, n = {n}")));
    }
    let total = (m + n) as f64;
    let src = alpha / total;
    let tgt = (m as f64 * (1.0 - alpha) + n as f64) / (total * n as f64);
    let values = DVector::from_iterator(
        domains.len(),
        domains.iter().map(|&d| if d == Domain::Source { src } else { tgt }),
    );
    WeightVector::new(values, crate::weights::Constraint::Simplex)
}

/// Fits every α in `grid` and keeps the one scoring best on `validation`.
/// Ties go to the larger α.
pub fn alpha_reweighting_train(
    data: &LabeledDataset,
    grid: &[f64],
    validation: &LabeledDataset,
    space: &HypothesisSpace,
    ridge: f64,
    task: Task,
    erm: &ErmOptions,
) -> Result<(f64, LinearHypothesis)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("alpha grid is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::EmptyData("alpha selection needs a validation set".into()));
    }
    let mut best: Option<(f64, f64, LinearHypothesis)> = None;
    for &alpha in grid {
        let q = alpha_weights_for(data.domains(), alpha)?;
        let h = weighted_erm(data, q.values(), space, ridge, erm)?;
        let score = evaluate_metrics(&h, validation)?.score(task);
        let better = match &best {
            None => true,
            Some((s, a, _)) => score > *s || (score == *s && alpha > *a),
        };
        if better {
            best = Some((score, alpha, h));
        }
    }
    let (_, alpha, h) = best.expect("grid is non-empty");
    Ok((alpha, h))
}
