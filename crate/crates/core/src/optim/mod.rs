//! Projections onto feasible sets, projected gradient descent and DCA.

mod dca;
mod pgd;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use dca::{dca_solve, DcaOptions, DcaOutput, DcaProgram};
pub use pgd::{projected_gradient_descent, PgdOptions, PgdOutput};

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    if n == 0 {
        return v.clone();
    }
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Elementwise clamp of `v` into [lo, hi].
pub fn project_box(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<DVector<f64>> {
    if lo.len() != v.len() || hi.len() != v.len() {
        return Err(Error::Dimension(format!(
            "vector of length {} with bounds of length {} and {}",
            v.len(),
            lo.len(),
            hi.len()
        )));
    }
    for i in 0..v.len() {
        if lo[i] > hi[i] {
            return Err(Error::InvalidBounds { index: i, lo: lo[i], hi: hi[i] });
        }
    }
    Ok(DVector::from_iterator(v.len(), (0..v.len()).map(|i| v[i].clamp(lo[i], hi[i]))))
}

/// Clamp every entry into the same interval.
pub fn project_box_uniform(v: &DVector<f64>, lo: f64, hi: f64) -> Result<DVector<f64>> {
    if lo > hi {
        return Err(Error::InvalidBounds { index: 0, lo, hi });
    }
    Ok(v.map(|x| x.clamp(lo, hi)))
}

/// Projection onto the Euclidean ball of `radius` around `center`.
pub fn project_ball(v: &DVector<f64>, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let diff = v - center;
    let n = diff.norm();
    if n <= radius {
        v.clone()
    } else if radius == 0.0 {
        center.clone()
    } else {
        center + diff * (radius / n)
    }
}
