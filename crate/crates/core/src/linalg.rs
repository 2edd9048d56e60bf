//! Dense symmetric matrices: Jacobi eigendecomposition and the matrix exponential.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-9;
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// A square matrix checked to be symmetric with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry, then stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let k = m.nrows();
        for i in 0..k {
            for j in (i + 1)..k {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                let gap = (a - b).abs();
                if gap > SYM_TOL * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Wraps a matrix known to be symmetric up to rounding.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn zeros(k: usize) -> Self {
        SymMatrix(DMatrix::zeros(k, k))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// xᵀ M x
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }
}

/// Eigenvalues sorted in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    pub fn top_vector(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    /// V diag(f(λ)) Vᵀ
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let k = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..k {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps until the off-diagonal Frobenius norm falls below 1e-12 times the
/// matrix norm, or 100 sweeps have run.
pub fn sym_eigendecomposition(m: &SymMatrix) -> Result<SymEigen> {
    let k = m.dim();
    let mut a = m.0.clone();
    let mut v = DMatrix::<f64>::identity(k, k);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAG_TOL * scale {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition".into()));
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(k, order.iter().map(|&i| a[(i, i)]));
    let vectors = DMatrix::from_fn(k, k, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

// Applies the rotation Jᵀ A J zeroing A[p][q], and accumulates V ← V J.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let k = a.nrows();
    let (app, aqq, apq) = (a[(p, p)], a[(q, q)], a[(p, q)]);
    for r in 0..k {
        if r != p && r != q {
            let arp = a[(r, p)];
            let arq = a[(r, q)];
            let np = c * arp - s * arq;
            let nq = s * arp + c * arq;
            a[(r, p)] = np;
            a[(p, r)] = np;
            a[(r, q)] = nq;
            a[(q, r)] = nq;
        }
    }
    a[(p, p)] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[(q, q)] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..k {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// exp(M) = V exp(Λ) Vᵀ.
pub fn matrix_exp_sym(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigendecomposition(m)?;
    Ok(SymMatrix::symmetrized(eig.reconstruct_with(f64::exp)))
}
