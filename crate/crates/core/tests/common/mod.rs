//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qweight::rng::{self, Prng};
use qweight::{Domain, LabeledDataset};
use rand::Rng;

pub fn prng(seed: u64) -> Prng {
    rng::stream(seed, 9_999)
}

pub fn uniform(r: &mut Prng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

pub fn random_symmetric(r: &mut Prng, k: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = uniform(r, -scale, scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn random_rows(r: &mut Prng, rows: usize, d: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, d, |_, _| uniform(r, -scale, scale))
}

pub fn dataset(x: &DMatrix<f64>, y: &[f64], domain: Domain) -> LabeledDataset {
    LabeledDataset::new(x.clone(), DVector::from_column_slice(y), vec![domain; x.nrows()]).unwrap()
}

/// Number of eigenvalues of `m` strictly below `sigma`, by Sylvester's law of
/// inertia applied to the LDLᵀ pivots of m − σI.
pub fn count_below(m: &DMatrix<f64>, sigma: f64) -> usize {
    let k = m.nrows();
    let mut a = m.clone();
    for i in 0..k {
        a[(i, i)] -= sigma;
    }
    let mut negatives = 0;
    for p in 0..k {
        let mut pivot = a[(p, p)];
        if pivot == 0.0 {
            pivot = -1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in p + 1..k {
            let f = a[(i, p)] / pivot;
            for j in p + 1..k {
                a[(i, j)] -= f * a[(p, j)];
            }
        }
    }
    negatives
}

/// Eigenvalues in descending order by inertia bisection.
pub fn bisection_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let bound = m.norm() + 1.0;
    (0..k)
        .map(|idx| {
            // The idx-th largest eigenvalue has exactly k − idx − 1 eigenvalues above it.
            let below = k - idx;
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(m, mid) >= below {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 * bound {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// exp(M) by scaling and squaring around a 50-term Taylor series.
pub fn taylor_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let norm = m.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(s);
    let mut term = DMatrix::<f64>::identity(k, k);
    let mut sum = term.clone();
    for j in 1..=50 {
        term = &term * &a / j as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `count` equally spaced points of [lo, hi], endpoints included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
}

/// Dense polar grid over the disc of radius `r` in two dimensions.
pub fn disc_grid(r: f64, radii: usize, angles: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0, 0.0]];
    for i in 1..=radii {
        let rho = r * i as f64 / radii as f64;
        for j in 0..angles {
            let t = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
            out.push([rho * t.cos(), rho * t.sin()]);
        }
    }
    out
}

pub fn squared(p: f64, y: f64) -> f64 {
    (p - y) * (p - y)
}

/// sup over a grid of w of Σ cᵢ(w·xᵢ − yᵢ)² for two-dimensional rows.
pub fn grid_signed_squared_sup(x: &DMatrix<f64>, y: &[f64], c: &[f64], grid: &[[f64; 2]]) -> f64 {
    grid.iter()
        .map(|w| {
            (0..x.nrows())
                .map(|i| c[i] * squared(w[0] * x[(i, 0)] + w[1] * x[(i, 1)], y[i]))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
