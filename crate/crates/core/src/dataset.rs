//! Labeled samples tagged by domain.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::InvalidParameter(format!("unknown domain '{other}'"))),
        }
    }
}

/// Feature matrix (one row per example), labels and per-example domain tags.
///
/// Rows are kept in the order given; algorithms locate source and target rows
/// through the tags, so mixed orderings are fine.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    domains: Vec<Domain>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, domains: Vec<Domain>) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::Dimension("feature dimension must be at least 1".into()));
        }
        if features.nrows() != labels.len() || labels.len() != domains.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows, {} labels, {} domain tags",
                features.nrows(),
                labels.len(),
                domains.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % features.nrows(), pos / features.nrows());
            return Err(Error::NonFinite(format!("feature at row {r}, column {c}")));
        }
        if let Some(r) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("label at row {r}")));
        }
        Ok(Self { features, labels, domains })
    }

    /// Builds a dataset where every row carries the same domain tag.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64], domain: Domain) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("rows have differing lengths".into()));
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(features, DVector::from_column_slice(labels), vec![domain; rows.len()])
    }

    /// Empty dataset with `d` columns.
    pub fn empty(d: usize) -> Self {
        Self {
            features: DMatrix::zeros(0, d),
            labels: DVector::zeros(0),
            domains: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.features.row(i).into_owned()
    }

    pub fn indices_of(&self, domain: Domain) -> Vec<usize> {
        self.domains
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| (d == domain).then_some(i))
            .collect()
    }

    pub fn count(&self, domain: Domain) -> usize {
        self.domains.iter().filter(|&&d| d == domain).count()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.dim();
        let features = DMatrix::from_fn(indices.len(), d, |i, j| self.features[(indices[i], j)]);
        let labels = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.labels[i]));
        let domains = indices.iter().map(|&i| self.domains[i]).collect();
        Self { features, labels, domains }
    }

    pub fn subset(&self, domain: Domain) -> Self {
        self.select(&self.indices_of(domain))
    }

    /// Same rows with every tag replaced by `domain`.
    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domains.iter_mut().for_each(|d| *d = domain);
        self
    }

    /// Same rows with labels replaced.
    pub fn with_labels(&self, labels: DVector<f64>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.domains.clone())
    }

    /// Appends a constant-1 column so a bias can live inside the weight vector.
    pub fn with_intercept(&self) -> Self {
        let (n, d) = self.features.shape();
        let features = DMatrix::from_fn(n, d + 1, |i, j| if j < d { self.features[(i, j)] } else { 1.0 });
        Self {
            features,
            labels: self.labels.clone(),
            domains: self.domains.clone(),
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot stack {} and {} columns",
                self.dim(),
                other.dim()
            )));
        }
        let (n1, n2, d) = (self.len(), other.len(), self.dim());
        let features = DMatrix::from_fn(n1 + n2, d, |i, j| {
            if i < n1 {
                self.features[(i, j)]
            } else {
                other.features[(i - n1, j)]
            }
        });
        let labels = DVector::from_iterator(n1 + n2, self.labels.iter().chain(other.labels.iter()).copied());
        let domains = self.domains.iter().chain(other.domains.iter()).copied().collect();
        Ok(Self { features, labels, domains })
    }

    /// Largest Euclidean row norm.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.features.row(i).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_lengths() {
        let r = LabeledDataset::new(DMatrix::zeros(3, 2), DVector::zeros(2), vec![Domain::Source; 3]);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_zero_columns_and_non_finite() {
        assert!(LabeledDataset::new(DMatrix::zeros(1, 0), DVector::zeros(1), vec![Domain::Source]).is_err());
        let mut x = DMatrix::zeros(2, 2);
        x[(1, 0)] = f64::NAN;
        let r = LabeledDataset::new(x, DVector::zeros(2), vec![Domain::Source; 2]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn select_concat_and_intercept() {
        let a = LabeledDataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[1.0, -1.0], Domain::Source).unwrap();
        let b = LabeledDataset::from_rows(&[vec![5.0, 6.0]], &[1.0], Domain::Target).unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.len(), 3);
        assert_eq!(ab.indices_of(Domain::Target), vec![2]);
        assert_eq!(ab.subset(Domain::Source), a);
        let s = ab.select(&[2, 0]);
        assert_eq!(s.features()[(0, 1)], 6.0);
        assert_eq!(s.domains(), &[Domain::Target, Domain::Source]);
        let wi = ab.with_intercept();
        assert_eq!(wi.dim(), 3);
        assert_eq!(wi.features()[(1, 2)], 1.0);
    }
}
