//! Per-example weight vectors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::Domain;
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    /// Every entry in [0, 1].
    Box01,
    /// Non-negative entries summing to one.
    #[default]
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightVectorRepr", into = "WeightVectorRepr")]
pub struct WeightVector {
    values: DVector<f64>,
    constraint: Constraint,
}

#[derive(Serialize, Deserialize)]
struct WeightVectorRepr {
    values: Vec<f64>,
    constraint: Constraint,
}

impl TryFrom<WeightVectorRepr> for WeightVector {
    type Error = Error;

    fn try_from(r: WeightVectorRepr) -> Result<Self> {
        WeightVector::new(DVector::from_vec(r.values), r.constraint)
    }
}

impl From<WeightVector> for WeightVectorRepr {
    fn from(w: WeightVector) -> Self {
        WeightVectorRepr {
            values: w.values.iter().copied().collect(),
            constraint: w.constraint,
        }
    }
}

impl WeightVector {
    pub fn new(values: DVector<f64>, constraint: Constraint) -> Result<Self> {
        validate(&values, constraint)?;
        Ok(Self { values, constraint })
    }

    pub fn box01(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values), Constraint::Box01)
    }

    pub fn simplex(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values), Constraint::Simplex)
    }

    /// Wraps an output of a projection; tiny violations from rounding are clipped.
    pub(crate) fn from_projected(mut values: DVector<f64>, constraint: Constraint) -> Self {
        values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Self { values, constraint }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: DVector::zeros(len),
            constraint: Constraint::Box01,
        }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            values: DVector::from_element(len, 1.0 / len.max(1) as f64),
            constraint: Constraint::Simplex,
        }
    }

    /// Uniform distribution over the rows tagged `domain`, zero elsewhere.
    pub fn uniform_on(domains: &[Domain], domain: Domain) -> Result<Self> {
        let count = domains.iter().filter(|&&d| d == domain).count();
        if count == 0 {
            return Err(Error::EmptyData(format!("no {} rows", domain.as_str())));
        }
        let w = 1.0 / count as f64;
        let values = DVector::from_iterator(domains.len(), domains.iter().map(|&d| if d == domain { w } else { 0.0 }));
        Ok(Self {
            values,
            constraint: Constraint::Simplex,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.values.norm()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Total weight on the rows tagged `Source` (q̄).
    pub fn source_mass(&self, domains: &[Domain]) -> f64 {
        self.mass_on(domains, Domain::Source)
    }

    pub fn mass_on(&self, domains: &[Domain], domain: Domain) -> f64 {
        self.values
            .iter()
            .zip(domains)
            .filter(|(_, &d)| d == domain)
            .map(|(v, _)| v)
            .sum()
    }

    /// Sum of weights at `indices`.
    pub fn mass_at(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.values[i]).sum()
    }

    pub fn l1_distance(&self, other: &WeightVector) -> f64 {
        (&self.values - &other.values).abs().sum()
    }
}

fn validate(values: &DVector<f64>, constraint: Constraint) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("weight at index {i}")));
    }
    match constraint {
        Constraint::Box01 => {
            if let Some(i) = values.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "weight {} at index {i} outside [0, 1]",
                    values[i]
                )));
            }
        }
        Constraint::Simplex => {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidParameter(format!("negative weight {} at index {i}", values[i])));
            }
            let s: f64 = values.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidParameter(format!("simplex weights sum to {s}")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_checks() {
        assert!(WeightVector::box01(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(WeightVector::box01(vec![1.1]).is_err());
        assert!(WeightVector::simplex(vec![0.25, 0.75]).is_ok());
        assert!(WeightVector::simplex(vec![0.25, 0.7]).is_err());
        assert!(WeightVector::simplex(vec![-0.25, 1.25]).is_err());
    }

    #[test]
    fn norms_and_masses() {
        let q = WeightVector::simplex(vec![0.5, 0.25, 0.25]).unwrap();
        let doms = [Domain::Source, Domain::Target, Domain::Source];
        assert_eq!(q.l1(), 1.0);
        assert_eq!(q.linf(), 0.5);
        assert!((q.l2() - (0.375f64).sqrt()).abs() < 1e-15);
        assert_eq!(q.source_mass(&doms), 0.75);
        let p0 = WeightVector::uniform_on(&doms, Domain::Target).unwrap();
        assert_eq!(p0.values().as_slice(), &[0.0, 1.0, 0.0]);
        assert!((q.l1_distance(&p0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip_validates() {
        let q = WeightVector::simplex(vec![0.5, 0.5]).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        let back: WeightVector = serde_json::from_str(&s).unwrap();
        assert_eq!(q, back);
        let bad = r#"{"values":[0.5,0.6],"constraint":"simplex"}"#;
        assert!(serde_json::from_str::<WeightVector>(bad).is_err());
    }
}
