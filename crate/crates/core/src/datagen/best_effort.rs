use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::TaskMetadata;
use crate::dataset::{Domain, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Gaussian features labeled by a random hyperplane, with a source sample
/// whose noisy fraction sits at one point u with label +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BestEffortTaskConfig {
    pub d: usize,
    /// Source size m.
    pub m: usize,
    /// Target training size n.
    pub n: usize,
    pub test: usize,
    /// Noise fraction η.
    pub eta: f64,
    /// ‖w_p − w_q‖.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for BestEffortTaskConfig {
    fn default() -> Self {
        Self {
            d: 20,
            m: 1000,
            n: 50,
            test: 2000,
            eta: 0.1,
            epsilon: 0.01,
            seed: 0,
        }
    }
}

impl BestEffortTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {}", self.d)));
        }
        if self.m == 0 || self.n == 0 || self.test == 0 {
            return Err(Error::InvalidParameter("m, n and test must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 2], got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn noisy_count(&self) -> usize {
        ((self.eta * self.m as f64).round() as usize).min(self.m)
    }
}

#[derive(Debug, Clone)]
pub struct BestEffortTask {
    pub source: LabeledDataset,
    pub target: LabeledDataset,
    pub test: LabeledDataset,
    pub metadata: TaskMetadata,
}

impl BestEffortTask {
    /// Source rows not at u.
    pub fn clean_source(&self) -> LabeledDataset {
        let noisy: std::collections::HashSet<usize> = self.metadata.noisy_row_indices.iter().copied().collect();
        let keep: Vec<usize> = (0..self.source.len()).filter(|i| !noisy.contains(i)).collect();
        self.source.select(&keep)
    }
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn gaussian_rows(rng: &mut rng::Prng, rows: usize, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rows, d);
    for i in 0..rows {
        x.set_row(i, &rng::normal_vector(rng, d).transpose());
    }
    x
}

fn labeled(x: DMatrix<f64>, w: &DVector<f64>, domain: Domain) -> Result<LabeledDataset> {
    let y = (&x * w).map(sign);
    let rows = x.nrows();
    LabeledDataset::new(x, y, vec![domain; rows])
}

/// w_q = cos θ w_p + sin θ v with v ⊥ w_p and θ = 2 asin(ε/2), so ‖w_p − w_q‖ = ε.
fn perturbed(w_p: &DVector<f64>, epsilon: f64, rng: &mut rng::Prng) -> DVector<f64> {
    let v = loop {
        let g = rng::normal_vector(rng, w_p.len());
        let g = &g - w_p * w_p.dot(&g);
        let n = g.norm();
        if n > 1e-8 {
            break g / n;
        }
    };
    let theta = 2.0 * (epsilon / 2.0).asin();
    w_p * theta.cos() + v * theta.sin()
}

/// Streams: 0 hyperplanes, 1 noise anchor, 2 target, 3 source, 4 noisy positions, 5 test.
pub fn gen_best_effort_task(config: &BestEffortTaskConfig) -> Result<BestEffortTask> {
    config.validate()?;
    let d = config.d;
    let mut r = rng::stream(config.seed, 0);
    let w_p = rng::on_sphere(&mut r, d, 1.0);
    let w_q = perturbed(&w_p, config.epsilon, &mut r);

    let mut u = rng::on_sphere(&mut rng::stream(config.seed, 1), d, (d as f64).sqrt());
    if w_p.dot(&u) > 0.0 {
        u = -u;
    }

    let target = labeled(gaussian_rows(&mut rng::stream(config.seed, 2), config.n, d), &w_p, Domain::Target)?;
    let test = labeled(gaussian_rows(&mut rng::stream(config.seed, 5), config.test, d), &w_p, Domain::Target)?;

    let k = config.noisy_count();
    let mut noisy: Vec<usize> = index::sample(&mut rng::stream(config.seed, 4), config.m, k).into_vec();
    noisy.sort_unstable();
    let mut x = gaussian_rows(&mut rng::stream(config.seed, 3), config.m, d);
    let mut y = (&x * &w_q).map(sign);
    for &i in &noisy {
        x.set_row(i, &u.transpose());
        y[i] = 1.0;
    }
    let source = LabeledDataset::new(x, y, vec![Domain::Source; config.m])?;

    Ok(BestEffortTask {
        source,
        target,
        test,
        metadata: TaskMetadata {
            w_p: w_p.iter().copied().collect(),
            w_q: w_q.iter().copied().collect(),
            u: u.iter().copied().collect(),
            noisy_row_indices: noisy,
            seed: config.seed,
            config: serde_json::to_value(config)?,
        },
    })
}
