use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Domain, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_REJECTION_DRAWS: usize = 1_000_000;

/// Linear regression labels y = w*·x + N(0, σ²) on Gaussian features. The
/// source over-samples the halfspace {w·x ≥ ε}; the target does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateShiftTaskConfig {
    pub d: usize,
    pub source_size: usize,
    pub target_size: usize,
    pub test_size: usize,
    /// Labeled target-distribution rows reserved for model selection.
    pub validation_size: usize,
    /// Halfspace threshold ε.
    pub epsilon: f64,
    /// Label noise standard deviation σ.
    pub sigma: f64,
    /// Probability that a source row is drawn from {w·x ≥ ε}.
    pub mixture_weight: f64,
    /// ‖w*‖.
    pub w_star_norm: f64,
    pub seed: u64,
}

impl Default for CovariateShiftTaskConfig {
    fn default() -> Self {
        Self {
            d: 16,
            source_size: 500,
            target_size: 300,
            test_size: 1000,
            validation_size: 50,
            epsilon: 0.0,
            sigma: 0.1,
            mixture_weight: 0.99,
            w_star_norm: 1.0,
            seed: 0,
        }
    }
}

impl CovariateShiftTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.source_size == 0 || self.target_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidParameter("d and all sample sizes must be positive".into()));
        }
        if !(self.mixture_weight > 0.0 && self.mixture_weight < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture_weight must lie in (0, 1), got {}",
                self.mixture_weight
            )));
        }
        if !(self.sigma >= 0.0) || !self.epsilon.is_finite() || !(self.w_star_norm >= 0.0) {
            return Err(Error::InvalidParameter("sigma and w_star_norm must be non-negative, epsilon finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CovariateShiftTask {
    /// Labeled source sample.
    pub source: LabeledDataset,
    /// Target sample. Its labels are held out for evaluation only.
    pub target: LabeledDataset,
    pub test: LabeledDataset,
    pub validation: LabeledDataset,
    pub w_star: Vec<f64>,
    /// Normal of the halfspace.
    pub w: Vec<f64>,
}

struct Labeler {
    w_star: DVector<f64>,
    noise: Normal<f64>,
}

impl Labeler {
    fn label(&self, x: &DMatrix<f64>, r: &mut rng::Prng) -> DVector<f64> {
        let mut y = x * &self.w_star;
        if self.noise.std_dev() > 0.0 {
            y.iter_mut().for_each(|v| *v += self.noise.sample(r));
        }
        y
    }
}

fn gaussian(r: &mut rng::Prng, rows: usize, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rows, d);
    for i in 0..rows {
        x.set_row(i, &rng::normal_vector(r, d).transpose());
    }
    x
}

/// Streams: 0 w* and w, 1 source, 2 target, 3 test, 4 source labels,
/// 5 target labels, 6 test labels, 7 validation features, 8 validation labels.
pub fn gen_covariate_shift_task(config: &CovariateShiftTaskConfig) -> Result<CovariateShiftTask> {
    config.validate()?;
    let d = config.d;
    let mut r = rng::stream(config.seed, 0);
    let w_star = rng::on_sphere(&mut r, d, 1.0) * config.w_star_norm;
    let w = rng::on_sphere(&mut r, d, 1.0);
    let labeler = Labeler {
        w_star: w_star.clone(),
        noise: Normal::new(0.0, config.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?,
    };

    let mut rs = rng::stream(config.seed, 1);
    let mut xs = DMatrix::zeros(config.source_size, d);
    let mut draws = 0usize;
    for i in 0..config.source_size {
        let inside = rand::Rng::random::<f64>(&mut rs) < config.mixture_weight;
        loop {
            draws += 1;
            if draws > MAX_REJECTION_DRAWS {
                return Err(Error::Infeasible(format!(
                    "rejection sampling for the halfspace w·x {} {} exceeded {MAX_REJECTION_DRAWS} draws",
                    if inside { "≥" } else { "<" },
                    config.epsilon
                )));
            }
            let x = rng::normal_vector(&mut rs, d);
            if (w.dot(&x) >= config.epsilon) == inside {
                xs.set_row(i, &x.transpose());
                break;
            }
        }
    }
    let xt = gaussian(&mut rng::stream(config.seed, 2), config.target_size, d);
    let xe = gaussian(&mut rng::stream(config.seed, 3), config.test_size, d);

    let ys = labeler.label(&xs, &mut rng::stream(config.seed, 4));
    let yt = labeler.label(&xt, &mut rng::stream(config.seed, 5));
    let ye = labeler.label(&xe, &mut rng::stream(config.seed, 6));
    let xv = gaussian(&mut rng::stream(config.seed, 7), config.validation_size, d);
    let yv = labeler.label(&xv, &mut rng::stream(config.seed, 8));
    Ok(CovariateShiftTask {
        source: LabeledDataset::new(xs, ys, vec![Domain::Source; config.source_size])?,
        target: LabeledDataset::new(xt, yt, vec![Domain::Target; config.target_size])?,
        test: LabeledDataset::new(xe, ye, vec![Domain::Target; config.test_size])?,
        validation: LabeledDataset::new(xv, yv, vec![Domain::Target; config.validation_size])?,
        w_star: w_star.iter().copied().collect(),
        w: w.iter().copied().collect(),
    })
}
