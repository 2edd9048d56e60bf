use std::time::Instant;

use nalgebra::DVector;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{validation_count, AlgoKind, AlgorithmSpec, ExperimentConfig, Grid, HyperPoint, Setting, TaskSpec};
use crate::algorithms::{
    alpha_weights_for, baseline_train, bestda_am, dm_baseline, sbest_am, sbest_dc, weighted_erm, Baseline,
    BestDaHyperparams, DmParams, ErmOptions, SbestHyperparams,
};
use crate::datagen::{gen_best_effort_task, gen_covariate_shift_task, BestEffortTaskConfig, CovariateShiftTaskConfig};
use crate::dataset::{Domain, LabeledDataset};
use crate::discrepancy::{empirical_unlabeled_discrepancy, estimate_labeled_discrepancy, AscentOptions};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSpace, LinearHypothesis};
use crate::loss::LossKind;
use crate::metrics::{evaluate_metrics, Metrics, Task};
use crate::optim::PgdOptions;
use crate::rng;

/// Stream of the experiment seed used for the validation split. The task
/// generators use streams below 16.
const SPLIT_STREAM: u64 = 16;

/// Data of one (setting, seed) pair after the validation split.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub setting: Setting,
    pub seed: u64,
    pub task: Task,
    /// Rows the learners see: source then labeled target for best-effort,
    /// source only for domain adaptation.
    pub train: LabeledDataset,
    /// Unlabeled target sample of a domain-adaptation task.
    pub target_unlabeled: Option<LabeledDataset>,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
    /// Noisy source rows, as indices into `train`.
    pub noisy_rows: Vec<usize>,
}

pub fn prepare_task(spec: &TaskSpec, setting: &Setting, seed: u64, validation_fraction: f64) -> Result<PreparedTask> {
    match spec {
        TaskSpec::BestEffort { base, .. } => {
            let cfg = BestEffortTaskConfig {
                n: setting.n,
                eta: setting.eta.unwrap_or(base.eta),
                seed,
                ..base.clone()
            };
            let t = gen_best_effort_task(&cfg)?;
            let n = t.target.len();
            let k = validation_count(n, validation_fraction);
            if k == 0 || k >= n {
                return Err(Error::Config(format!("n = {n} is too small to split off a validation set")));
            }
            let mut val: Vec<usize> = index::sample(&mut rng::stream(seed, SPLIT_STREAM), n, k).into_vec();
            val.sort_unstable();
            let keep: Vec<usize> = (0..n).filter(|i| val.binary_search(i).is_err()).collect();
            Ok(PreparedTask {
                setting: *setting,
                seed,
                task: Task::Classification,
                train: t.source.concat(&t.target.select(&keep))?,
                target_unlabeled: None,
                validation: t.target.select(&val),
                test: t.test,
                noisy_rows: t.metadata.noisy_row_indices,
            })
        }
        TaskSpec::Covshift { base, .. } => {
            let cfg = CovariateShiftTaskConfig {
                epsilon: setting.epsilon.unwrap_or(base.epsilon),
                seed,
                ..base.clone()
            };
            let t = gen_covariate_shift_task(&cfg)?;
            Ok(PreparedTask {
                setting: *setting,
                seed,
                task: Task::Regression,
                train: t.source,
                target_unlabeled: Some(t.target),
                validation: t.validation,
                test: t.test,
                noisy_rows: Vec::new(),
            })
        }
    }
}

/// Shared inputs of every fit in one cell.
#[derive(Debug, Clone)]
pub struct FitContext {
    pub space: HypothesisSpace,
    pub max_iters: Option<usize>,
    pub time_budget_secs: Option<f64>,
    /// d̂ for SBEST.
    pub d_hat: f64,
    /// 𝑑̄ for BEST-DA.
    pub d_bar: f64,
}

/// A model trained at one grid point.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub hypothesis: LinearHypothesis,
    /// ‖q − p⁰‖₁ with p⁰ uniform over the target rows.
    pub reference_distance: f64,
    /// Weight mass on source rows.
    pub source_mass: f64,
    /// Weight mass on noisy source rows, for tasks that have them.
    pub noisy_mass: Option<f64>,
    pub q_l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

// Layout-aware comparison against the uniform-target reference.
fn distance_to_target_uniform(q: &[f64], domains: &[Domain]) -> f64 {
    let n = domains.iter().filter(|&&d| d == Domain::Target).count();
    q.iter()
        .zip(domains)
        .map(|(&v, &d)| match d {
            Domain::Target => (v - 1.0 / n as f64).abs(),
            Domain::Source => v.abs(),
        })
        .sum()
}

fn model_from_weights(
    hypothesis: LinearHypothesis,
    q: &DVector<f64>,
    prepared: &PreparedTask,
    iterations: usize,
    converged: bool,
) -> FittedModel {
    let domains = prepared.train.domains();
    let has_target = domains.contains(&Domain::Target);
    let reference_distance = if has_target {
        distance_to_target_uniform(q.as_slice(), domains)
    } else {
        q.iter().map(|v| v.abs()).sum::<f64>() + 1.0
    };
    let source_mass = q.iter().zip(domains).filter(|(_, &d)| d == Domain::Source).map(|(v, _)| v).sum();
    let noisy_mass = if prepared.noisy_rows.is_empty() {
        None
    } else {
        Some(prepared.noisy_rows.iter().map(|&i| q[i]).sum())
    };
    FittedModel {
        hypothesis,
        reference_distance,
        source_mass,
        noisy_mass,
        q_l2: q.norm(),
        iterations,
        converged,
    }
}

fn step_options(point: &HyperPoint, default_step: f64) -> PgdOptions {
    PgdOptions {
        step: point.step.unwrap_or(default_step),
        ..Default::default()
    }
}

/// Trains one algorithm at one grid point on the training rows.
pub fn fit_point(algo: AlgoKind, point: &HyperPoint, prepared: &PreparedTask, ctx: &FitContext) -> Result<FittedModel> {
    let start = Instant::now();
    let erm = ErmOptions::default();
    let train = &prepared.train;
    let ridge = point.ridge.unwrap_or(1e-3);
    let model = match algo {
        AlgoKind::SbestAm | AlgoKind::SbestDc => {
            let defaults = SbestHyperparams::default();
            let params = SbestHyperparams {
                lambda_inf: point.lambda_inf.unwrap_or(defaults.lambda_inf),
                lambda_1: point.lambda_1.unwrap_or(defaults.lambda_1),
                lambda_2: point.lambda_2.unwrap_or(defaults.lambda_2),
                d_hat: ctx.d_hat,
                q_step: step_options(point, defaults.q_step.step),
                init: point.init.unwrap_or_default(),
                max_iters: ctx.max_iters.unwrap_or(defaults.max_iters),
                time_budget_secs: ctx.time_budget_secs,
                ..defaults
            };
            let fit = if algo == AlgoKind::SbestAm {
                sbest_am(train, &params, &ctx.space)?
            } else {
                sbest_dc(train, &params, &ctx.space)?
            };
            model_from_weights(fit.hypothesis, fit.q.values(), prepared, fit.iterations, fit.converged)
        }
        AlgoKind::BestDa => {
            let target = da_target(prepared)?;
            let defaults = BestDaHyperparams::default();
            let params = BestDaHyperparams {
                lambda_inf: point.lambda_inf.unwrap_or(defaults.lambda_inf),
                lambda_1: point.lambda_1.unwrap_or(defaults.lambda_1),
                lambda_2: point.lambda_2.unwrap_or(defaults.lambda_2),
                d_bar: ctx.d_bar,
                step: PgdOptions {
                    step: point.step.unwrap_or(defaults.step.step),
                    ..defaults.step.clone()
                },
                max_iters: ctx.max_iters.unwrap_or(defaults.max_iters),
                time_budget_secs: ctx.time_budget_secs,
                ..defaults
            };
            let fit = bestda_am(train, target, &params, &ctx.space)?;
            let q_prime = fit.q_prime.clone().unwrap_or_else(|| DVector::zeros(target.len()));
            let n = target.len() as f64;
            let reference_distance =
                fit.q.values().iter().map(|v| v.abs()).sum::<f64>() + q_prime.iter().map(|v| (v - 1.0 / n).abs()).sum::<f64>();
            FittedModel {
                hypothesis: fit.hypothesis,
                reference_distance,
                source_mass: fit.q.l1(),
                noisy_mass: None,
                q_l2: fit.q.values().norm().hypot(q_prime.norm()),
                iterations: fit.iterations,
                converged: fit.converged,
            }
        }
        AlgoKind::Dm => {
            let target = da_target(prepared)?;
            let defaults = DmParams::default();
            let params = DmParams {
                ridge,
                step: PgdOptions {
                    step: point.step.unwrap_or(defaults.step.step),
                    max_iters: ctx.max_iters.unwrap_or(defaults.step.max_iters),
                    ..defaults.step.clone()
                },
                erm: erm.clone(),
            };
            let fit = dm_baseline(train, target, &ctx.space, &params)?;
            let iterations = fit.trace.len().saturating_sub(1);
            model_from_weights(fit.hypothesis, fit.q.values(), prepared, iterations, true)
        }
        AlgoKind::Alpha => {
            let q = alpha_weights_for(train.domains(), point.alpha.unwrap_or(0.0))?;
            let h = weighted_erm(train, q.values(), &ctx.space, ridge, &erm)?;
            model_from_weights(h, q.values(), prepared, 0, true)
        }
        AlgoKind::TargetOnly | AlgoKind::SourceOnly | AlgoKind::Pooled => {
            let which = match algo {
                AlgoKind::TargetOnly => Baseline::TargetOnly,
                AlgoKind::SourceOnly => Baseline::SourceOnly,
                _ => Baseline::PooledUniform,
            };
            let (h, q) = baseline_train(train, which, &ctx.space, ridge, &erm)?;
            model_from_weights(h, q.values(), prepared, 0, true)
        }
    };
    if let Some(budget) = ctx.time_budget_secs {
        if start.elapsed().as_secs_f64() > budget {
            return Err(Error::TimeBudget { budget_secs: budget });
        }
    }
    Ok(model)
}

fn da_target(prepared: &PreparedTask) -> Result<&LabeledDataset> {
    prepared
        .target_unlabeled
        .as_ref()
        .ok_or_else(|| Error::Config("this algorithm needs an unlabeled target sample".into()))
}

/// Score of one grid point, oriented so that larger is better.
#[derive(Debug, Clone)]
pub struct PointScore<T> {
    pub index: usize,
    pub score: f64,
    pub reference_distance: f64,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct CvOutcome<T> {
    pub best: PointScore<T>,
    pub evaluated: usize,
    /// Error messages of grid points that failed, by grid index.
    pub failures: Vec<(usize, String)>,
}

/// Exhaustive grid search. Each point is evaluated independently; the best
/// score wins, ties go to the smaller ‖q − p⁰‖₁ and then to the earlier point.
/// Failing points are recorded and skipped.
pub fn cross_validate<P, T, F>(points: &[P], eval: F) -> Result<CvOutcome<T>>
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> Result<(f64, f64, T)> + Sync,
{
    if points.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let results: Vec<Result<(f64, f64, T)>> = points.par_iter().map(&eval).collect();
    let mut best: Option<PointScore<T>> = None;
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok((score, reference_distance, value)) if score.is_finite() => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        score > b.score + 1e-12
                            || ((score - b.score).abs() <= 1e-12 && reference_distance < b.reference_distance - 1e-12)
                    }
                };
                if better {
                    best = Some(PointScore {
                        index,
                        score,
                        reference_distance,
                        value,
                    });
                }
            }
            Ok((score, _, _)) => failures.push((index, format!("non-finite validation score {score}"))),
            Err(e) => failures.push((index, e.to_string())),
        }
    }
    match best {
        Some(best) => Ok(CvOutcome {
            best,
            evaluated: points.len(),
            failures,
        }),
        None => Err(Error::Config(format!(
            "every grid point failed; first error: {}",
            failures.first().map(|f| f.1.as_str()).unwrap_or("none")
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Outcome of one (algorithm, setting, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub algorithm: String,
    pub algo: AlgoKind,
    pub setting: Setting,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub params: Option<HyperPoint>,
    pub metrics: Option<Metrics>,
    pub validation_score: Option<f64>,
    pub source_mass: Option<f64>,
    pub noisy_mass: Option<f64>,
    pub q_l2: Option<f64>,
    pub d_hat: Option<f64>,
    pub grid_points: usize,
    pub grid_failures: usize,
    pub runtime_secs: f64,
}

impl CellResult {
    fn failed(spec: &AlgorithmSpec, setting: Setting, seed: u64, error: String, grid_points: usize, runtime_secs: f64) -> Self {
        Self {
            algorithm: spec.label(),
            algo: spec.algo,
            setting,
            seed,
            status: CellStatus::Failed,
            error: Some(error),
            params: None,
            metrics: None,
            validation_score: None,
            source_mass: None,
            noisy_mass: None,
            q_l2: None,
            d_hat: None,
            grid_points,
            grid_failures: grid_points,
            runtime_secs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub task: Task,
    /// Sorted by setting, then algorithm order in the config, then seed.
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }
}

fn estimate_d_hat(prepared: &PreparedTask, space: &HypothesisSpace) -> Result<f64> {
    let source = prepared.train.subset(Domain::Source);
    let target = prepared.train.subset(Domain::Target);
    let opts = AscentOptions {
        seed: prepared.seed,
        ..Default::default()
    };
    Ok(estimate_labeled_discrepancy(&target, &source, space, &opts)?.value.max(0.0))
}

/// Cross-validates one algorithm on one prepared task and evaluates the
/// selected model on the test sample.
pub fn run_cell(spec: &AlgorithmSpec, prepared: &PreparedTask, config: &ExperimentConfig) -> CellResult {
    let start = Instant::now();
    let points = match Grid::resolve(spec.algo, &spec.grid) {
        Ok(g) => g.points(),
        Err(e) => return CellResult::failed(spec, prepared.setting, prepared.seed, e.to_string(), 0, 0.0),
    };
    let outcome = (|| -> Result<CellResult> {
        let loss = match prepared.task {
            Task::Classification => LossKind::Logistic,
            Task::Regression => LossKind::Squared,
        };
        let space = HypothesisSpace::new(loss, config.radius())?;
        let is_sbest = matches!(spec.algo, AlgoKind::SbestAm | AlgoKind::SbestDc);
        let d_hat = match (is_sbest, spec.d_hat) {
            (false, _) => None,
            (true, Some(d)) => Some(d),
            (true, None) => Some(estimate_d_hat(prepared, &space)?),
        };
        let d_bar = match (spec.algo, &prepared.target_unlabeled) {
            (AlgoKind::BestDa, Some(t)) => empirical_unlabeled_discrepancy(t, &prepared.train, space.radius)?,
            _ => 0.0,
        };
        let ctx = FitContext {
            space,
            max_iters: spec.max_iters,
            time_budget_secs: config.time_budget_secs,
            d_hat: d_hat.unwrap_or(0.0),
            d_bar,
        };
        let cv = cross_validate(&points, |p| {
            let m = fit_point(spec.algo, p, prepared, &ctx)?;
            let s = evaluate_metrics(&m.hypothesis, &prepared.validation)?.score(prepared.task);
            Ok((s, m.reference_distance, m))
        })?;
        let model = &cv.best.value;
        let metrics = evaluate_metrics(&model.hypothesis, &prepared.test)?;
        Ok(CellResult {
            algorithm: spec.label(),
            algo: spec.algo,
            setting: prepared.setting,
            seed: prepared.seed,
            status: CellStatus::Ok,
            error: None,
            params: Some(points[cv.best.index]),
            metrics: Some(metrics),
            validation_score: Some(cv.best.score),
            source_mass: Some(model.source_mass),
            noisy_mass: model.noisy_mass,
            q_l2: Some(model.q_l2),
            d_hat,
            grid_points: cv.evaluated,
            grid_failures: cv.failures.len(),
            runtime_secs: 0.0,
        })
    })();
    let runtime_secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(mut c) => {
            c.runtime_secs = runtime_secs;
            c
        }
        Err(e) => CellResult::failed(spec, prepared.setting, prepared.seed, e.to_string(), points.len(), runtime_secs),
    }
}

/// Runs every (setting, seed, algorithm) cell. A failing cell is recorded
/// and does not stop the others; only an invalid config is an error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let work = || -> Vec<CellResult> {
        let settings = config.task.settings();
        let pairs: Vec<(Setting, u64)> =
            settings.iter().flat_map(|s| config.seeds.iter().map(move |&seed| (*s, seed))).collect();
        let nested: Vec<Vec<CellResult>> = pairs
            .par_iter()
            .map(|(setting, seed)| match prepare_task(&config.task, setting, *seed, config.validation_fraction) {
                Ok(prepared) => config.algorithms.par_iter().map(|a| run_cell(a, &prepared, config)).collect(),
                Err(e) => config
                    .algorithms
                    .iter()
                    .map(|a| CellResult::failed(a, *setting, *seed, format!("task generation: {e}"), 0, 0.0))
                    .collect(),
            })
            .collect();
        let settings_order = |s: &Setting| settings.iter().position(|x| x == s).unwrap_or(usize::MAX);
        let algo_order = |label: &str| config.algorithms.iter().position(|a| a.label() == label).unwrap_or(usize::MAX);
        let mut cells: Vec<CellResult> = nested.into_iter().flatten().collect();
        cells.sort_by(|a, b| {
            (settings_order(&a.setting), algo_order(&a.algorithm), a.seed).cmp(&(
                settings_order(&b.setting),
                algo_order(&b.algorithm),
                b.seed,
            ))
        });
        cells
    };
    let cells = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(ExperimentResults {
        config: config.clone(),
        task: if config.task.is_domain_adaptation() {
            Task::Regression
        } else {
            Task::Classification
        },
        cells,
    })
}
