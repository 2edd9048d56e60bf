use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::SbestInit;
use crate::datagen::{BestEffortTaskConfig, CovariateShiftTaskConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoKind {
    SbestAm,
    SbestDc,
    BestDa,
    Dm,
    Alpha,
    TargetOnly,
    SourceOnly,
    Pooled,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 8] = [
        AlgoKind::SbestAm,
        AlgoKind::SbestDc,
        AlgoKind::BestDa,
        AlgoKind::Dm,
        AlgoKind::Alpha,
        AlgoKind::TargetOnly,
        AlgoKind::SourceOnly,
        AlgoKind::Pooled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::SbestAm => "sbest-am",
            AlgoKind::SbestDc => "sbest-dc",
            AlgoKind::BestDa => "best-da",
            AlgoKind::Dm => "dm",
            AlgoKind::Alpha => "alpha",
            AlgoKind::TargetOnly => "target-only",
            AlgoKind::SourceOnly => "source-only",
            AlgoKind::Pooled => "pooled",
        }
    }

    /// Whether the algorithm can run with unlabeled target data.
    pub fn is_unsupervised_target(self) -> bool {
        matches!(self, AlgoKind::BestDa | AlgoKind::Dm | AlgoKind::SourceOnly)
    }

    /// Whether the algorithm needs labeled target rows.
    pub fn needs_target_labels(self) -> bool {
        !self.is_unsupervised_target()
    }

    /// Grid used for every dimension the config leaves unset.
    pub fn default_grid(self) -> Grid {
        let lambda_inf = vec![1e-3, 1e-2, 1e-1];
        let lambda_1: Vec<f64> = (0..=10).map(f64::from).collect();
        let lambda_2 = vec![0.0, 1000.0, 2000.0, 10000.0, 50000.0, 100000.0];
        let step = vec![1e-3, 1e-2, 1e-1];
        let mut g = Grid::default();
        match self {
            AlgoKind::SbestAm | AlgoKind::SbestDc => {
                g.lambda_inf = lambda_inf;
                g.lambda_1 = lambda_1;
                g.lambda_2 = lambda_2;
                g.step = step;
                g.init = vec![SbestInit::Uniform];
            }
            AlgoKind::BestDa => {
                g.lambda_inf = lambda_inf;
                g.lambda_1 = lambda_1;
                g.lambda_2 = lambda_2;
                g.step = step;
            }
            AlgoKind::Dm => {
                g.step = step;
                g.ridge = vec![1e-3];
            }
            AlgoKind::Alpha => {
                g.alpha = (0..=10).map(|k| k as f64 / 10.0).collect();
                g.ridge = vec![1e-3];
            }
            AlgoKind::TargetOnly | AlgoKind::SourceOnly | AlgoKind::Pooled => {
                g.ridge = vec![1e-3];
            }
        }
        g
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Per-dimension overrides; unset dimensions take the algorithm's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lambda_inf: Option<Vec<f64>>,
    pub lambda_1: Option<Vec<f64>>,
    pub lambda_2: Option<Vec<f64>>,
    pub step: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub ridge: Option<Vec<f64>>,
    pub init: Option<Vec<SbestInit>>,
}

/// A resolved grid. An empty dimension does not apply to the algorithm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lambda_inf: Vec<f64>,
    pub lambda_1: Vec<f64>,
    pub lambda_2: Vec<f64>,
    pub step: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ridge: Vec<f64>,
    pub init: Vec<SbestInit>,
}

/// One grid point. Dimensions that do not apply are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<SbestInit>,
}

fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

impl Grid {
    pub fn resolve(algo: AlgoKind, spec: &GridSpec) -> Result<Self> {
        let mut g = algo.default_grid();
        let set = |name: &str, slot: &mut Vec<f64>, v: &Option<Vec<f64>>| -> Result<()> {
            if let Some(v) = v {
                if slot.is_empty() {
                    return Err(Error::Config(format!("grid dimension `{name}` does not apply to {algo}")));
                }
                if v.is_empty() {
                    return Err(Error::Config(format!("grid dimension `{name}` of {algo} is empty")));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    return Err(Error::Config(format!("grid value {bad} for `{name}` must be finite and non-negative")));
                }
                *slot = v.clone();
            }
            Ok(())
        };
        set("lambda_inf", &mut g.lambda_inf, &spec.lambda_inf)?;
        set("lambda_1", &mut g.lambda_1, &spec.lambda_1)?;
        set("lambda_2", &mut g.lambda_2, &spec.lambda_2)?;
        set("step", &mut g.step, &spec.step)?;
        set("alpha", &mut g.alpha, &spec.alpha)?;
        set("ridge", &mut g.ridge, &spec.ridge)?;
        if let Some(a) = g.alpha.iter().find(|a| **a > 1.0) {
            return Err(Error::Config(format!("alpha {a} exceeds 1")));
        }
        if let Some(s) = g.step.iter().find(|s| **s <= 0.0) {
            return Err(Error::Config(format!("step {s} must be positive")));
        }
        if let Some(init) = &spec.init {
            if g.init.is_empty() {
                return Err(Error::Config(format!("grid dimension `init` does not apply to {algo}")));
            }
            if init.is_empty() {
                return Err(Error::Config(format!("grid dimension `init` of {algo} is empty")));
            }
            g.init = init.clone();
        }
        Ok(g)
    }

    /// All points in lexicographic order, the last dimension varying fastest.
    pub fn points(&self) -> Vec<HyperPoint> {
        let mut out = Vec::new();
        for &lambda_inf in &axis(&self.lambda_inf) {
            for &lambda_1 in &axis(&self.lambda_1) {
                for &lambda_2 in &axis(&self.lambda_2) {
                    for &step in &axis(&self.step) {
                        for &init in &axis(&self.init) {
                            for &alpha in &axis(&self.alpha) {
                                for &ridge in &axis(&self.ridge) {
                                    out.push(HyperPoint {
                                        lambda_inf,
                                        lambda_1,
                                        lambda_2,
                                        step,
                                        alpha,
                                        ridge,
                                        init,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub algo: AlgoKind,
    /// Label in the output files; defaults to the algorithm name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// Fixed d̂ for SBEST. When absent it is estimated from the training split.
    #[serde(default)]
    pub d_hat: Option<f64>,
}

impl AlgorithmSpec {
    pub fn new(algo: AlgoKind) -> Self {
        Self {
            algo,
            name: None,
            grid: GridSpec::default(),
            max_iters: None,
            d_hat: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.algo.name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Noisy-source classification. Each listed n (and η) is one setting.
    BestEffort {
        #[serde(default)]
        base: BestEffortTaskConfig,
        #[serde(default)]
        n_values: Vec<usize>,
        #[serde(default)]
        eta_values: Vec<f64>,
    },
    /// Covariate-shift regression. Each listed ε is one setting.
    Covshift {
        #[serde(default)]
        base: CovariateShiftTaskConfig,
        #[serde(default)]
        epsilon_values: Vec<f64>,
    },
}

/// One point of the task sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    /// Target sample size.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl TaskSpec {
    pub fn is_domain_adaptation(&self) -> bool {
        matches!(self, TaskSpec::Covshift { .. })
    }

    pub fn settings(&self) -> Vec<Setting> {
        match self {
            TaskSpec::BestEffort { base, n_values, eta_values } => {
                let ns = if n_values.is_empty() { vec![base.n] } else { n_values.clone() };
                let etas = if eta_values.is_empty() { vec![base.eta] } else { eta_values.clone() };
                etas.iter()
                    .flat_map(|&eta| ns.iter().map(move |&n| Setting { n, eta: Some(eta), epsilon: None }))
                    .collect()
            }
            TaskSpec::Covshift { base, epsilon_values } => {
                let eps = if epsilon_values.is_empty() { vec![base.epsilon] } else { epsilon_values.clone() };
                eps.iter()
                    .map(|&e| Setting {
                        n: base.target_size,
                        eta: None,
                        epsilon: Some(e),
                    })
                    .collect()
            }
        }
    }

    fn default_radius(&self) -> f64 {
        match self {
            TaskSpec::BestEffort { .. } => 10.0,
            TaskSpec::Covshift { .. } => 2.0,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_validation_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Share of the labeled target sample held out for model selection in
    /// best-effort tasks. Domain-adaptation tasks use the generator's
    /// labeled validation sample instead.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Norm bound Λ of the hypothesis set.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Wall-clock limit for one grid-point fit.
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
    /// Worker threads; the rayon default when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg = if is_toml {
            Self::from_toml(&text)?
        } else {
            Self::from_json(&text)?
        };
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or_else(|| self.task.default_radius())
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms listed".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds listed".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.radius() > 0.0) || !self.radius().is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius())));
        }
        if let Some(b) = self.time_budget_secs {
            if !(b > 0.0) {
                return Err(Error::Config(format!("time_budget_secs must be positive, got {b}")));
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for a in &self.algorithms {
            if !labels.insert(a.label()) {
                return Err(Error::Config(format!("duplicate algorithm label `{}`", a.label())));
            }
            Grid::resolve(a.algo, &a.grid)?;
            let da = self.task.is_domain_adaptation();
            if da && a.algo.needs_target_labels() {
                return Err(Error::Config(format!("{} needs labeled target rows, which covshift tasks withhold", a.algo)));
            }
            if !da && matches!(a.algo, AlgoKind::BestDa | AlgoKind::Dm) {
                return Err(Error::Config(format!("{} needs squared loss and runs on covshift tasks only", a.algo)));
            }
            if let Some(d) = a.d_hat {
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::Config(format!("d_hat must be finite and non-negative, got {d}")));
                }
            }
        }
        match &self.task {
            TaskSpec::BestEffort { base, n_values, eta_values } => {
                for &n in n_values.iter().chain(std::iter::once(&base.n)) {
                    let c = BestEffortTaskConfig { n, ..base.clone() };
                    c.validate().map_err(|e| Error::Config(e.to_string()))?;
                    let val = validation_count(n, self.validation_fraction);
                    if val == 0 || val >= n {
                        return Err(Error::Config(format!("n = {n} is too small to split off a validation set")));
                    }
                }
                for &eta in eta_values {
                    let c = BestEffortTaskConfig { eta, ..base.clone() };
                    c.validate().map_err(|e| Error::Config(e.to_string()))?;
                }
            }
            TaskSpec::Covshift { base, .. } => {
                base.validate().map_err(|e| Error::Config(e.to_string()))?;
                if base.validation_size == 0 {
                    return Err(Error::Config("covshift validation_size must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Validation rows held out of n labeled target rows.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}
