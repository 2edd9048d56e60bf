use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Setting;
use super::run::{CellResult, CellStatus, ExperimentResults};
use crate::error::{Error, Result};
use crate::metrics::Task;

pub const RESULTS_HEADER: [&str; 18] = [
    "algorithm",
    "algo",
    "n",
    "eta",
    "epsilon",
    "seed",
    "status",
    "accuracy",
    "mse",
    "validation_score",
    "source_mass",
    "noisy_mass",
    "q_l2",
    "d_hat",
    "grid_points",
    "grid_failures",
    "params",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn results_row(c: &CellResult) -> Result<Vec<String>> {
    Ok(vec![
        c.algorithm.clone(),
        c.algo.name().to_string(),
        c.setting.n.to_string(),
        opt(c.setting.eta),
        opt(c.setting.epsilon),
        c.seed.to_string(),
        match c.status {
            CellStatus::Ok => "ok".into(),
            CellStatus::Failed => "failed".into(),
        },
        opt(c.metrics.map(|m| m.accuracy)),
        opt(c.metrics.map(|m| m.mse)),
        opt(c.validation_score),
        opt(c.source_mass),
        opt(c.noisy_mass),
        opt(c.q_l2),
        opt(c.d_hat),
        c.grid_points.to_string(),
        c.grid_failures.to_string(),
        match &c.params {
            Some(p) => serde_json::to_string(p)?,
            None => String::new(),
        },
        c.error.clone().unwrap_or_default(),
    ])
}

/// Mean, spread and extremes of one metric over the seeds of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            count: values.len(),
            mean,
            std: var.sqrt(),
            stderr: (var / n).sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub algorithm: String,
    pub setting: Setting,
    pub cells: usize,
    pub failures: usize,
    /// Aggregate of the headline metric over successful cells.
    pub metric: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_mass: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_mass: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub algorithm: String,
    pub setting: Setting,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `accuracy` for classification, `mse` for regression.
    pub metric: String,
    pub cells: usize,
    pub failures: usize,
    pub groups: Vec<GroupSummary>,
    pub failed_cells: Vec<FailureRecord>,
}

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Classification => "accuracy",
        Task::Regression => "mse",
    }
}

/// Groups keyed by (algorithm, setting) in first-appearance order.
pub fn summarize(results: &ExperimentResults) -> Summary {
    let mut keys: Vec<(String, Setting)> = Vec::new();
    for c in &results.cells {
        if !keys.iter().any(|(a, s)| *a == c.algorithm && *s == c.setting) {
            keys.push((c.algorithm.clone(), c.setting));
        }
    }
    let groups = keys
        .into_iter()
        .map(|(algorithm, setting)| {
            let members: Vec<&CellResult> = results
                .cells
                .iter()
                .filter(|c| c.algorithm == algorithm && c.setting == setting)
                .collect();
            let ok: Vec<&&CellResult> = members.iter().filter(|c| c.status == CellStatus::Ok).collect();
            let metric: Vec<f64> = ok.iter().filter_map(|c| c.metrics.map(|m| m.headline(results.task))).collect();
            let noisy: Vec<f64> = ok.iter().filter_map(|c| c.noisy_mass).collect();
            let source: Vec<f64> = ok.iter().filter_map(|c| c.source_mass).collect();
            GroupSummary {
                algorithm,
                setting,
                cells: members.len(),
                failures: members.len() - ok.len(),
                metric: Aggregate::of(&metric),
                noisy_mass: Aggregate::of(&noisy),
                source_mass: Aggregate::of(&source),
            }
        })
        .collect();
    let failed_cells = results
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Failed)
        .map(|c| FailureRecord {
            algorithm: c.algorithm.clone(),
            setting: c.setting,
            seed: c.seed,
            error: c.error.clone().unwrap_or_default(),
        })
        .collect();
    Summary {
        metric: metric_name(results.task).into(),
        cells: results.cells.len(),
        failures: results.failures(),
        groups,
        failed_cells,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_results_csv<W: Write>(results: &ExperimentResults, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let flush = |e: csv::Error| Error::Config(format!("writing results: {e}"));
    w.write_record(RESULTS_HEADER).map_err(flush)?;
    for c in &results.cells {
        w.write_record(results_row(c)?).map_err(flush)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing results: {e}")))
}

/// Writes `results.csv`, `summary.json`, `curves.csv` and `timings.csv`.
///
/// Everything except `timings.csv` is a deterministic function of the config.
pub fn emit_results(results: &ExperimentResults, dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("results.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_results_csv(results, std::io::BufWriter::new(file))?;

    let summary = summarize(results);
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("curves.csv");
    let mut w = csv_writer(&path)?;
    let metric = metric_name(results.task);
    let header = ["algorithm", "n", "eta", "epsilon", "metric", "mean", "std", "stderr", "count", "failures"];
    w.write_record(header).map_err(|e| csv_error(&path, e))?;
    for g in &summary.groups {
        let (mean, std, stderr, count) = match &g.metric {
            Some(a) => (a.mean.to_string(), a.std.to_string(), a.stderr.to_string(), a.count),
            None => (String::new(), String::new(), String::new(), 0),
        };
        w.write_record([
            g.algorithm.clone(),
            g.setting.n.to_string(),
            opt(g.setting.eta),
            opt(g.setting.epsilon),
            metric.to_string(),
            mean,
            std,
            stderr,
            count.to_string(),
            g.failures.to_string(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("timings.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["algorithm", "n", "eta", "epsilon", "seed", "runtime_secs"])
        .map_err(|e| csv_error(&path, e))?;
    for c in &results.cells {
        w.write_record([
            c.algorithm.clone(),
            c.setting.n.to_string(),
            opt(c.setting.eta),
            opt(c.setting.epsilon),
            c.seed.to_string(),
            c.runtime_secs.to_string(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// One parsed line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub algo: String,
    pub n: usize,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub status: String,
    pub accuracy: Option<f64>,
    pub mse: Option<f64>,
    pub validation_score: Option<f64>,
    pub source_mass: Option<f64>,
    pub noisy_mass: Option<f64>,
    pub q_l2: Option<f64>,
    pub d_hat: Option<f64>,
    pub grid_points: usize,
    pub grid_failures: usize,
    pub params: String,
    pub error: String,
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
