//! Synthetic adaptation tasks and CSV serialization of datasets.

mod best_effort;
mod covshift;
mod csv_io;

pub use best_effort::{gen_best_effort_task, BestEffortTask, BestEffortTaskConfig};
pub use covshift::{gen_covariate_shift_task, CovariateShiftTask, CovariateShiftTaskConfig, MAX_REJECTION_DRAWS};
pub use csv_io::{load_dataset_csv, read_dataset_csv, save_dataset_csv, write_dataset_csv};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Sidecar written next to a generated task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetadata {
    pub w_p: Vec<f64>,
    pub w_q: Vec<f64>,
    pub u: Vec<f64>,
    /// Indices into the source sample.
    pub noisy_row_indices: Vec<usize>,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Writes `source.csv`, `target.csv`, `test.csv` and `metadata.json` into `dir`.
pub fn save_task(
    dir: &Path,
    source: &LabeledDataset,
    target: &LabeledDataset,
    test: &LabeledDataset,
    metadata: &TaskMetadata,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_dataset_csv(source, &dir.join("source.csv"))?;
    save_dataset_csv(target, &dir.join("target.csv"))?;
    save_dataset_csv(test, &dir.join("test.csv"))?;
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(metadata)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_metadata(path: &Path) -> Result<TaskMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
