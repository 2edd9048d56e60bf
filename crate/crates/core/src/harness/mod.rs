//! Experiment configuration, cross-validated runs and result files.

mod config;
mod emit;
mod run;

pub use config::{
    validation_count, AlgoKind, AlgorithmSpec, ExperimentConfig, Grid, GridSpec, HyperPoint, Setting, TaskSpec,
};
pub use emit::{
    emit_results, metric_name, read_results_csv, summarize, write_results_csv, Aggregate, FailureRecord, GroupSummary,
    ResultRow, Summary, RESULTS_HEADER,
};
pub use run::{
    cross_validate, fit_point, prepare_task, run_cell, run_experiment, CellResult, CellStatus, CvOutcome,
    ExperimentResults, FitContext, FittedModel, PointScore, PreparedTask,
};
