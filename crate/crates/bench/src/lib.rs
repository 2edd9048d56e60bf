//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use qweight::datagen::{gen_best_effort_task, BestEffortTaskConfig};
use qweight::linalg::SymMatrix;
use qweight::rng::{normal_vector, stream};
use qweight::LabeledDataset;

/// Random symmetric k×k matrix with standard normal entries.
pub fn symmetric(k: usize, seed: u64) -> SymMatrix {
    let mut r = stream(seed, 0);
    let g = DMatrix::from_fn(k, k, |_, _| normal_vector(&mut r, 1)[0]);
    SymMatrix::new((&g + g.transpose()) * 0.5).unwrap()
}

/// Source rows followed by target rows of a best-effort task.
pub fn best_effort_rows(m: usize, n: usize, seed: u64) -> LabeledDataset {
    let t = gen_best_effort_task(&BestEffortTaskConfig {
        m,
        n,
        test: 1,
        seed,
        ..Default::default()
    })
    .unwrap();
    t.source.concat(&t.target).unwrap()
}
