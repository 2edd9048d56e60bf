mod common;

use std::collections::BTreeSet;

use qweight::algorithms::{alpha_weights_for, weighted_erm, ErmOptions};
use qweight::harness::*;
use qweight::{evaluate_metrics, HypothesisSpace, LossKind};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn cross_validation_picks_the_exhaustive_best() {
    let cfg = config(
        r#"{"task": {"kind": "best-effort", "base": {"d": 5, "m": 60, "n": 40, "test": 50, "eta": 0.3},
                     "n_values": [40]},
            "algorithms": [{"algo": "alpha", "grid": {"alpha": [0.0, 0.4, 1.0]}}],
            "seeds": [0, 1, 2, 3, 4]}"#,
    );
    let res = run_experiment(&cfg).unwrap();
    let space = HypothesisSpace::new(LossKind::Logistic, cfg.radius()).unwrap();
    for cell in &res.cells {
        let prepared = prepare_task(&cfg.task, &cell.setting, cell.seed, cfg.validation_fraction).unwrap();
        let scores: Vec<f64> = [0.0, 0.4, 1.0]
            .iter()
            .map(|&a| {
                let q = alpha_weights_for(prepared.train.domains(), a).unwrap();
                let h = weighted_erm(&prepared.train, q.values(), &space, 1e-3, &ErmOptions::default()).unwrap();
                evaluate_metrics(&h, &prepared.validation).unwrap().accuracy
            })
            .collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(cell.validation_score, Some(best), "seed {}: {scores:?}", cell.seed);
        let chosen = cell.params.unwrap().alpha.unwrap();
        let idx = [0.0, 0.4, 1.0].iter().position(|&a| a == chosen).unwrap();
        assert_eq!(scores[idx], best);
    }
}

#[test]
fn singleton_grid_and_reruns_select_the_same_point() {
    let points = [7.0];
    let out = cross_validate(&points, |p| Ok((*p, 0.0, *p))).unwrap();
    assert_eq!(out.best.index, 0);
    let ties = [1.0, 2.0, 2.0];
    let dist = [0.0, 0.5, 0.2];
    let pick = || cross_validate(&[0usize, 1, 2], |&i| Ok((ties[i], dist[i], i))).unwrap().best.index;
    assert_eq!(pick(), 2);
    assert_eq!(pick(), pick());
    assert!(cross_validate::<f64, f64, _>(&[], |p| Ok((*p, 0.0, *p))).is_err());
}

#[test]
fn target_only_and_pooled_agree_without_noise() {
    let cfg = config(
        r#"{"task": {"kind": "best-effort", "base": {"eta": 0.0}, "n_values": [1000]},
            "algorithms": [{"algo": "target-only"}, {"algo": "pooled"}],
            "seeds": [0,1,2,3,4,5,6,7,8,9]}"#,
    );
    let res = run_experiment(&cfg).unwrap();
    let mean = |name: &str| {
        let v: Vec<f64> =
            res.cells.iter().filter(|c| c.algorithm == name).map(|c| c.metrics.unwrap().accuracy).collect();
        common::mean(&v)
    };
    let (a, b) = (mean("target-only"), mean("pooled"));
    assert!((a - b).abs() <= 0.02, "{a} vs {b}");
}

#[test]
fn emitted_files_are_consistent() {
    let cfg = config(
        r#"{"task": {"kind": "best-effort", "base": {"d": 4, "m": 40, "test": 30},
                     "n_values": [20, 30], "eta_values": [0.1]},
            "algorithms": [{"algo": "target-only"}, {"algo": "alpha", "grid": {"alpha": [0, 0.5]}},
                           {"algo": "source-only"}],
            "seeds": [3, 4, 5]}"#,
    );
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = emit_results(&res, dir.path()).unwrap();

    let rows = read_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 3);
    let keys: BTreeSet<(String, usize, u64)> = rows.iter().map(|r| (r.algorithm.clone(), r.n, r.seed)).collect();
    assert_eq!(keys.len(), rows.len());

    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let parsed: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, summary);
    for g in &parsed.groups {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.algorithm == g.algorithm && r.n == g.setting.n && r.status == "ok")
            .map(|r| r.accuracy.unwrap())
            .collect();
        let m = g.metric.as_ref().unwrap();
        let mean = common::mean(&vals);
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((m.mean - mean).abs() <= 1e-12);
        assert!((m.std - var.sqrt()).abs() <= 1e-12);
        assert!(m.min <= m.mean && m.mean <= m.max);
    }

    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count() - 1, 3 * 2);
}

#[test]
fn empty_results_give_a_header_only_csv() {
    let cfg = config(r#"{"task": {"kind": "best-effort"}, "algorithms": [{"algo": "target-only"}]}"#);
    let res = ExperimentResults {
        config: cfg,
        task: qweight::Task::Classification,
        cells: Vec::new(),
    };
    let mut buf = Vec::new();
    write_results_csv(&res, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("algorithm,algo,n,"));
}

#[test]
fn validation_rows_are_not_test_rows() {
    let spec = config(r#"{"task": {"kind": "best-effort", "n_values": [50]}, "algorithms": [{"algo": "pooled"}]}"#).task;
    let setting = spec.settings()[0];
    let p = prepare_task(&spec, &setting, 9, 0.1).unwrap();
    let rows = |d: &qweight::LabeledDataset| -> BTreeSet<Vec<u64>> {
        (0..d.len()).map(|i| d.features().row(i).iter().map(|v| v.to_bits()).collect()).collect()
    };
    let val = rows(&p.validation);
    assert_eq!(val.len(), 5);
    assert!(val.is_disjoint(&rows(&p.test)));
    assert!(val.is_disjoint(&rows(&p.train)));
    assert_eq!(p.train.len(), 1000 + 45);
}

#[test]
fn sweep_shape_is_one_row_per_cell() {
    let cfg = config(
        r#"{"task": {"kind": "best-effort", "base": {"d": 3, "m": 30, "test": 20},
                     "n_values": [20, 50, 100, 200, 500], "eta_values": [0.1]},
            "algorithms": [{"algo": "target-only"}, {"algo": "pooled"}],
            "seeds": [0, 1]}"#,
    );
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.cells.len(), 5 * 2 * 2);
    let mut buf = Vec::new();
    write_results_csv(&res, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 20);
}

#[test]
fn bad_configs_are_rejected() {
    for bad in [
        r#"{"task": {"kind": "best-effort"}, "algorithms": []}"#,
        r#"{"task": {"kind": "best-effort"}, "algorithms": [{"algo": "pooled"}], "seeds": []}"#,
        r#"{"task": {"kind": "best-effort"}, "algorithms": [{"algo": "pooled"}], "validation_fraction": 1.0}"#,
        r#"{"task": {"kind": "best-effort"}, "algorithms": [{"algo": "dm"}]}"#,
        r#"{"task": {"kind": "covshift"}, "algorithms": [{"algo": "target-only"}]}"#,
        r#"{"task": {"kind": "best-effort"}, "algorithms": [{"algo": "pooled"}], "typo": 1}"#,
    ] {
        assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
    }
    let toml = "seeds = [1]\n[task]\nkind = \"covshift\"\nepsilon_values = [0.5]\n[[algorithms]]\nalgo = \"dm\"\n";
    assert_eq!(ExperimentConfig::from_toml(toml).unwrap().seeds, vec![1]);
}

// Ten source rows in sixteen dimensions leave the ridge-free squared loss
// without a unique minimizer inside the ball.
#[test]
fn failing_cells_do_not_abort_the_run() {
    let cfg = config(
        r#"{"task": {"kind": "covshift", "base": {"source_size": 10, "target_size": 30, "test_size": 20}},
            "algorithms": [{"algo": "source-only", "grid": {"ridge": [0]}}, {"algo": "dm"}],
            "radius": 1e6,
            "seeds": [0, 1]}"#,
    );
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.cells.len(), 4);
    assert_eq!(res.failures(), 2);
    assert!(res.cells.iter().filter(|c| c.algorithm == "dm").all(|c| c.metrics.is_some()));
    let summary = summarize(&res);
    assert_eq!(summary.failures, 2);
    assert_eq!(summary.failed_cells.len(), 2);
    assert!(summary.failed_cells[0].error.contains("regulariz"), "{}", summary.failed_cells[0].error);
}
