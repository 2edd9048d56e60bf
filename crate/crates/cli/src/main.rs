use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use qweight::algorithms::{
    alpha_weights_for, baseline_train, bestda_am, dm_baseline, sbest_am, sbest_dc, weighted_erm, Baseline,
    BestDaHyperparams, DmParams, ErmOptions, FitResult, SbestHyperparams, SbestInit,
};
use qweight::bounds::{
    bound_corollary4, bound_theorem1, bound_theorem3, bound_theorem5_da, rademacher_estimate, BoundReport,
    DaSurrogates, RademacherOptions,
};
use qweight::datagen::{
    gen_best_effort_task, gen_covariate_shift_task, load_dataset_csv, save_dataset_csv, save_task, BestEffortTaskConfig,
    CovariateShiftTaskConfig,
};
use qweight::discrepancy::{
    empirical_unlabeled_discrepancy, estimate_labeled_discrepancy, index_weight_discrepancy, unlabeled_discrepancy,
    AscentOptions,
};
use qweight::harness::{emit_results, run_experiment, AlgoKind, ExperimentConfig};
use qweight::optim::PgdOptions;
use qweight::{Domain, Error, HypothesisSpace, LabeledDataset, LossKind, WeightVector};

#[derive(Parser)]
#[command(name = "qweight", version, about = "Discrepancy-based sample reweighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskKind {
    BestEffort,
    Covshift,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Logistic,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Squared => LossKind::Squared,
            LossArg::Logistic => LossKind::Logistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    SbestAm,
    SbestDc,
    BestDa,
    Dm,
    Alpha,
    TargetOnly,
    SourceOnly,
    Pooled,
}

impl From<AlgoArg> for AlgoKind {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::SbestAm => AlgoKind::SbestAm,
            AlgoArg::SbestDc => AlgoKind::SbestDc,
            AlgoArg::BestDa => AlgoKind::BestDa,
            AlgoArg::Dm => AlgoKind::Dm,
            AlgoArg::Alpha => AlgoKind::Alpha,
            AlgoArg::TargetOnly => AlgoKind::TargetOnly,
            AlgoArg::SourceOnly => AlgoKind::SourceOnly,
            AlgoArg::Pooled => AlgoKind::Pooled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Uniform,
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Theorem1,
    Theorem3,
    Corollary4,
    Theorem5Da,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task and write it as CSV files.
    GenData {
        #[arg(long, value_enum)]
        task: TaskKind,
        /// Task config (JSON, or TOML by extension). Defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the discrepancy between two labeled samples.
    EstimateDiscrepancy {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        loss: LossArg,
        /// Norm bound Λ.
        #[arg(long)]
        lambda: f64,
        /// Restrict the supremum to a ball of this radius around the target-only fit.
        #[arg(long)]
        local_ball: Option<f64>,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one algorithm at one hyperparameter point and write the fit as JSON.
    Train {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        source: PathBuf,
        /// Target sample; labels are ignored by best-da and dm.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        loss: LossArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda_inf: Option<f64>,
        #[arg(long)]
        lambda_1: Option<f64>,
        #[arg(long)]
        lambda_2: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        ridge: f64,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// d̂ for SBEST; estimated from the samples when absent.
        #[arg(long)]
        d_hat: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run a cross-validated experiment grid.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate a generalization bound for a saved fit.
    Bounds {
        #[arg(long)]
        fit: PathBuf,
        /// Rows the fit was trained on, source rows first.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "theorem1")]
        kind: BoundArg,
        #[arg(long, value_enum, default_value = "logistic")]
        loss: LossArg,
        #[arg(long, default_value_t = 10.0)]
        lambda: f64,
        /// Discrepancy estimate d̂; estimated from the data when absent.
        #[arg(long)]
        d_hat: Option<f64>,
        /// Unlabeled target sample, required for theorem5-da.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        rademacher_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the CSV row to this file, writing the header when it is new.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Failure with its exit code: 1 for run failures, 2 for configuration errors.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::GenData { task, config, out, seed } => gen_data(task, config.as_deref(), &out, seed),
        Command::EstimateDiscrepancy {
            source,
            target,
            loss,
            lambda,
            local_ball,
            restarts,
            seed,
        } => estimate(&source, &target, loss.into(), lambda, local_ball, restarts, seed),
        Command::Train {
            algo,
            source,
            target,
            loss,
            lambda,
            out,
            lambda_inf,
            lambda_1,
            lambda_2,
            step,
            alpha,
            ridge,
            init,
            d_hat,
            max_iters,
        } => {
            let point = TrainPoint {
                lambda_inf,
                lambda_1,
                lambda_2,
                step,
                alpha,
                ridge,
                init,
                d_hat,
                max_iters,
            };
            train(algo.into(), &source, &target, loss.into(), lambda, &out, &point)
        }
        Command::Experiment { config, out, threads } => experiment(&config, out, threads),
        Command::Bounds {
            fit,
            data,
            delta,
            kind,
            loss,
            lambda,
            d_hat,
            target,
            rademacher_samples,
            seed,
            csv,
        } => bounds(BoundsArgs {
            fit,
            data,
            delta,
            kind,
            loss: loss.into(),
            lambda,
            d_hat,
            target,
            rademacher_samples,
            seed,
            csv,
        }),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn gen_data(task: TaskKind, config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<u8> {
    match task {
        TaskKind::BestEffort => {
            let mut cfg: BestEffortTaskConfig = read_config(config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate().map_err(|e| config_error(e.to_string()))?;
            let t = gen_best_effort_task(&cfg)?;
            save_task(out, &t.source, &t.target, &t.test, &t.metadata)?;
        }
        TaskKind::Covshift => {
            let mut cfg: CovariateShiftTaskConfig = read_config(config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate().map_err(|e| config_error(e.to_string()))?;
            let t = gen_covariate_shift_task(&cfg)?;
            std::fs::create_dir_all(out).map_err(|e| Failure {
                code: 1,
                message: format!("{}: {e}", out.display()),
            })?;
            save_dataset_csv(&t.source, &out.join("source.csv"))?;
            save_dataset_csv(&t.target, &out.join("target.csv"))?;
            save_dataset_csv(&t.test, &out.join("test.csv"))?;
            save_dataset_csv(&t.validation, &out.join("validation.csv"))?;
            let meta = json!({ "w_star": t.w_star, "w": t.w, "seed": cfg.seed, "config": cfg });
            write_json(&out.join("metadata.json"), &meta)?;
        }
    }
    println!("wrote task to {}", out.display());
    Ok(0)
}

fn estimate(
    source: &Path,
    target: &Path,
    loss: LossKind,
    lambda: f64,
    local_ball: Option<f64>,
    restarts: usize,
    seed: u64,
) -> CliResult<u8> {
    let q = load_dataset_csv(source)?;
    let p = load_dataset_csv(target)?;
    let mut space = HypothesisSpace::new(loss, lambda)?;
    if let Some(r) = local_ball {
        let uniform = WeightVector::uniform(p.len());
        let h0 = weighted_erm(&p, uniform.values(), &space, 1e-3, &ErmOptions::default())?;
        space = space.with_local_ball(h0, r)?;
    }
    let opts = AscentOptions {
        restarts,
        seed,
        ..Default::default()
    };
    let forward = estimate_labeled_discrepancy(&p, &q, &space, &opts)?;
    let backward = estimate_labeled_discrepancy(&q, &p, &space, &opts)?;
    let unlabeled = match loss {
        LossKind::Squared => Some(empirical_unlabeled_discrepancy(&p, &q, lambda)?),
        LossKind::Logistic => None,
    };
    let report = json!({
        "loss": loss.name(),
        "lambda": lambda,
        "local_ball": local_ball,
        "target_minus_source": forward,
        "source_minus_target": backward,
        "absolute": forward.value.max(backward.value),
        "unlabeled": unlabeled,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(0)
}

struct TrainPoint {
    lambda_inf: Option<f64>,
    lambda_1: Option<f64>,
    lambda_2: Option<f64>,
    step: Option<f64>,
    alpha: Option<f64>,
    ridge: f64,
    init: Option<InitArg>,
    d_hat: Option<f64>,
    max_iters: Option<usize>,
}

fn train(
    algo: AlgoKind,
    source: &Path,
    target: &Path,
    loss: LossKind,
    lambda: f64,
    out: &Path,
    pt: &TrainPoint,
) -> CliResult<u8> {
    let src = load_dataset_csv(source)?.with_domain(Domain::Source);
    let tgt = load_dataset_csv(target)?.with_domain(Domain::Target);
    let space = HypothesisSpace::new(loss, lambda)?;
    let erm = ErmOptions::default();
    let data = || src.concat(&tgt);
    let fit = match algo {
        AlgoKind::SbestAm | AlgoKind::SbestDc => {
            let data = data()?;
            let d_hat = match pt.d_hat {
                Some(d) => d,
                None => estimate_labeled_discrepancy(&tgt, &src, &space, &AscentOptions::default())?.value.max(0.0),
            };
            let defaults = SbestHyperparams::default();
            let params = SbestHyperparams {
                lambda_inf: pt.lambda_inf.unwrap_or(defaults.lambda_inf),
                lambda_1: pt.lambda_1.unwrap_or(defaults.lambda_1),
                lambda_2: pt.lambda_2.unwrap_or(defaults.lambda_2),
                d_hat,
                q_step: PgdOptions {
                    step: pt.step.unwrap_or(defaults.q_step.step),
                    ..defaults.q_step.clone()
                },
                init: match pt.init {
                    Some(InitArg::Reference) => SbestInit::Reference,
                    _ => SbestInit::Uniform,
                },
                max_iters: pt.max_iters.unwrap_or(defaults.max_iters),
                ..defaults
            };
            if algo == AlgoKind::SbestAm {
                sbest_am(&data, &params, &space)?
            } else {
                sbest_dc(&data, &params, &space)?
            }
        }
        AlgoKind::BestDa => {
            let defaults = BestDaHyperparams::default();
            let params = BestDaHyperparams {
                lambda_inf: pt.lambda_inf.unwrap_or(defaults.lambda_inf),
                lambda_1: pt.lambda_1.unwrap_or(defaults.lambda_1),
                lambda_2: pt.lambda_2.unwrap_or(defaults.lambda_2),
                d_bar: empirical_unlabeled_discrepancy(&tgt, &src, lambda)?,
                step: PgdOptions {
                    step: pt.step.unwrap_or(defaults.step.step),
                    ..defaults.step.clone()
                },
                max_iters: pt.max_iters.unwrap_or(defaults.max_iters),
                ..defaults
            };
            bestda_am(&src, &tgt, &params, &space)?
        }
        AlgoKind::Dm => {
            let defaults = DmParams::default();
            let params = DmParams {
                ridge: pt.ridge,
                step: PgdOptions {
                    step: pt.step.unwrap_or(defaults.step.step),
                    max_iters: pt.max_iters.unwrap_or(defaults.step.max_iters),
                    ..defaults.step.clone()
                },
                erm,
            };
            let f = dm_baseline(&src, &tgt, &space, &params)?;
            FitResult {
                trace: f.trace,
                ..FitResult::from_hypothesis(f.hypothesis, f.q)
            }
        }
        AlgoKind::Alpha => {
            let data = data()?;
            let alpha = pt.alpha.ok_or_else(|| config_error("--alpha is required for the alpha algorithm"))?;
            let q = alpha_weights_for(data.domains(), alpha)?;
            let h = weighted_erm(&data, q.values(), &space, pt.ridge, &erm)?;
            FitResult::from_hypothesis(h, q)
        }
        AlgoKind::TargetOnly | AlgoKind::SourceOnly | AlgoKind::Pooled => {
            let which = match algo {
                AlgoKind::TargetOnly => Baseline::TargetOnly,
                AlgoKind::SourceOnly => Baseline::SourceOnly,
                _ => Baseline::PooledUniform,
            };
            let (h, q) = baseline_train(&data()?, which, &space, pt.ridge, &erm)?;
            FitResult::from_hypothesis(h, q)
        }
    };
    std::fs::write(out, fit.to_json()? + "\n").map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", out.display()),
    })?;
    println!(
        "{algo}: {} iterations, converged {}, wrote {}",
        fit.iterations,
        fit.converged,
        out.display()
    );
    Ok(0)
}

fn experiment(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> CliResult<u8> {
    let mut cfg = ExperimentConfig::load(config).map_err(|e| match e {
        Error::Io { .. } => config_error(e.to_string()),
        other => Failure::from(other),
    })?;
    if threads.is_some() {
        cfg.threads = threads;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| config_error("no output directory: pass --out or set output_dir"))?;
    let results = run_experiment(&cfg)?;
    let summary = emit_results(&results, &dir)?;
    println!("{:<16} {:>6} {:>6} {:>8} {:>10} {:>10} {:>6}", "algorithm", "n", "eta", "epsilon", summary.metric, "stderr", "fail");
    for g in &summary.groups {
        let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "-".into());
        let (mean, se) = match &g.metric {
            Some(a) => (format!("{:.4}", a.mean), format!("{:.4}", a.stderr)),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{:<16} {:>6} {:>6} {:>8} {:>10} {:>10} {:>6}",
            g.algorithm,
            g.setting.n,
            f(g.setting.eta),
            f(g.setting.epsilon),
            mean,
            se,
            g.failures
        );
    }
    println!("wrote results to {}", dir.display());
    if summary.failures > 0 {
        for c in &summary.failed_cells {
            eprintln!("failed: {} seed {}: {}", c.algorithm, c.seed, c.error);
        }
        return Ok(1);
    }
    Ok(0)
}

struct BoundsArgs {
    fit: PathBuf,
    data: PathBuf,
    delta: f64,
    kind: BoundArg,
    loss: LossKind,
    lambda: f64,
    d_hat: Option<f64>,
    target: Option<PathBuf>,
    rademacher_samples: usize,
    seed: u64,
    csv: Option<PathBuf>,
}

fn bounds(a: BoundsArgs) -> CliResult<u8> {
    let text = std::fs::read_to_string(&a.fit).map_err(|e| config_error(format!("{}: {e}", a.fit.display())))?;
    let fit = FitResult::from_json(&text)?;
    let data = load_dataset_csv(&a.data)?;
    let space = HypothesisSpace::new(a.loss, a.lambda)?;
    let ropts = RademacherOptions {
        samples: a.rademacher_samples,
        seed: a.seed,
        ..Default::default()
    };
    let ascent = AscentOptions {
        seed: a.seed,
        ..Default::default()
    };
    let d_hat = |data: &LabeledDataset| -> CliResult<f64> {
        match a.d_hat {
            Some(d) => Ok(d),
            None => {
                let src = data.subset(Domain::Source);
                let tgt = data.subset(Domain::Target);
                if src.is_empty() || tgt.is_empty() {
                    return Ok(0.0);
                }
                Ok(estimate_labeled_discrepancy(&tgt, &src, &space, &ascent)?.value.max(0.0))
            }
        }
    };
    let report: BoundReport = match a.kind {
        BoundArg::Theorem1 | BoundArg::Theorem3 | BoundArg::Corollary4 => {
            if fit.q.len() != data.len() {
                return Err(config_error(format!(
                    "the fit has {} weights but the data has {} rows",
                    fit.q.len(),
                    data.len()
                )));
            }
            let rad = rademacher_estimate(&data, fit.q.values(), &space, &ropts)?.mean;
            let d = d_hat(&data)?;
            match a.kind {
                BoundArg::Theorem1 => bound_theorem1(&fit.hypothesis, &fit.q, &data, &space, d, a.delta, rad)?,
                _ => {
                    let p0 = WeightVector::uniform_on(data.domains(), Domain::Target)?;
                    let idx = index_weight_discrepancy(&fit.q, &p0, &data, &space, &ascent)?.value;
                    if matches!(a.kind, BoundArg::Theorem3) {
                        bound_theorem3(&fit.hypothesis, &fit.q, &p0, &data, &space, d, a.delta, rad, idx)?
                    } else {
                        bound_corollary4(&fit.hypothesis, &fit.q, &p0, &data, &space, d, a.delta, rad, idx)?
                    }
                }
            }
        }
        BoundArg::Theorem5Da => {
            let target_path = a.target.as_ref().ok_or_else(|| config_error("--target is required for theorem5-da"))?;
            let target = load_dataset_csv(target_path)?;
            let (Some(q_prime), Some(p)) = (&fit.q_prime, &fit.p) else {
                return Err(config_error("theorem5-da needs a best-da fit with q_prime and p"));
            };
            let q = fit.q.values();
            let weighted = unlabeled_discrepancy(q_prime, target.features(), p, data.features(), a.lambda, a.loss)?.value;
            let surrogates = DaSurrogates {
                weighted_unlabeled: Some(weighted),
                weighted_correction: 0.0,
                unlabeled: Some(empirical_unlabeled_discrepancy(&target, &data, a.lambda)?),
                correction: 0.0,
            };
            let combined = q + p;
            let rad = rademacher_estimate(&data, &combined, &space, &ropts)?.mean;
            bound_theorem5_da(&fit.hypothesis, q, p, q_prime, &data, &space, &surrogates, a.delta, rad)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if let Some(path) = &a.csv {
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        })?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        };
        if fresh {
            w.write_record(BoundReport::CSV_HEADER).map_err(io)?;
        }
        w.write_record(report.csv_row()).map_err(io)?;
        w.flush().map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        })?;
    }
    Ok(0)
}
