//! The four experiment commands.

use serde::Serialize;
use w2slab_core::harness::suites::{self, SuiteConfig};
use w2slab_core::losses::{AuxConfig, CompositeLossConfig, SlWeights};
use w2slab_core::ridge::{h_closed_form, mp_integral, simulate_misfit, RidgeConfig};
use w2slab_core::trainer::{
    alpha_sweep, run_bias_variance, BiasVarianceConfig, Optimizer, PipelineConfig, SyntheticTask, TrainConfig,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{OutDir, Verdict};

/// Rows and verdicts of a finished command, before the report is written.
pub struct Outcome<R> {
    pub rows: Vec<R>,
    pub verdicts: Vec<Verdict>,
}

fn invalid(e: w2slab_core::Error) -> CliError {
    CliError::config(e.to_string())
}

pub fn verify(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome<suites::SuiteOutcome>> {
    let sc = SuiteConfig {
        seed: cfg.u64("seed"),
        tolerance: cfg.opt_f64("tolerance"),
        scenarios: cfg.usize("scenarios"),
        triples: cfg.usize("triples"),
        pairs: cfg.usize("pairs"),
        lemma_sets: cfg.usize("lemma_sets"),
        grid_step: cfg.f64("grid_step"),
        prop1_constructions: cfg.usize("prop1_constructions"),
        bias_variance_draws: cfg.usize("bias_variance_draws"),
    };
    if !(sc.grid_step > 0.0 && sc.grid_step < 0.5) {
        return Err(CliError::config("grid_step must lie in (0, 0.5)"));
    }
    if sc.tolerance.is_some_and(|t| t.is_nan() || t < 0.0) {
        return Err(CliError::config("tolerance must be nonnegative"));
    }
    let report = suites::run_all(&sc)?;
    out.write_csv("theorems.csv", &report.rows)?;
    out.write_csv("verify.csv", &report.suites)?;
    let verdicts = report
        .suites
        .iter()
        .map(|s| {
            Verdict::new(
                &s.name,
                s.passed,
                format!("worst {:e} vs tolerance {:e} over {} checks", s.worst, s.tolerance, s.checks),
            )
        })
        .collect();
    Ok(Outcome {
        rows: report.suites,
        verdicts,
    })
}

#[derive(Debug, Serialize)]
struct TrialRow {
    gamma: f64,
    eta0: f64,
    trial: usize,
    misfit: f64,
    operator_misfit: f64,
    retries: u64,
}

#[derive(Debug, Serialize)]
pub struct RidgeCell {
    gamma: f64,
    eta0: f64,
    trials: usize,
    empirical_misfit: f64,
    std_error: f64,
    misfit_over_b: f64,
    normalized_misfit: f64,
    operator_misfit: f64,
    h: f64,
    mp_integral: f64,
    mp_delta: f64,
}

pub fn ridge(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome<RidgeCell>> {
    let gammas = cfg.f64_list("gammas");
    let eta0s = cfg.f64_list("eta0s");
    let trials = cfg.usize("trials");
    if gammas.is_empty() || eta0s.is_empty() {
        return Err(CliError::config("gammas and eta0s must be nonempty"));
    }
    if let Some(g) = gammas.iter().find(|g| g.is_nan() || **g <= 1.0) {
        return Err(CliError::config(format!("gamma {g} must exceed 1")));
    }
    if trials == 0 {
        return Err(CliError::config("trials must be positive"));
    }
    let factor = cfg.f64("bound_factor");
    let tol = cfg.f64("tolerance");
    let base = RidgeConfig {
        d_w: cfg.usize("d_w"),
        gamma: gammas[0],
        n_ratio: cfg.f64("n_ratio"),
        eta0: eta0s[0],
        b: cfg.f64("b"),
        seed: cfg.u64("seed"),
    };
    for &gamma in &gammas {
        for &eta0 in &eta0s {
            RidgeConfig { gamma, eta0, ..base }.validate().map_err(invalid)?;
        }
    }

    let mut trial_rows = Vec::new();
    let mut cells = Vec::new();
    for &eta0 in &eta0s {
        for &gamma in &gammas {
            let rc = RidgeConfig { gamma, eta0, ..base };
            let est = simulate_misfit(&rc, trials)?;
            let h = h_closed_form(eta0, gamma)?;
            let mp = mp_integral(eta0, gamma)?;
            for (i, t) in est.per_trial.iter().enumerate() {
                trial_rows.push(TrialRow {
                    gamma,
                    eta0,
                    trial: i,
                    misfit: t.misfit,
                    operator_misfit: t.operator_misfit,
                    retries: t.retries,
                });
            }
            cells.push(RidgeCell {
                gamma,
                eta0,
                trials,
                empirical_misfit: est.empirical_misfit,
                std_error: est.std_error,
                misfit_over_b: est.empirical_misfit / rc.b,
                normalized_misfit: est.normalized_misfit,
                operator_misfit: est.operator_misfit,
                h,
                mp_integral: mp,
                mp_delta: (mp - h).abs(),
            });
        }
    }
    out.write_csv("ridge.csv", &trial_rows)?;
    out.write_csv("ridge_summary.csv", &cells)?;

    let over: Vec<&RidgeCell> = cells.iter().filter(|c| c.misfit_over_b > factor * c.h).collect();
    let worst_mp = cells.iter().map(|c| c.mp_delta).fold(0.0, f64::max);
    let mut verdicts = vec![
        Verdict::new(
            "misfit_bound",
            over.is_empty(),
            format!("{} of {} cells exceed {factor}·h", over.len(), cells.len()),
        ),
        Verdict::new(
            "quadrature",
            worst_mp <= tol,
            format!("max |mp - h| {worst_mp:e} (tolerance {tol:e})"),
        ),
    ];
    if gammas.len() >= 2 {
        let mut sorted = gammas.clone();
        sorted.sort_by(f64::total_cmp);
        let mut worst = 0;
        for &eta0 in &eta0s {
            let series: Vec<f64> = sorted
                .iter()
                .map(|g| {
                    cells
                        .iter()
                        .find(|c| c.gamma == *g && c.eta0 == eta0)
                        .map(|c| c.empirical_misfit)
                        .expect("cell exists")
                })
                .collect();
            worst = worst.max(series.windows(2).filter(|w| w[1] > w[0]).count());
        }
        verdicts.push(Verdict::new(
            "decreasing_in_gamma",
            worst <= 1,
            format!("at most {worst} inversion(s) per eta0 sweep (1 allowed)"),
        ));
    }
    Ok(Outcome { rows: cells, verdicts })
}

fn optimizer(cfg: &ExperimentConfig, key: &str) -> Result<Optimizer> {
    Optimizer::parse(cfg.str(key)).map_err(invalid)
}

fn pipeline(cfg: &ExperimentConfig) -> Result<PipelineConfig> {
    let p = PipelineConfig {
        task: SyntheticTask {
            d: cfg.usize("d"),
            separation: cfg.f64("separation"),
            sigma: cfg.f64("sigma"),
            n_train: cfg.usize("n_train"),
            n_pseudo: cfg.usize("n_pseudo"),
            n_test: cfg.usize("n_test"),
            seed: 0,
        },
        d_w: cfg.usize("d_w"),
        capacity_ratio: cfg.usize("capacity_ratio"),
        init_scale: cfg.f64("init_scale"),
        teacher: TrainConfig {
            steps: cfg.usize("teacher_steps"),
            learning_rate: cfg.f64("teacher_lr"),
            batch_size: cfg.usize("teacher_batch"),
            optimizer: optimizer(cfg, "teacher_optimizer")?,
            ..TrainConfig::default()
        },
        student: TrainConfig {
            steps: cfg.usize("student_steps"),
            learning_rate: cfg.f64("student_lr"),
            batch_size: cfg.usize("student_batch"),
            optimizer: optimizer(cfg, "student_optimizer")?,
            ..TrainConfig::default()
        },
        composite: CompositeLossConfig {
            cace_threshold: 0.0,
            sl: SlWeights {
                lambda_rce: cfg.f64("sl_lambda_rce"),
                lambda_ce: cfg.f64("sl_lambda_ce"),
            },
            aux: AuxConfig {
                beta_max: cfg.f64("aux_beta_max"),
                warmup_fraction: cfg.f64("aux_warmup"),
            },
        },
        cace_eta_percent: cfg.f64("cace_eta"),
        swap_capacities: cfg.bool("swap_capacities"),
        seed: 0,
    }
    .reseeded(cfg.u64("seed"));
    p.validate().map_err(invalid)?;
    if p.teacher.batch_size > p.task.n_train || p.student.batch_size > p.task.n_pseudo {
        return Err(CliError::config("batch sizes must not exceed their training splits"));
    }
    Ok(p)
}

pub fn classify(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome<w2slab_core::trainer::SweepRow>> {
    let p = pipeline(cfg)?;
    let losses = cfg.str_list("losses");
    let alphas = cfg.f64_list("alphas");
    let repeats = cfg.usize("repeats");
    if losses.is_empty() {
        return Err(CliError::config("losses must be nonempty"));
    }
    if alphas.is_empty() {
        return Err(CliError::config("alphas must be nonempty"));
    }
    if repeats == 0 {
        return Err(CliError::config("repeats must be positive"));
    }
    for name in &losses {
        w2slab_core::trainer::LossSpec::from_name(name, &p.composite).map_err(invalid)?;
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(CliError::config(format!("alpha {a} outside [0, 1]")));
    }
    let result = alpha_sweep(&p, &losses, &alphas, repeats)?;
    out.write_csv("classify.csv", &result.rows)?;
    out.write_csv("classify_cells.csv", &result.cells)?;
    let verdicts = result
        .verdicts
        .into_iter()
        .map(|v| Verdict::new(&v.name, v.passed, v.detail))
        .collect();
    Ok(Outcome {
        rows: result.rows,
        verdicts,
    })
}

#[derive(Debug, Serialize)]
pub struct PointRow {
    index: usize,
    class: usize,
    teacher_bias: f64,
    teacher_variance: f64,
    teacher_mean_ce: f64,
    student_bias: f64,
    student_variance: f64,
    student_mean_ce: f64,
    ensemble_student_bias: f64,
    ensemble_student_variance: f64,
    ensemble_student_mean_ce: f64,
}

pub fn bias_variance(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome<PointRow>> {
    let bv = BiasVarianceConfig {
        pipeline: pipeline(cfg)?,
        k: cfg.usize("k"),
        n_splits: cfg.usize("n_splits"),
        loss: cfg.str("loss").to_string(),
        alpha: cfg.f64("alpha"),
    };
    bv.validate().map_err(invalid)?;
    let tol = cfg.f64("tolerance");
    let report = run_bias_variance(&bv)?;
    let rows: Vec<PointRow> = report
        .points
        .iter()
        .map(|p| PointRow {
            index: p.index,
            class: p.class,
            teacher_bias: p.teacher.bias,
            teacher_variance: p.teacher.variance,
            teacher_mean_ce: p.teacher.mean_ce,
            student_bias: p.student.bias,
            student_variance: p.student.variance,
            student_mean_ce: p.student.mean_ce,
            ensemble_student_bias: p.ensemble_student.bias,
            ensemble_student_variance: p.ensemble_student.variance,
            ensemble_student_mean_ce: p.ensemble_student.mean_ce,
        })
        .collect();
    out.write_csv("bias_variance.csv", &rows)?;
    let verdicts = vec![
        Verdict::new(
            "identity",
            report.max_identity_residual <= tol,
            format!("max |bias + variance - mean CE| {:e} over {} runs", report.max_identity_residual, report.runs),
        ),
        Verdict::new(
            "ensemble_reduces_variance",
            report.ensemble_lower_fraction > 0.5,
            format!(
                "ensemble-supervised variance lower on {:.1}% of test points",
                100.0 * report.ensemble_lower_fraction
            ),
        ),
    ];
    Ok(Outcome { rows, verdicts })
}
