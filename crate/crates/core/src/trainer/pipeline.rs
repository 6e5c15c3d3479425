//! Weak teacher → pseudo-labels → smoothing → strong student.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{FeatureMap, LinearProbeModel};
use super::optim::Optimizer;
use super::task::{SyntheticTask, TaskData};
use super::train::{train, LossSpec, TrainConfig, TrainReport};
use crate::error::{invalid, Result};
use crate::losses::{self, CompositeLossConfig};
use crate::rng;
use crate::simplex::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: SyntheticTask,
    /// Input coordinates visible to the weak model.
    pub d_w: usize,
    /// Strong feature count as a multiple of `d_w`.
    pub capacity_ratio: usize,
    /// Scale of the strong model's random initialization.
    pub init_scale: f64,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    pub composite: CompositeLossConfig,
    /// Confidence quantile (percent) that sets the CACE threshold.
    pub cace_eta_percent: f64,
    /// Train the strong model as teacher and the weak one as student.
    pub swap_capacities: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            task: SyntheticTask::default(),
            d_w: 8,
            capacity_ratio: 8,
            init_scale: 1.0,
            teacher: TrainConfig::default(),
            student: TrainConfig {
                learning_rate: 0.03,
                optimizer: Optimizer::Adam,
                ..TrainConfig::default()
            },
            composite: CompositeLossConfig::default(),
            cace_eta_percent: 20.0,
            swap_capacities: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.d_w == 0 || self.d_w > self.task.d {
            return Err(invalid(format!(
                "weak model dimension {} must lie in 1..={}",
                self.d_w, self.task.d
            )));
        }
        if self.capacity_ratio == 0 {
            return Err(invalid("capacity ratio must be positive"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(invalid("init scale must be nonnegative"));
        }
        if !(0.0..=100.0).contains(&self.cace_eta_percent) {
            return Err(invalid(format!("CACE quantile {} outside [0, 100]", self.cace_eta_percent)));
        }
        self.teacher.validate()?;
        self.student.validate()?;
        self.composite.validate()
    }

    pub fn d_s(&self) -> usize {
        self.capacity_ratio * self.d_w
    }

    /// Same configuration with every seed tied to `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut cfg = *self;
        cfg.seed = seed;
        cfg.task.seed = rng::derive(seed, 1);
        cfg.teacher.seed = rng::derive(seed, 2);
        cfg.student.seed = rng::derive(seed, 3);
        cfg
    }

    fn weak_map(&self) -> FeatureMap {
        FeatureMap::Identity { dims: self.d_w }
    }

    fn strong_map(&self) -> FeatureMap {
        let mut r = rng::stream(rng::derive(self.seed, 4), 0);
        FeatureMap::random_projection(self.d_s(), self.task.d, self.d_w, &mut r)
    }

    /// Untrained teacher: zero weights on its feature map.
    pub fn teacher_init(&self) -> LinearProbeModel {
        let map = if self.swap_capacities { self.strong_map() } else { self.weak_map() };
        LinearProbeModel::zeros(map)
    }

    /// Untrained student: the frozen random initialization.
    pub fn student_init(&self) -> LinearProbeModel {
        let map = if self.swap_capacities { self.weak_map() } else { self.strong_map() };
        let mut r = rng::stream(rng::derive(self.seed, 5), 0);
        LinearProbeModel::random(map, self.init_scale, &mut r)
    }
}

/// A trained teacher and its soft labels on the pseudo-label split.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub data: TaskData,
    pub teacher: LinearProbeModel,
    pub teacher_report: TrainReport,
    pub pseudo_labels: Vec<ProbVector>,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<PreparedRun> {
    cfg.validate()?;
    let data = cfg.task.generate()?;
    let mut teacher = cfg.teacher_init();
    let teacher_report = train(
        &mut teacher,
        &data.train.x,
        &data.train.one_hot_labels(),
        &data.test,
        &LossSpec::Ce,
        &cfg.teacher,
    )?;
    let pseudo_labels = teacher.predict(&data.pseudo.x)?;
    Ok(PreparedRun {
        data,
        teacher,
        teacher_report,
        pseudo_labels,
    })
}

/// Resolves a loss name, fixing the CACE threshold from the training labels.
pub fn resolve_loss(name: &str, cfg: &PipelineConfig, labels: &[ProbVector]) -> Result<LossSpec> {
    let mut spec = LossSpec::from_name(name, &cfg.composite)?;
    if let LossSpec::Cace { threshold } = &mut spec {
        *threshold = losses::cace_threshold(labels, cfg.cace_eta_percent)?;
    }
    Ok(spec)
}

/// Trains a fresh student on `labels` smoothed with `alpha`.
pub fn train_student(
    cfg: &PipelineConfig,
    prepared: &PreparedRun,
    labels: &[ProbVector],
    loss_name: &str,
    alpha: f64,
) -> Result<(LinearProbeModel, TrainReport)> {
    let smoothed: Vec<ProbVector> = labels
        .iter()
        .map(|y| losses::smooth_labels(y, alpha))
        .collect::<Result<_>>()?;
    let spec = resolve_loss(loss_name, cfg, &smoothed)?;
    let mut student = cfg.student_init();
    let mut report = train(
        &mut student,
        &prepared.data.pseudo.x,
        &smoothed,
        &prepared.data.test,
        &spec,
        &cfg.student,
    )?;
    report.alpha = Some(alpha);
    Ok((student, report))
}

/// One weak-to-strong run; returns the teacher and student reports.
pub fn w2s_pipeline(cfg: &PipelineConfig, loss_name: &str, alpha: f64) -> Result<(TrainReport, TrainReport)> {
    let prepared = prepare(cfg)?;
    let (_, student) = train_student(cfg, &prepared, &prepared.pseudo_labels, loss_name, alpha)?;
    Ok((prepared.teacher_report, student))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub loss: String,
    pub alpha: f64,
    pub repeat: usize,
    pub teacher_acc: f64,
    pub student_acc: f64,
    pub param_distance: f64,
    pub mean_gdv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub loss: String,
    pub alpha: f64,
    pub repeats: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub distance_mean: f64,
    pub distance_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
    pub verdicts: Vec<Verdict>,
}

/// Runs every (loss, α) cell for `repeats` seeds derived from `cfg.seed`.
/// Within a repeat all cells share the task, teacher and student initialization.
pub fn alpha_sweep(cfg: &PipelineConfig, losses: &[String], alphas: &[f64], repeats: usize) -> Result<SweepResult> {
    if losses.is_empty() || alphas.is_empty() || repeats == 0 {
        return Err(invalid("sweep needs at least one loss, one alpha and one repeat"));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid(format!("alpha {a} outside [0, 1]")));
    }
    for name in losses {
        LossSpec::from_name(name, &cfg.composite)?;
    }
    let prepared: Vec<(PipelineConfig, PreparedRun)> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let c = cfg.reseeded(rng::derive(cfg.seed, 100 + r as u64));
            prepare(&c).map(|p| (c, p))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, &String, f64)> = (0..repeats)
        .flat_map(|r| losses.iter().flat_map(move |l| alphas.iter().map(move |&a| (r, l, a))))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(r, loss, alpha)| {
            let (c, p) = &prepared[r];
            let (_, rep) = train_student(c, p, &p.pseudo_labels, loss, alpha)?;
            Ok(SweepRow {
                loss: loss.clone(),
                alpha,
                repeat: r,
                teacher_acc: p.teacher_report.accuracy,
                student_acc: rep.accuracy,
                param_distance: rep.param_distance,
                mean_gdv: rep.mean_gdv(),
            })
        })
        .collect::<Result<_>>()?;

    let cells = summarize(&rows, losses, alphas);
    let verdicts = trend_verdicts(&rows, &cells);
    Ok(SweepResult { rows, cells, verdicts })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize(rows: &[SweepRow], losses: &[String], alphas: &[f64]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for loss in losses {
        for &alpha in alphas {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| &r.loss == loss && r.alpha == alpha).collect();
            let acc: Vec<f64> = sel.iter().map(|r| r.student_acc).collect();
            let dist: Vec<f64> = sel.iter().map(|r| r.param_distance).collect();
            let (acc_mean, acc_std) = mean_std(&acc);
            let (distance_mean, distance_std) = mean_std(&dist);
            cells.push(SweepCell {
                loss: loss.clone(),
                alpha,
                repeats: sel.len(),
                acc_mean,
                acc_std,
                distance_mean,
                distance_std,
            });
        }
    }
    cells
}

/// Maximum accuracy spread of the RCE row over α ≥ 0.001.
pub const RCE_FLAT_TOLERANCE: f64 = 0.05;
/// Minimum CE accuracy drop from α = 1 to α = 0.01.
pub const CE_DROP_MIN: f64 = 0.05;

fn cell<'a>(cells: &'a [SweepCell], loss: &str, alpha: f64) -> Option<&'a SweepCell> {
    cells.iter().find(|c| c.loss == loss && c.alpha == alpha)
}

/// CE-versus-RCE trend checks. Each one is emitted only when the sweep
/// contains the cells it needs.
pub fn trend_verdicts(rows: &[SweepRow], cells: &[SweepCell]) -> Vec<Verdict> {
    let mut out = Vec::new();

    let rce: Vec<&SweepCell> = cells.iter().filter(|c| c.loss == "rce" && c.alpha >= 0.001).collect();
    if rce.len() >= 2 {
        let hi = rce.iter().map(|c| c.acc_mean).fold(f64::NEG_INFINITY, f64::max);
        let lo = rce.iter().map(|c| c.acc_mean).fold(f64::INFINITY, f64::min);
        out.push(Verdict {
            name: "rce_flat".into(),
            passed: hi - lo <= RCE_FLAT_TOLERANCE,
            detail: format!("rce accuracy spread {:.4} over alpha >= 0.001 (limit {RCE_FLAT_TOLERANCE})", hi - lo),
        });
    }

    if let (Some(top), Some(low)) = (cell(cells, "ce", 1.0), cell(cells, "ce", 0.01)) {
        let drop = top.acc_mean - low.acc_mean;
        out.push(Verdict {
            name: "ce_drop".into(),
            passed: drop >= CE_DROP_MIN,
            detail: format!("ce accuracy falls {drop:.4} from alpha 1 to 0.01 (need {CE_DROP_MIN})"),
        });
    }

    let mut ce: Vec<&SweepCell> = cells.iter().filter(|c| c.loss == "ce").collect();
    if ce.len() >= 3 && ce.iter().any(|c| c.alpha == 1.0) {
        ce.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
        let inversions = ce.windows(2).filter(|w| w[1].acc_mean > w[0].acc_mean).count();
        out.push(Verdict {
            name: "ce_monotone".into(),
            passed: inversions <= 1,
            detail: format!("{inversions} inversions as alpha decreases (at most 1 allowed)"),
        });
    }

    let at_one = |loss: &str| -> Vec<&SweepRow> { rows.iter().filter(|r| r.loss == loss && r.alpha == 1.0).collect() };
    let (ce1, rce1) = (at_one("ce"), at_one("rce"));
    if !ce1.is_empty() && !rce1.is_empty() {
        let mut wins = 0;
        let mut total = 0;
        for r in &rce1 {
            if let Some(c) = ce1.iter().find(|c| c.repeat == r.repeat) {
                total += 1;
                wins += usize::from(r.param_distance >= c.param_distance);
            }
        }
        out.push(Verdict {
            name: "rce_moves_farther".into(),
            passed: 2 * wins > total,
            detail: format!("rce distance >= ce distance at alpha 1 in {wins} of {total} repeats"),
        });
    }
    out
}
