//! Repeated teacher/student training for per-point CE bias and variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::LinearProbeModel;
use super::pipeline::{resolve_loss, PipelineConfig};
use super::task::Dataset;
use super::train::{train, LossSpec};
use crate::error::{invalid, Result};
use crate::harness::{bias_variance_estimate, ensemble_dual_mean_prediction, BiasVariance};
use crate::losses;
use crate::rng;
use crate::simplex::ProbVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceConfig {
    pub pipeline: PipelineConfig,
    /// Outer rounds of fresh data.
    pub k: usize,
    /// Disjoint (teacher, student) split pairs per round.
    pub n_splits: usize,
    pub loss: String,
    pub alpha: f64,
}

impl Default for BiasVarianceConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            k: 4,
            n_splits: 4,
            loss: "ce".into(),
            alpha: 1.0,
        }
    }
}

impl BiasVarianceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(invalid("need at least one split per round"));
        }
        if self.k * self.n_splits < 2 {
            return Err(invalid(format!(
                "k·N = {} runs; variance needs at least 2",
                self.k * self.n_splits
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        LossSpec::from_name(&self.loss, &self.pipeline.composite)?;
        self.pipeline.validate()
    }
}

/// Estimates at one test point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    pub index: usize,
    pub class: usize,
    pub teacher: BiasVariance,
    pub student: BiasVariance,
    /// Student supervised by the dual-mean ensemble of each round's teachers.
    pub ensemble_student: BiasVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVarianceReport {
    pub points: Vec<PointEstimate>,
    pub runs: usize,
    /// Largest `|bias + variance − mean CE|` over all points and models.
    pub max_identity_residual: f64,
    /// Fraction of test points where the ensemble-supervised student has
    /// strictly lower variance than the single-teacher student.
    pub ensemble_lower_fraction: f64,
}

struct Round {
    teacher_preds: Vec<Vec<ProbVector>>,
    student_preds: Vec<Vec<ProbVector>>,
    ensemble_preds: Vec<Vec<ProbVector>>,
}

fn run_round(cfg: &BiasVarianceConfig, round: usize, test: &Dataset) -> Result<Round> {
    let p = &cfg.pipeline;
    let task = &p.task;
    let mut r = rng::stream(rng::derive(p.seed, 10), round as u64);
    let splits: Vec<(Dataset, Dataset)> = (0..cfg.n_splits)
        .map(|_| (task.sample(task.n_train, &mut r), task.sample(task.n_pseudo, &mut r)))
        .collect();
    let run_seed = |j: usize, label: u64| rng::derive(rng::derive(p.seed, label), (round * cfg.n_splits + j) as u64);

    let mut teachers = Vec::with_capacity(cfg.n_splits);
    let mut teacher_preds = Vec::with_capacity(cfg.n_splits);
    for (j, (s, _)) in splits.iter().enumerate() {
        let mut t = p.teacher_init();
        let tc = super::train::TrainConfig {
            seed: run_seed(j, 11),
            ..p.teacher
        };
        train(&mut t, &s.x, &s.one_hot_labels(), test, &LossSpec::Ce, &tc)?;
        teacher_preds.push(t.predict(&test.x)?);
        teachers.push(t);
    }

    let student_on = |j: usize, labels: Vec<ProbVector>| -> Result<Vec<ProbVector>> {
        let smoothed: Vec<ProbVector> = labels
            .iter()
            .map(|y| losses::smooth_labels(y, cfg.alpha))
            .collect::<Result<_>>()?;
        let spec = resolve_loss(&cfg.loss, p, &smoothed)?;
        let mut s: LinearProbeModel = p.student_init();
        let sc = super::train::TrainConfig {
            seed: run_seed(j, 12),
            ..p.student
        };
        train(&mut s, &splits[j].1.x, &smoothed, test, &spec, &sc)?;
        s.predict(&test.x)
    };

    let mut student_preds = Vec::with_capacity(cfg.n_splits);
    let mut ensemble_preds = Vec::with_capacity(cfg.n_splits);
    for j in 0..cfg.n_splits {
        let pseudo = &splits[j].1.x;
        let single = teachers[j].predict(pseudo)?;
        let all: Vec<Vec<ProbVector>> = teachers.iter().map(|t| t.predict(pseudo)).collect::<Result<_>>()?;
        let ensemble: Vec<ProbVector> = (0..pseudo.nrows())
            .map(|i| {
                let votes: Vec<ProbVector> = all.iter().map(|a| a[i].clone()).collect();
                ensemble_dual_mean_prediction(&votes)
            })
            .collect::<Result<_>>()?;
        student_preds.push(student_on(j, single)?);
        ensemble_preds.push(student_on(j, ensemble)?);
    }
    Ok(Round {
        teacher_preds,
        student_preds,
        ensemble_preds,
    })
}

fn estimate(runs: &[&Vec<ProbVector>], point: usize, truth: &ProbVector) -> Result<BiasVariance> {
    let at: Vec<ProbVector> = runs.iter().map(|r| r[point].clone()).collect();
    bias_variance_estimate(&at, truth)
}

/// Runs `k` rounds of `N` teacher/student pairs on disjoint fresh splits
/// and estimates bias and variance at every test point. The test set, the
/// strong feature map and the student initialization are shared by all runs.
pub fn run_bias_variance(cfg: &BiasVarianceConfig) -> Result<BiasVarianceReport> {
    cfg.validate()?;
    let p = &cfg.pipeline;
    let test = p.task.sample(p.task.n_test, &mut rng::stream(rng::derive(p.seed, 13), 0));
    let rounds: Vec<Round> = (0..cfg.k)
        .into_par_iter()
        .map(|i| run_round(cfg, i, &test))
        .collect::<Result<_>>()?;

    let gather = |f: fn(&Round) -> &Vec<Vec<ProbVector>>| -> Vec<&Vec<ProbVector>> {
        rounds.iter().flat_map(|r| f(r).iter()).collect()
    };
    let teacher = gather(|r| &r.teacher_preds);
    let student = gather(|r| &r.student_preds);
    let ensemble = gather(|r| &r.ensemble_preds);

    let truths = test.one_hot_labels();
    let points: Vec<PointEstimate> = (0..test.len())
        .map(|i| {
            Ok(PointEstimate {
                index: i,
                class: test.class[i],
                teacher: estimate(&teacher, i, &truths[i])?,
                student: estimate(&student, i, &truths[i])?,
                ensemble_student: estimate(&ensemble, i, &truths[i])?,
            })
        })
        .collect::<Result<_>>()?;

    let max_identity_residual = points
        .iter()
        .flat_map(|pt| [pt.teacher, pt.student, pt.ensemble_student])
        .map(|bv| bv.identity_residual().abs())
        .fold(0.0, f64::max);
    let lower = points
        .iter()
        .filter(|pt| pt.ensemble_student.variance < pt.student.variance)
        .count();
    Ok(BiasVarianceReport {
        ensemble_lower_fraction: lower as f64 / points.len() as f64,
        runs: teacher.len(),
        points,
        max_identity_residual,
    })
}
