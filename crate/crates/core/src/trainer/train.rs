//! Mini-batch training of a linear probe under a pluggable loss.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{self, LinearProbeModel};
use super::optim::{self, Optimizer, OptimizerState};
use super::task::Dataset;
use crate::error::{invalid, Error, Result};
use crate::losses::{self, AuxConfig, CompositeLossConfig, SlWeights};
use crate::rng;
use crate::simplex::ProbVector;

/// Loss names accepted by [`LossSpec::from_name`].
pub const LOSS_NAMES: [&str; 7] = ["ce", "rce", "kl", "rkl", "cace", "sl", "aux"];

/// A training loss with its parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum LossSpec {
    Ce,
    Rce,
    Kl,
    Rkl,
    Cace { threshold: f64 },
    Sl(SlWeights),
    Aux(AuxConfig),
}

impl LossSpec {
    pub fn from_name(name: &str, cfg: &CompositeLossConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match name {
            "ce" => LossSpec::Ce,
            "rce" => LossSpec::Rce,
            "kl" => LossSpec::Kl,
            "rkl" => LossSpec::Rkl,
            "cace" => LossSpec::Cace {
                threshold: cfg.cace_threshold,
            },
            "sl" => LossSpec::Sl(cfg.sl),
            "aux" => LossSpec::Aux(cfg.aux),
            other => {
                return Err(invalid(format!(
                    "unknown loss {other:?}; expected one of {}",
                    LOSS_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Ce => "ce",
            LossSpec::Rce => "rce",
            LossSpec::Kl => "kl",
            LossSpec::Rkl => "rkl",
            LossSpec::Cace { .. } => "cace",
            LossSpec::Sl(_) => "sl",
            LossSpec::Aux(_) => "aux",
        }
    }

    /// Loss of one example and its derivative along the first prediction coordinate.
    fn point(&self, y: &ProbVector, yhat: &ProbVector) -> Result<(f64, f64)> {
        match self {
            LossSpec::Ce => Ok((losses::ce(y, yhat)?, losses::grad_ce(y, yhat)?[0])),
            LossSpec::Rce => Ok((losses::rce(y, yhat)?, losses::grad_rce(y, yhat)?[0])),
            LossSpec::Kl => Ok((losses::kl(y, yhat)?, losses::grad_kl(y, yhat)?[0])),
            LossSpec::Rkl => Ok((losses::rkl(y, yhat)?, losses::grad_rkl(y, yhat)?[0])),
            LossSpec::Cace { threshold } => {
                if losses::confidence(y) < *threshold {
                    LossSpec::Rce.point(y, yhat)
                } else {
                    LossSpec::Ce.point(y, yhat)
                }
            }
            LossSpec::Sl(w) => {
                let (r, gr) = LossSpec::Rce.point(y, yhat)?;
                let (c, gc) = LossSpec::Ce.point(y, yhat)?;
                Ok((w.lambda_rce * r + w.lambda_ce * c, w.lambda_rce * gr + w.lambda_ce * gc))
            }
            LossSpec::Aux(_) => Err(Error::Unsupported("aux needs batch context".into())),
        }
    }
}

/// How parameter gradients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Closed-form loss gradients chained through the sigmoid.
    Analytic,
    /// Central differences of the batch loss in parameter space.
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub gradient: GradientMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.1,
            batch_size: 32,
            optimizer: Optimizer::Sgd,
            gradient: GradientMode::Analytic,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub loss: String,
    pub alpha: Option<f64>,
    /// Test accuracy against ground truth.
    pub accuracy: f64,
    /// `‖θ − θ₀‖` at the end of training.
    pub param_distance: f64,
    /// Mean mini-batch gradient norm of each epoch.
    pub grad_norm_trace: Vec<f64>,
    /// Direction variance of each epoch's gradients; `None` when fewer than
    /// two of them were nonzero.
    pub gdv_trace: Vec<Option<f64>>,
    /// Zero gradients left out of the direction variance, over all epochs.
    pub gdv_excluded: usize,
    /// Mean predicted probability of class 0 on the test set.
    pub mean_test_prediction: f64,
    pub steps: usize,
}

impl TrainReport {
    /// Average of the defined entries of the GDV trace.
    pub fn mean_gdv(&self) -> Option<f64> {
        let vals: Vec<f64> = self.gdv_trace.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Batch loss context with any self-generated targets held fixed.
struct Batch<'a> {
    design: DMatrix<f64>,
    targets: Vec<&'a ProbVector>,
    /// Hardened self-targets and weak-label weight for AUX.
    aux: Option<(Vec<ProbVector>, f64)>,
}

impl Batch<'_> {
    fn loss_and_dz(&self, loss: &LossSpec, params: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let probs = model::probabilities(&self.design, params);
        let n = probs.len() as f64;
        let mut total = 0.0;
        let mut dz = DVector::zeros(probs.len());
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Ok((f64::NAN, dz));
            }
            let yhat = ProbVector::binary(p)?;
            let y = self.targets[i];
            let (l, dp) = match &self.aux {
                Some((hard, beta)) => {
                    let (lw, gw) = LossSpec::Ce.point(y, &yhat)?;
                    let (lh, gh) = LossSpec::Ce.point(&hard[i], &yhat)?;
                    (beta * lw + (1.0 - beta) * lh, beta * gw + (1.0 - beta) * gh)
                }
                None => loss.point(y, &yhat)?,
            };
            total += l;
            dz[i] = dp * p * (1.0 - p) / n;
        }
        Ok((total / n, dz))
    }

    fn loss(&self, loss: &LossSpec, params: &DVector<f64>) -> Result<f64> {
        Ok(self.loss_and_dz(loss, params)?.0)
    }

    fn gradient(&self, loss: &LossSpec, params: &DVector<f64>, mode: GradientMode) -> Result<(f64, DVector<f64>)> {
        let (value, dz) = self.loss_and_dz(loss, params)?;
        match mode {
            GradientMode::Analytic => Ok((value, self.design.tr_mul(&dz))),
            GradientMode::Numerical => {
                let mut grad = DVector::zeros(params.len());
                let mut probe = params.clone();
                for k in 0..params.len() {
                    let h = NUMERICAL_STEP * params[k].abs().max(1.0);
                    probe[k] = params[k] + h;
                    let up = self.loss(loss, &probe)?;
                    probe[k] = params[k] - h;
                    let down = self.loss(loss, &probe)?;
                    probe[k] = params[k];
                    grad[k] = (up - down) / (2.0 * h);
                }
                Ok((value, grad))
            }
        }
    }
}

const NUMERICAL_STEP: f64 = 1e-6;

fn build_batch<'a>(
    model: &LinearProbeModel,
    design: &DMatrix<f64>,
    targets: &'a [ProbVector],
    rows: &[usize],
    loss: &LossSpec,
    step: usize,
    total_steps: usize,
) -> Result<Batch<'a>> {
    let design = design.select_rows(rows.iter());
    let batch_targets = rows.iter().map(|&r| &targets[r]).collect();
    let aux = match loss {
        LossSpec::Aux(cfg) => {
            let preds: Vec<ProbVector> = model
                .probabilities(&design)
                .into_iter()
                .map(ProbVector::binary)
                .collect::<Result<_>>()?;
            let t = losses::aux_threshold(&preds)?;
            let hard = preds.iter().map(|p| losses::harden(p, t)).collect();
            Some((hard, cfg.beta(step, total_steps)))
        }
        _ => None,
    };
    Ok(Batch {
        design,
        targets: batch_targets,
        aux,
    })
}

/// Loss and parameter gradient of `model` on the given rows of `inputs`.
pub fn batch_gradient(
    model: &LinearProbeModel,
    inputs: &DMatrix<f64>,
    targets: &[ProbVector],
    rows: &[usize],
    loss: &LossSpec,
    mode: GradientMode,
) -> Result<(f64, DVector<f64>)> {
    let design = model.design(inputs)?;
    let batch = build_batch(model, &design, targets, rows, loss, usize::MAX, usize::MAX)?;
    batch.gradient(loss, model.params(), mode)
}

/// Trains `model` in place on `(inputs, targets)` and evaluates it on `eval`.
///
/// Each epoch visits a fresh permutation of the training rows in full
/// batches; the remainder is dropped.
pub fn train(
    model: &mut LinearProbeModel,
    inputs: &DMatrix<f64>,
    targets: &[ProbVector],
    eval: &Dataset,
    loss: &LossSpec,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.nrows() != targets.len() {
        return Err(invalid(format!(
            "{} inputs but {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    if targets.iter().any(|t| t.len() != 2) {
        return Err(Error::Unsupported("the linear probe is binary".into()));
    }
    if cfg.batch_size > targets.len() {
        return Err(invalid(format!(
            "batch size {} exceeds the {} training examples",
            cfg.batch_size,
            targets.len()
        )));
    }
    let design = model.design(inputs)?;
    let theta0 = model.params().clone();
    let mut params = theta0.clone();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut rng = rng::stream(cfg.seed, 1);
    let per_epoch = targets.len() / cfg.batch_size;
    let mut order: Vec<usize> = (0..targets.len()).collect();

    let mut grad_norm_trace = Vec::new();
    let mut gdv_trace = Vec::new();
    let mut gdv_excluded = 0;
    let mut epoch_grads: Vec<Vec<f64>> = Vec::new();
    let mut close_epoch = |grads: &mut Vec<Vec<f64>>| {
        if grads.is_empty() {
            return;
        }
        let norms: f64 = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        grad_norm_trace.push(norms / grads.len() as f64);
        match optim::gdv(grads) {
            Ok(g) => {
                gdv_excluded += g.excluded;
                gdv_trace.push(Some(g.value));
            }
            Err(_) => {
                gdv_excluded += grads.iter().filter(|g| g.iter().all(|&v| v == 0.0)).count();
                gdv_trace.push(None);
            }
        }
        grads.clear();
    };

    for step in 0..cfg.steps {
        let slot = step % per_epoch;
        if slot == 0 {
            close_epoch(&mut epoch_grads);
            order.shuffle(&mut rng);
        }
        let rows = &order[slot * cfg.batch_size..(slot + 1) * cfg.batch_size];
        model.set_params(params.clone())?;
        let batch = build_batch(model, &design, targets, rows, loss, step, cfg.steps)?;
        let (value, grad) = batch.gradient(loss, &params, cfg.gradient)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            model.set_params(theta0)?;
            return Err(Error::Diverged { step, loss: value });
        }
        opt.step(&mut params, &grad);
        epoch_grads.push(grad.as_slice().to_vec());
    }
    close_epoch(&mut epoch_grads);
    if params.iter().any(|v| !v.is_finite()) {
        model.set_params(theta0)?;
        return Err(Error::Diverged {
            step: cfg.steps,
            loss: f64::NAN,
        });
    }
    model.set_params(params)?;

    let eval_design = model.design(&eval.x)?;
    let probs = model.probabilities(&eval_design);
    Ok(TrainReport {
        loss: loss.name().to_string(),
        alpha: None,
        accuracy: model::accuracy(&probs, &eval.class),
        param_distance: optim::param_distance(model.params().as_slice(), theta0.as_slice())?,
        grad_norm_trace,
        gdv_trace,
        gdv_excluded,
        mean_test_prediction: probs.iter().sum::<f64>() / probs.len().max(1) as f64,
        steps: cfg.steps,
    })
}
