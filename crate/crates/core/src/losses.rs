//! Entropy-family losses on probability vectors, their binary gradients and
//! the composite training losses used for weak-to-strong training.
//!
//! Throughout, `y` is the target (weak label) and `yhat` the student's
//! prediction. `rce` puts the label inside the logarithm:
//! `rce(y, ŷ) = −Σ ŷᵢ log yᵢ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::simplex::ProbVector;

fn check_pair(y: &ProbVector, yhat: &ProbVector) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(invalid(format!(
            "label has {} classes but prediction has {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

fn check_binary(y: &ProbVector, yhat: &ProbVector) -> Result<()> {
    check_pair(y, yhat)?;
    if y.len() != 2 {
        return Err(Error::Unsupported(format!(
            "analytic gradients are binary only, got {} classes",
            y.len()
        )));
    }
    Ok(())
}

/// Cross-entropy `−Σ yᵢ log ŷᵢ`.
pub fn ce(y: &ProbVector, yhat: &ProbVector) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(-y.as_slice().iter().zip(yhat.as_slice()).map(|(a, b)| a * b.ln()).sum::<f64>())
}

/// Reverse cross-entropy `−Σ ŷᵢ log yᵢ`.
pub fn rce(y: &ProbVector, yhat: &ProbVector) -> Result<f64> {
    ce(yhat, y)
}

/// `Σ yᵢ log(yᵢ / ŷᵢ)`.
pub fn kl(y: &ProbVector, yhat: &ProbVector) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.as_slice().iter().zip(yhat.as_slice()).map(|(a, b)| a * (a / b).ln()).sum())
}

/// Reverse KL, `kl(ŷ, y)`.
pub fn rkl(y: &ProbVector, yhat: &ProbVector) -> Result<f64> {
    kl(yhat, y)
}

/// Shannon entropy in nats.
pub fn entropy(y: &ProbVector) -> f64 {
    -y.as_slice().iter().map(|a| a * a.ln()).sum::<f64>()
}

/// Gradient of `ce` in the tied binary parameterization: entry `j` is the
/// derivative along `ŷⱼ` with the other coordinate set to `1 − ŷⱼ`.
pub fn grad_ce(y: &ProbVector, yhat: &ProbVector) -> Result<[f64; 2]> {
    check_binary(y, yhat)?;
    Ok(std::array::from_fn(|j| {
        let (a, b) = (y.get(j), yhat.get(j));
        -a / b + (1.0 - a) / (1.0 - b)
    }))
}

/// Gradient of `rce`; constant in `ŷ`.
pub fn grad_rce(y: &ProbVector, yhat: &ProbVector) -> Result<[f64; 2]> {
    check_binary(y, yhat)?;
    Ok(std::array::from_fn(|j| log_odds_against(y.get(j))))
}

/// Same as [`grad_ce`]: the label entropy does not depend on `ŷ`.
pub fn grad_kl(y: &ProbVector, yhat: &ProbVector) -> Result<[f64; 2]> {
    grad_ce(y, yhat)
}

pub fn grad_rkl(y: &ProbVector, yhat: &ProbVector) -> Result<[f64; 2]> {
    check_binary(y, yhat)?;
    Ok(std::array::from_fn(|j| log_odds_against(y.get(j)) - log_odds_against(yhat.get(j))))
}

fn log_odds_against(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Binary label smoothing `ŷⱼ = ½ + α(yⱼ − ½)`.
pub fn smooth_labels(y: &ProbVector, alpha: f64) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("smoothing factor {alpha} outside [0, 1]")));
    }
    if y.len() != 2 {
        return Err(Error::Unsupported(format!(
            "label smoothing is binary only, got {} classes",
            y.len()
        )));
    }
    if alpha == 1.0 {
        return Ok(y.clone());
    }
    let p: Vec<f64> = y.as_slice().iter().map(|v| 0.5 + alpha * (v - 0.5)).collect();
    ProbVector::new(p)
}

/// Binary confidence `|y₁ − ½|`.
pub fn confidence(y: &ProbVector) -> f64 {
    (y.get(0) - 0.5).abs()
}

/// Threshold separating the `eta_percent`% least confident labels.
///
/// With `k = round(η n / 100)` labels sorted by confidence, the threshold is
/// the midpoint between the k-th and (k+1)-th smallest confidence, so the k
/// least confident labels fall strictly below it when confidences are
/// distinct. `k = 0` gives 0 and `k = n` gives 1.
pub fn cace_threshold(labels: &[ProbVector], eta_percent: f64) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("cannot set a confidence threshold on an empty label set"));
    }
    if !(0.0..=100.0).contains(&eta_percent) {
        return Err(invalid(format!("quantile {eta_percent}% outside [0, 100]")));
    }
    let mut conf: Vec<f64> = labels.iter().map(confidence).collect();
    conf.sort_by(f64::total_cmp);
    let n = conf.len();
    let k = ((eta_percent * n as f64 / 100.0).round() as usize).min(n);
    Ok(match k {
        0 => 0.0,
        k if k == n => 1.0,
        k => 0.5 * (conf[k - 1] + conf[k]),
    })
}

/// Weights of the symmetric loss `λ_rce · rce + λ_ce · ce`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlWeights {
    pub lambda_rce: f64,
    pub lambda_ce: f64,
}

/// Auxiliary-confidence loss schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxConfig {
    pub beta_max: f64,
    pub warmup_fraction: f64,
}

impl AuxConfig {
    /// Linear warm-up from 0 to `beta_max` over the first `warmup_fraction`
    /// of training.
    pub fn beta(&self, step: usize, total_steps: usize) -> f64 {
        let ramp = self.warmup_fraction * total_steps as f64;
        if ramp <= 0.0 {
            return self.beta_max;
        }
        self.beta_max * (step as f64 / ramp).min(1.0)
    }
}

/// Parameters of the three composite losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeLossConfig {
    /// Confidence threshold below which CACE switches to RCE.
    pub cace_threshold: f64,
    pub sl: SlWeights,
    pub aux: AuxConfig,
}

impl Default for CompositeLossConfig {
    fn default() -> Self {
        Self {
            cace_threshold: 0.0,
            sl: SlWeights {
                lambda_rce: 1.0,
                lambda_ce: 1.0,
            },
            aux: AuxConfig {
                beta_max: 0.5,
                warmup_fraction: 0.2,
            },
        }
    }
}

impl CompositeLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cace_threshold) {
            return Err(invalid(format!("CACE threshold {} outside [0, 1]", self.cace_threshold)));
        }
        let SlWeights { lambda_rce, lambda_ce } = self.sl;
        if !(lambda_rce >= 0.0 && lambda_ce >= 0.0 && lambda_rce + lambda_ce > 0.0) {
            return Err(invalid("SL weights must be nonnegative with a positive sum"));
        }
        if !(0.0..=1.0).contains(&self.aux.beta_max) {
            return Err(invalid(format!("beta_max {} outside [0, 1]", self.aux.beta_max)));
        }
        if !(self.aux.warmup_fraction > 0.0 && self.aux.warmup_fraction <= 1.0) {
            return Err(invalid(format!(
                "warm-up fraction {} outside (0, 1]",
                self.aux.warmup_fraction
            )));
        }
        Ok(())
    }
}

/// RCE on low-confidence labels, CE otherwise.
pub fn cace(y: &ProbVector, yhat: &ProbVector, cfg: &CompositeLossConfig) -> Result<f64> {
    if confidence(y) < cfg.cace_threshold {
        rce(y, yhat)
    } else {
        ce(y, yhat)
    }
}

pub fn sl(y: &ProbVector, yhat: &ProbVector, cfg: &CompositeLossConfig) -> Result<f64> {
    Ok(cfg.sl.lambda_rce * rce(y, yhat)? + cfg.sl.lambda_ce * ce(y, yhat)?)
}

/// Hardening threshold on the first coordinate such that exactly half the
/// batch (rounded down) lies strictly above it, given distinct values.
pub fn aux_threshold(batch: &[ProbVector]) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("hardening threshold needs a nonempty batch"));
    }
    let mut first: Vec<f64> = batch.iter().map(|p| p.get(0)).collect();
    first.sort_by(|a, b| b.total_cmp(a));
    let h = first.len() / 2;
    Ok(if h == 0 { 1.0 } else { 0.5 * (first[h - 1] + first[h]) })
}

/// Clamped one-hot argmax of `yhat` when its first coordinate exceeds `t`.
pub fn harden(yhat: &ProbVector, t: f64) -> ProbVector {
    if yhat.get(0) > t {
        ProbVector::one_hot(yhat.len(), yhat.argmax()).expect("argmax is a valid class")
    } else {
        yhat.clone()
    }
}

/// `β·ce(y_weak, ŷ) + (1 − β)·ce(ŷ_hardened, ŷ)` with a precomputed threshold.
pub fn aux_with_threshold(y_weak: &ProbVector, yhat: &ProbVector, beta: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta {beta} outside [0, 1]")));
    }
    let target = harden(yhat, t);
    Ok(beta * ce(y_weak, yhat)? + (1.0 - beta) * ce(&target, yhat)?)
}

/// AUX loss with the hardening threshold taken from `batch`.
pub fn aux(y_weak: &ProbVector, yhat: &ProbVector, beta: f64, batch: &[ProbVector]) -> Result<f64> {
    let t = aux_threshold(batch)?;
    aux_with_threshold(y_weak, yhat, beta, t)
}

/// Smoothed and unsmoothed RCE population risks of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RceRisks {
    pub smoothed: f64,
    pub raw: f64,
}

/// `(0, Rα(f) − Rα(f*), R(f) − R(f*))`; the ordering `0 ≤ mid ≤ rhs` holds
/// when `f*` minimizes the smoothed risk.
pub fn rce_ordering_gap(f: RceRisks, fstar: RceRisks) -> (f64, f64, f64) {
    (0.0, f.smoothed - fstar.smoothed, f.raw - fstar.raw)
}

/// `Σ wᵢ rce(smooth(yᵢ, α), f(xᵢ))` over a finite binary task.
pub fn binary_rce_risk(labels: &[ProbVector], weights: &[f64], preds: &[ProbVector], alpha: f64) -> Result<f64> {
    if labels.len() != weights.len() || labels.len() != preds.len() {
        return Err(invalid("labels, weights and predictions must have equal length"));
    }
    labels
        .iter()
        .zip(weights)
        .zip(preds)
        .map(|((y, w), p)| Ok(w * rce(&smooth_labels(y, alpha)?, p)?))
        .sum()
}

/// Both risks of `preds` at smoothing level `alpha`.
pub fn binary_rce_risks(labels: &[ProbVector], weights: &[f64], preds: &[ProbVector], alpha: f64) -> Result<RceRisks> {
    Ok(RceRisks {
        smoothed: binary_rce_risk(labels, weights, preds, alpha)?,
        raw: binary_rce_risk(labels, weights, preds, 1.0)?,
    })
}
