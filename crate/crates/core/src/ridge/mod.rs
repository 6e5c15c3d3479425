//! Teacher–student ridge regression with random student features, and the
//! asymptotic misfit bound it is checked against.
//!
//! The teacher is linear in `x ∈ ℝ^{d_w}`. The student sees `W₁x` through a
//! frozen Gaussian feature map `W₁ ∈ ℝ^{d_s×d_w}` and fits its head by ridge
//! regression on the teacher's labels over `n` fresh inputs. With inputs
//! distributed as `N(0, I/d_w)` the population misfit of one trial reduces to
//! `‖(Θ − I)W‖² / d_w`, where `Θ = W₁ᵀ(W₁CW₁ᵀ + ηI)⁻¹W₁C` and `C = 𝐱′𝐱′ᵀ`.

mod quadrature;
mod theory;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

pub use quadrature::{integrate, Quadrature};
pub use theory::{
    h_closed_form, mp_density_mass, mp_integral, mp_integral_detailed, verify_monotonicity, MonotonicityReport,
    MonotonicityViolation,
};

/// Number of fresh draws attempted for a trial whose solve is singular.
const MAX_RETRIES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    /// Teacher input dimension.
    pub d_w: usize,
    /// Capacity ratio `d_s / d_w`.
    pub gamma: f64,
    /// Sample ratio `n / d_w`.
    pub n_ratio: f64,
    /// Scaled ridge coefficient; the solver uses `η = n_ratio · eta0`.
    pub eta0: f64,
    /// Teacher weight budget `E‖W‖²`.
    pub b: f64,
    pub seed: u64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            d_w: 200,
            gamma: 2.0,
            n_ratio: 20.0,
            eta0: 1.0,
            b: 1.0,
            seed: 0,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_w < 2 {
            return Err(invalid(format!("d_w must be at least 2, got {}", self.d_w)));
        }
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(invalid(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.n_ratio.is_finite() && self.n_ratio >= 1.0) {
            return Err(invalid(format!("n_ratio must be at least 1, got {}", self.n_ratio)));
        }
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(invalid(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(invalid(format!("B must be positive, got {}", self.b)));
        }
        Ok(())
    }

    pub fn d_s(&self) -> usize {
        (self.gamma * self.d_w as f64).round() as usize
    }

    pub fn n(&self) -> usize {
        (self.n_ratio * self.d_w as f64).round() as usize
    }

    pub fn eta(&self) -> f64 {
        self.n_ratio * self.eta0
    }

    /// Variance of each teacher weight, chosen so that `E‖W‖² = B`.
    pub fn teacher_scale(&self) -> f64 {
        self.b / self.d_w as f64
    }
}

/// `(AAᵀ + ηI)⁻¹ A y` for a `d_s × n` feature matrix `A`.
pub fn ridge_solve(features: &DMatrix<f64>, targets: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid(format!("ridge coefficient must be positive, got {eta}")));
    }
    if features.ncols() != targets.len() {
        return Err(invalid(format!(
            "{} feature columns but {} targets",
            features.ncols(),
            targets.len()
        )));
    }
    if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("ridge inputs must be finite"));
    }
    let mut gram = features * features.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += eta;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("ridge normal matrix is not positive definite".into()))?;
    Ok(chol.solve(&(features * targets)))
}

/// Gradient `A(Aᵀw − y) + ηw` of the objective `½‖Aᵀw − y‖² + ½η‖w‖²`.
pub fn ridge_gradient(features: &DMatrix<f64>, targets: &DVector<f64>, w: &DVector<f64>, eta: f64) -> DVector<f64> {
    features * (features.transpose() * w - targets) + w * eta
}

/// Random quantities of one trial.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    /// Teacher weights `W ∈ ℝ^{d_w}`.
    pub teacher: DVector<f64>,
    /// Student feature map `W₁ ∈ ℝ^{d_s×d_w}`.
    pub feature_map: DMatrix<f64>,
    /// Training inputs as columns of a `d_w × n` matrix.
    pub inputs: DMatrix<f64>,
}

impl TrialDraw {
    pub fn sample(cfg: &RidgeConfig, rng: &mut ChaCha8Rng) -> Self {
        let d_w = cfg.d_w;
        let sd_w = cfg.teacher_scale().sqrt();
        let sd = (1.0 / d_w as f64).sqrt();
        let teacher = DVector::from_fn(d_w, |_, _| sd_w * rng.sample::<f64, _>(StandardNormal));
        let feature_map = DMatrix::from_fn(cfg.d_s(), d_w, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let inputs = DMatrix::from_fn(d_w, cfg.n(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        Self {
            teacher,
            feature_map,
            inputs,
        }
    }
}

/// Fitted student of one trial.
#[derive(Debug, Clone)]
pub struct TrialFit {
    /// Ridge head `W₂ ∈ ℝ^{d_s}`.
    pub head: DVector<f64>,
    /// Student weights pulled back to input space, `W₁ᵀW₂ = ΘW`.
    pub effective: DVector<f64>,
    /// `‖ΘW − W‖² / d_w`.
    pub misfit: f64,
    /// `‖Θ − I‖²_F / d_w`, the misfit averaged over teachers with unit budget.
    pub operator_misfit: f64,
}

/// Fits the student head through the `d_s × d_s` Gram system.
pub fn fit_trial(cfg: &RidgeConfig, draw: &TrialDraw) -> Result<TrialFit> {
    let d_w = cfg.d_w;
    let w1 = &draw.feature_map;
    let cov = &draw.inputs * draw.inputs.transpose();
    let w1c = w1 * &cov;
    let mut gram = &w1c * w1.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += cfg.eta();
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("student Gram matrix is not positive definite".into()))?;
    let z = chol.solve(&w1c);
    let head = &z * &draw.teacher;
    let effective = w1.transpose() * &head;
    let mut theta = w1.transpose() * z;
    let misfit = (&effective - &draw.teacher).norm_squared() / d_w as f64;
    for i in 0..d_w {
        theta[(i, i)] -= 1.0;
    }
    let operator_misfit = theta.norm_squared() / d_w as f64;
    if !(misfit.is_finite() && operator_misfit.is_finite()) {
        return Err(Error::Singular("non-finite misfit".into()));
    }
    Ok(TrialFit {
        head,
        effective,
        misfit,
        operator_misfit,
    })
}

/// Outcome of one trial, including how many draws were rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub misfit: f64,
    pub operator_misfit: f64,
    pub retries: u64,
}

/// Runs trial `trial`, redrawing from a fresh stream when the solve is singular.
pub fn run_trial(cfg: &RidgeConfig, trial: usize) -> Result<TrialOutcome> {
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let seed = if attempt == 0 { cfg.seed } else { rng::derive(cfg.seed, attempt) };
        let mut r = rng::stream(seed, trial as u64);
        let draw = TrialDraw::sample(cfg, &mut r);
        match fit_trial(cfg, &draw) {
            Ok(fit) => {
                return Ok(TrialOutcome {
                    trial,
                    misfit: fit.misfit,
                    operator_misfit: fit.operator_misfit,
                    retries: attempt,
                })
            }
            Err(e @ Error::Singular(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisfitEstimate {
    /// Mean over trials of the per-trial population misfit.
    pub empirical_misfit: f64,
    /// `B · h(η₀, γ)`.
    pub bound: f64,
    pub h: f64,
    pub trials: usize,
    pub std_error: f64,
    /// `d_w · empirical_misfit / B`.
    pub normalized_misfit: f64,
    /// Mean of `‖Θ − I‖²_F / d_w`.
    pub operator_misfit: f64,
    /// Draws discarded because of a singular solve.
    pub retries: u64,
    pub per_trial: Vec<TrialOutcome>,
}

/// Monte Carlo estimate of the teacher–student misfit over `trials`
/// independent draws.
pub fn simulate_misfit(cfg: &RidgeConfig, trials: usize) -> Result<MisfitEstimate> {
    cfg.validate()?;
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let per_trial: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    let n = trials as f64;
    let mean = per_trial.iter().map(|t| t.misfit).sum::<f64>() / n;
    let std_error = if trials > 1 {
        let var = per_trial.iter().map(|t| (t.misfit - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let h = h_closed_form(cfg.eta0, cfg.gamma)?;
    Ok(MisfitEstimate {
        empirical_misfit: mean,
        bound: cfg.b * h,
        h,
        trials,
        std_error,
        normalized_misfit: cfg.d_w as f64 * mean / cfg.b,
        operator_misfit: per_trial.iter().map(|t| t.operator_misfit).sum::<f64>() / n,
        retries: per_trial.iter().map(|t| t.retries).sum(),
        per_trial,
    })
}

/// Direct Monte Carlo estimate of `E(xᵀ(ΘW − W))²` over `n_test` fresh
/// inputs `x ~ N(0, I/d_w)`, returned as (mean, standard error).
pub fn direct_misfit(fit: &TrialFit, teacher: &DVector<f64>, n_test: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let d_w = teacher.len();
    let sd = (1.0 / d_w as f64).sqrt();
    let diff = &fit.effective - teacher;
    let samples: Vec<f64> = (0..n_test)
        .map(|_| {
            let proj: f64 = diff.iter().map(|d| d * sd * rng.sample::<f64, _>(StandardNormal)).sum();
            proj * proj
        })
        .collect();
    let n = n_test as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
