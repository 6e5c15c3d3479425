//! Closed-form misfit bound, its Marchenko–Pastur integral representation
//! and the monotonicity sweep.

use serde::Serialize;

use super::quadrature::{integrate, Quadrature};
use crate::error::{invalid, Result};

const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_INTERVALS: usize = 4096;

fn check_params(eta0: f64, gamma: f64) -> Result<()> {
    if !(eta0.is_finite() && eta0 > 0.0) {
        return Err(invalid(format!("eta0 must be positive and finite, got {eta0}")));
    }
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(invalid(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(())
}

/// h(η₀, γ) = [η₀(γ+1) + (γ−1)²] / [2√(γ² − 2(1−η₀)γ + (η₀+1)²)] − (γ−1)/2.
pub fn h_closed_form(eta0: f64, gamma: f64) -> Result<f64> {
    check_params(eta0, gamma)?;
    Ok(h_unchecked(eta0, gamma))
}

fn h_unchecked(eta0: f64, gamma: f64) -> f64 {
    let g1 = gamma - 1.0;
    let disc = gamma * gamma - 2.0 * (1.0 - eta0) * gamma + (eta0 + 1.0) * (eta0 + 1.0);
    (eta0 * (gamma + 1.0) + g1 * g1) / (2.0 * disc.sqrt()) - 0.5 * g1
}

/// Support [γ₋, γ₊] of the MP law with ratio 1/γ, as (center, half-width).
fn mp_support(gamma: f64) -> (f64, f64) {
    let s = (1.0 / gamma).sqrt();
    let lo = (1.0 - s) * (1.0 - s);
    let hi = (1.0 + s) * (1.0 + s);
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// ∫ g(λ) ρ(λ) dλ against the MP density ρ with ratio 1/γ, after the change
/// of variables λ = c + r cos θ that removes the square-root endpoints.
fn mp_expectation<F: Fn(f64) -> f64>(gamma: f64, g: F) -> Result<Quadrature> {
    let (c, r) = mp_support(gamma);
    let scale = gamma / (2.0 * std::f64::consts::PI);
    integrate(
        |theta| {
            let s = theta.sin();
            let lambda = c + r * theta.cos();
            scale * r * r * s * s / lambda * g(lambda)
        },
        0.0,
        std::f64::consts::PI,
        QUAD_TOL,
        QUAD_MAX_INTERVALS,
    )
}

/// Quadrature of (γ/2π)·√((γ₊−λ)(λ−γ₋)) / (λ(1+(γ/η₀)λ)²) over the MP support.
pub fn mp_integral(eta0: f64, gamma: f64) -> Result<f64> {
    mp_integral_detailed(eta0, gamma).map(|q| q.value)
}

/// As [`mp_integral`] with the quadrature error estimate and cost.
pub fn mp_integral_detailed(eta0: f64, gamma: f64) -> Result<Quadrature> {
    check_params(eta0, gamma)?;
    mp_expectation(gamma, |lambda| {
        let t = 1.0 + gamma * lambda / eta0;
        1.0 / (t * t)
    })
}

/// Total mass of the MP density with ratio 1/γ; equals one.
pub fn mp_density_mass(gamma: f64) -> Result<f64> {
    check_params(1.0, gamma)?;
    mp_expectation(gamma, |_| 1.0).map(|q| q.value)
}

/// One failed check in a monotonicity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub eta0: f64,
    pub gamma: f64,
    pub h: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that h stays in (0, 1) and strictly decreases along the sorted
/// γ grid for every η₀.
pub fn verify_monotonicity(eta0_grid: &[f64], gamma_grid: &[f64]) -> Result<MonotonicityReport> {
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(f64::total_cmp);
    let mut report = MonotonicityReport {
        checked: 0,
        violations: Vec::new(),
    };
    for &eta0 in eta0_grid {
        let mut prev: Option<f64> = None;
        for &gamma in &gammas {
            let h = h_closed_form(eta0, gamma)?;
            report.checked += 1;
            if !(h > 0.0 && h < 1.0) {
                report.violations.push(MonotonicityViolation {
                    eta0,
                    gamma,
                    h,
                    reason: "outside (0, 1)".into(),
                });
            }
            if let Some(p) = prev {
                if h >= p {
                    report.violations.push(MonotonicityViolation {
                        eta0,
                        gamma,
                        h,
                        reason: format!("not below the previous value {p}"),
                    });
                }
            }
            prev = Some(h);
        }
    }
    Ok(report)
}
