//! Optimizers and update diagnostics.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(invalid(format!("unknown optimizer {other:?} (expected sgd or adam)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Per-run optimizer state.
#[derive(Debug, Clone)]
pub(crate) struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, lr: f64, dim: usize) -> Self {
        Self {
            kind,
            lr,
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut DVector<f64>, grad: &DVector<f64>) {
        match self.kind {
            Optimizer::Sgd => params.axpy(-self.lr, grad, 1.0),
            Optimizer::Adam => {
                self.t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(self.t);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Gradient direction variance of a set of gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gdv {
    /// Mean of `1 − cos(gᵢ, gⱼ)` over ordered pairs `i ≠ j`, in `[0, 2]`.
    pub value: f64,
    /// Zero-norm gradients left out of the average.
    pub excluded: usize,
}

/// Average pairwise `1 − cos` between gradients. Zero gradients have no
/// direction and are excluded; at least two nonzero ones must remain.
pub fn gdv<G: AsRef<[f64]>>(gradients: &[G]) -> Result<Gdv> {
    let dim = gradients.first().map(|g| g.as_ref().len()).unwrap_or(0);
    if gradients.iter().any(|g| g.as_ref().len() != dim) {
        return Err(invalid("gradients must share one dimension"));
    }
    let kept: Vec<(&[f64], f64)> = gradients
        .iter()
        .map(|g| {
            let g = g.as_ref();
            (g, g.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .filter(|(_, n)| *n > 0.0)
        .collect();
    let excluded = gradients.len() - kept.len();
    let n = kept.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "direction variance needs two nonzero gradients, got {n}"
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, na) = kept[i];
            let (b, nb) = kept[j];
            let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
            total += 2.0 * (1.0 - cos);
        }
    }
    Ok(Gdv {
        value: total / (n * (n - 1)) as f64,
        excluded,
    })
}

/// Euclidean distance between two parameter vectors.
pub fn param_distance(theta: &[f64], theta0: &[f64]) -> Result<f64> {
    if theta.len() != theta0.len() {
        return Err(invalid(format!(
            "parameter vectors differ in length ({} vs {})",
            theta.len(),
            theta0.len()
        )));
    }
    Ok(theta.iter().zip(theta0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gdv_examples() {
        let g = vec![1.0, 2.0, -0.5];
        assert!(gdv(&[g.clone(), g.clone(), g.clone()]).unwrap().value.abs() < 1e-15);
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        assert!((gdv(&[g.clone(), neg]).unwrap().value - 2.0).abs() < 1e-15);
        assert!((gdv(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gdv_excludes_zero_gradients() {
        let r = gdv(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(r.excluded, 1);
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(gdv(&[vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(gdv(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(param_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(param_distance(&[1.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(param_distance(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(param_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sgd_step() {
        let mut s = OptimizerState::new(Optimizer::Sgd, 0.5, 2);
        let mut p = DVector::from_vec(vec![1.0, 1.0]);
        s.step(&mut p, &DVector::from_vec(vec![2.0, -2.0]));
        assert_eq!(p.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut s = OptimizerState::new(Optimizer::Adam, 0.1, 2);
        let mut p = DVector::from_vec(vec![0.0, 0.0]);
        s.step(&mut p, &DVector::from_vec(vec![3.0, -0.01]));
        assert!((p[0] + 0.1).abs() < 1e-6 && (p[1] - 0.1).abs() < 1e-4);
    }
}
