//! Dual-mean ensembles and the cross-entropy bias-variance estimator.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::losses::{ce, kl};
use crate::simplex::ProbVector;

/// `exp(mean log p)`, renormalized: the averaged log-probability ensemble.
pub fn ensemble_dual_mean_prediction(predictions: &[ProbVector]) -> Result<ProbVector> {
    let first = predictions.first().ok_or_else(|| invalid("ensemble needs at least one prediction"))?;
    let k = first.len();
    if predictions.iter().any(|p| p.len() != k) {
        return Err(invalid("ensemble members disagree on the number of classes"));
    }
    let n = predictions.len() as f64;
    let mean_log: Vec<f64> = (0..k)
        .map(|c| predictions.iter().map(|p| p.get(c).ln()).sum::<f64>() / n)
        .collect();
    let max = mean_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ProbVector::from_weights(mean_log.iter().map(|l| (l - max).exp()).collect())
}

/// Bias and variance of repeated runs at one test point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasVariance {
    /// `KL(truth, π̂)` with `π̂` the dual-mean ensemble of the runs.
    pub bias: f64,
    /// Mean over runs of `KL(π̂, run)`.
    pub variance: f64,
    /// Mean over runs of `CE(truth, run)`.
    pub mean_ce: f64,
}

impl BiasVariance {
    /// `bias + variance − mean_ce`; vanishes up to the entropy of the
    /// clamped one-hot label.
    pub fn identity_residual(&self) -> f64 {
        self.bias + self.variance - self.mean_ce
    }
}

pub fn bias_variance_estimate(runs: &[ProbVector], truth: &ProbVector) -> Result<BiasVariance> {
    if runs.len() < 2 {
        return Err(invalid(format!("bias-variance needs at least two runs, got {}", runs.len())));
    }
    let center = ensemble_dual_mean_prediction(runs)?;
    let n = runs.len() as f64;
    let mut variance = 0.0;
    let mut mean_ce = 0.0;
    for r in runs {
        variance += kl(&center, r)?;
        mean_ce += ce(truth, r)?;
    }
    Ok(BiasVariance {
        bias: kl(truth, &center)?,
        variance: variance / n,
        mean_ce: mean_ce / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::{BregmanGeometry, SampleSet};

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn ensemble_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        let e = ensemble_dual_mean_prediction(&[p.clone(), p.clone(), p.clone()]).unwrap();
        for (a, b) in e.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        let e = ensemble_dual_mean_prediction(&[pv(&[0.8, 0.2]), pv(&[0.2, 0.8])]).unwrap();
        assert!((e.get(0) - 0.5).abs() < 1e-15);
        assert!(ensemble_dual_mean_prediction(&[]).is_err());
    }

    #[test]
    fn ensemble_matches_dual_mean() {
        let members = vec![ProbVector::one_hot(3, 1).unwrap(), ProbVector::uniform(3).unwrap()];
        let e = ensemble_dual_mean_prediction(&members).unwrap();
        let g = BregmanGeometry::negative_entropy(3).unwrap();
        let set = SampleSet::uniform(members.iter().map(|m| m.as_slice().to_vec()).collect()).unwrap();
        let dm = g.dual_mean(&set).unwrap();
        for (a, b) in e.as_slice().iter().zip(&dm) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn bias_variance_examples() {
        let truth = ProbVector::one_hot(2, 0).unwrap();
        let r = pv(&[0.7, 0.3]);
        let same = bias_variance_estimate(&[r.clone(), r.clone()], &truth).unwrap();
        assert!(same.variance.abs() < 1e-15);

        let perfect = bias_variance_estimate(&[truth.clone(), truth.clone()], &truth).unwrap();
        assert!(perfect.bias.abs() < 1e-9 && perfect.variance.abs() < 1e-9);

        let bv = bias_variance_estimate(&[pv(&[0.8, 0.2]), pv(&[0.6, 0.4])], &truth).unwrap();
        let expected = -(0.8f64.ln() + 0.6f64.ln()) / 2.0;
        assert!((expected - 0.3669845875401002).abs() < 1e-15);
        assert!((bv.bias + bv.variance - expected).abs() < 1e-9);
        let gm = [(0.8f64 * 0.6).sqrt(), (0.2f64 * 0.4).sqrt()];
        let center = gm[0] / (gm[0] + gm[1]);
        assert!((bv.bias + center.ln()).abs() < 1e-9);
        assert!(bias_variance_estimate(&[r], &truth).is_err());
    }
}
