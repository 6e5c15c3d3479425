//! Linear probes on frozen feature maps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::task::Dataset;
use crate::error::{invalid, Result};
use crate::simplex::ProbVector;

/// Frozen map from raw inputs to probe features.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    /// The first `dims` input coordinates.
    Identity { dims: usize },
    /// `x ↦ Rx` with a fixed `d_s × d` matrix `R`.
    Projection(DMatrix<f64>),
}

impl FeatureMap {
    /// Gaussian projection to `d_s` features with entry variance `1 / d_w`.
    pub fn random_projection(d_s: usize, d: usize, d_w: usize, rng: &mut ChaCha8Rng) -> Self {
        let sd = (1.0 / d_w as f64).sqrt();
        FeatureMap::Projection(DMatrix::from_fn(d_s, d, |_, _| sd * rng.sample::<f64, _>(StandardNormal)))
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dims } => *dims,
            FeatureMap::Projection(r) => r.nrows(),
        }
    }

    /// Features of every row of `x`, with a trailing column of ones for the bias.
    pub fn design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let raw = match self {
            FeatureMap::Identity { dims } => {
                if *dims > x.ncols() {
                    return Err(invalid(format!("identity map wants {dims} inputs, data has {}", x.ncols())));
                }
                x.columns(0, *dims).into_owned()
            }
            FeatureMap::Projection(r) => {
                if r.ncols() != x.ncols() {
                    return Err(invalid(format!("projection expects {} inputs, data has {}", r.ncols(), x.ncols())));
                }
                x * r.transpose()
            }
        };
        let cols = raw.ncols();
        Ok(raw.insert_column(cols, 1.0))
    }
}

/// `p(class 0 | x) = σ(wᵀφ(x) + b)` on a frozen feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbeModel {
    features: FeatureMap,
    /// Weights followed by the bias.
    params: DVector<f64>,
}

impl LinearProbeModel {
    /// Probe with all parameters zero.
    pub fn zeros(features: FeatureMap) -> Self {
        let p = features.dim() + 1;
        Self {
            features,
            params: DVector::zeros(p),
        }
    }

    /// Probe with iid `N(0, scale² / (p + 1))` parameters.
    pub fn random(features: FeatureMap, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let p = features.dim() + 1;
        let sd = scale / (p as f64).sqrt();
        let params = DVector::from_fn(p, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        Self { features, params }
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn params(&self) -> &DVector<f64> {
        &self.params
    }

    pub fn set_params(&mut self, params: DVector<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn weights(&self) -> DVector<f64> {
        self.params.rows(0, self.params.len() - 1).into_owned()
    }

    pub fn bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub fn design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.features.design(x)
    }

    /// Class-0 probabilities for the rows of a design matrix.
    pub fn probabilities(&self, design: &DMatrix<f64>) -> Vec<f64> {
        probabilities(design, &self.params)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<ProbVector>> {
        let design = self.design(x)?;
        self.probabilities(&design)
            .into_iter()
            .map(ProbVector::binary)
            .collect()
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let design = self.design(&data.x)?;
        Ok(accuracy(&self.probabilities(&design), &data.class))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn probabilities(design: &DMatrix<f64>, params: &DVector<f64>) -> Vec<f64> {
    (design * params).iter().map(|&z| sigmoid(z)).collect()
}

/// Fraction of rows whose predicted class (class 0 iff `p > ½`) is correct.
pub(crate) fn accuracy(probs: &[f64], class: &[usize]) -> f64 {
    let hits = probs
        .iter()
        .zip(class)
        .filter(|(&p, &c)| usize::from(p <= 0.5) == c)
        .count();
    hits as f64 / class.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn design_shapes() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let id = FeatureMap::Identity { dims: 2 };
        let d = id.design(&x).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 1.0, 4.0, 5.0, 1.0]));
        assert!(FeatureMap::Identity { dims: 4 }.design(&x).is_err());
        let proj = FeatureMap::random_projection(5, 3, 2, &mut rng::stream(0, 0));
        assert_eq!(proj.design(&x).unwrap().shape(), (2, 6));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probe_predicts_uniform() {
        let m = LinearProbeModel::zeros(FeatureMap::Identity { dims: 2 });
        let x = DMatrix::from_row_slice(1, 2, &[3.0, -1.0]);
        assert_eq!(m.predict(&x).unwrap()[0], ProbVector::uniform(2).unwrap());
        assert_eq!(m.bias(), 0.0);
        assert_eq!(m.weights().len(), 2);
    }
}
