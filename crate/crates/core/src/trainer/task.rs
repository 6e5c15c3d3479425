//! Two-class Gaussian mixture tasks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::rng;
use crate::simplex::ProbVector;

/// Class 0 is centred at `+μ`, class 1 at `−μ`, with `μ` spread evenly over
/// all coordinates so that `‖μ‖ = separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub d: usize,
    pub separation: f64,
    /// Per-coordinate noise standard deviation.
    pub sigma: f64,
    pub n_train: usize,
    pub n_pseudo: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            d: 16,
            separation: 2.0,
            sigma: 1.0,
            n_train: 64,
            n_pseudo: 1000,
            n_test: 2000,
            seed: 0,
        }
    }
}

/// Inputs as rows, with their true classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub class: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    /// Clamped one-hot ground-truth labels.
    pub fn one_hot_labels(&self) -> Vec<ProbVector> {
        self.class
            .iter()
            .map(|&c| ProbVector::one_hot(2, c).expect("binary class"))
            .collect()
    }
}

/// The three disjoint splits of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub train: Dataset,
    pub pseudo: Dataset,
    pub test: Dataset,
}

impl SyntheticTask {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(invalid("class separation must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("noise scale must be positive"));
        }
        for (name, n) in [("train", self.n_train), ("pseudo", self.n_pseudo), ("test", self.n_test)] {
            if n < 10 || n % 2 != 0 {
                return Err(invalid(format!("{name} split needs an even size of at least 10, got {n}")));
            }
        }
        Ok(())
    }

    /// Class mean `μ` of class 0.
    pub fn mean(&self) -> Vec<f64> {
        vec![self.separation / (self.d as f64).sqrt(); self.d]
    }

    /// Accuracy of the Bayes classifier restricted to the first `dims`
    /// coordinates, `Φ(‖μ_dims‖ / σ)`.
    pub fn bayes_accuracy(&self, dims: usize) -> f64 {
        let m = self.separation * (dims.min(self.d) as f64 / self.d as f64).sqrt();
        normal_cdf(m / self.sigma)
    }

    /// Draws `n` balanced samples.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
        let mu = self.mean();
        let mut class: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        class.shuffle(rng);
        let x = DMatrix::from_fn(n, self.d, |i, j| {
            let sign = if class[i] == 0 { 1.0 } else { -1.0 };
            sign * mu[j] + self.sigma * rng.sample::<f64, _>(StandardNormal)
        });
        Dataset { x, class }
    }

    pub fn generate(&self) -> Result<TaskData> {
        self.validate()?;
        let mut r = rng::stream(self.seed, 0);
        Ok(TaskData {
            train: self.sample(self.n_train, &mut r),
            pseudo: self.sample(self.n_pseudo, &mut r),
            test: self.sample(self.n_test, &mut r),
        })
    }
}

fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}
