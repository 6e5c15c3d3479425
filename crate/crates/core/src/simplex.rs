//! Points in the relative interior of the probability simplex.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lower clamp applied to every coordinate so that one-hot labels have finite
/// logarithms.
pub const CLAMP_EPS: f64 = 1e-12;

/// Tolerance on the input sum accepted by [`ProbVector::new`].
const INPUT_SUM_TOL: f64 = 1e-6;

/// A probability vector with `K >= 2` entries, each in `[ε, 1 - ε]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `probs` (nonnegative, summing to one within 1e-6) and clamps.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_SUM_TOL {
            return Err(invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self(clamp_to_interior(probs)))
    }

    /// Normalizes arbitrary nonnegative weights with a positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights)?;
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("weights have zero total mass"));
        }
        Ok(Self(clamp_to_interior(weights)))
    }

    /// Binary vector `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("binary probability {p} outside [0, 1]")));
        }
        Self::new(vec![p, 1.0 - p])
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid("a probability vector needs at least two classes"));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    /// Clamped one-hot vector for class `class` out of `k`.
    pub fn one_hot(k: usize, class: usize) -> Result<Self> {
        if class >= k {
            return Err(invalid(format!("class {class} out of range for {k} classes")));
        }
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_entries(v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(invalid("a probability vector needs at least two classes"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(invalid(format!("probability entry {x} is negative or not finite")));
    }
    Ok(())
}

/// Normalizes, then raises every coordinate to at least `CLAMP_EPS` while
/// rescaling the free coordinates so the total stays exactly one.
fn clamp_to_interior(mut v: Vec<f64>) -> Vec<f64> {
    let k = v.len();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);

    let mut pinned = vec![false; k];
    loop {
        let mut changed = false;
        for i in 0..k {
            if !pinned[i] && v[i] < CLAMP_EPS {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let free_mass: f64 = (0..k).filter(|&i| !pinned[i]).map(|i| v[i]).sum();
        let target = 1.0 - n_pinned as f64 * CLAMP_EPS;
        for i in 0..k {
            if pinned[i] {
                v[i] = CLAMP_EPS;
            } else {
                v[i] *= target / free_mass;
            }
        }
    }
    v
}
