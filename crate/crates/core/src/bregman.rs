//! Bregman divergences, their dual coordinates and the two bias-variance
//! decompositions built on them.
//!
//! Three generators are supported:
//!
//! | geometry | φ(x) | ∇φ(x) | D(x, y) |
//! |---|---|---|---|
//! | squared norm | ‖x‖² | 2x | ‖x − y‖² |
//! | Mahalanobis | xᵀMx | 2Mx | (x − y)ᵀM(x − y) |
//! | negative entropy | Σ xᵢ log xᵢ | log x + 1 | KL(x ‖ y) |
//!
//! The negative-entropy geometry lives on the relative interior of the
//! probability simplex. Its inverse dual map is the softmax, so the dual
//! mean of a sample is the normalized weighted geometric mean. Points with a
//! zero coordinate are rejected; build them through [`ProbVector`] to get the
//! clamped representative.
//!
//! [`ProbVector`]: crate::simplex::ProbVector

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Tolerance on the coordinate sum of simplex points.
const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Which generator a geometry uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    SquaredNorm,
    Mahalanobis,
    NegativeEntropy,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::SquaredNorm => "squared-norm",
            GeometryKind::Mahalanobis => "mahalanobis",
            GeometryKind::NegativeEntropy => "negative-entropy",
        }
    }
}

#[derive(Debug, Clone)]
enum Generator {
    SquaredNorm,
    Mahalanobis {
        m: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    NegativeEntropy,
}

/// A strictly convex generator φ on a fixed dimension.
#[derive(Debug, Clone)]
pub struct BregmanGeometry {
    generator: Generator,
    dim: usize,
}

impl BregmanGeometry {
    pub fn squared_norm(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self {
            generator: Generator::SquaredNorm,
            dim,
        })
    }

    /// φ(x) = xᵀMx for a symmetric, strictly positive-definite `m`.
    pub fn mahalanobis(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim {
            return Err(invalid(format!(
                "Mahalanobis matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Mahalanobis matrix has non-finite entries"));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(invalid("Mahalanobis matrix is not symmetric"));
        }
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.min();
        if min <= 1e-12 * eig.eigenvalues.amax() {
            return Err(invalid(format!(
                "Mahalanobis matrix must be positive definite (smallest eigenvalue {min:e})"
            )));
        }
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| invalid("Mahalanobis matrix failed Cholesky factorization"))?;
        Ok(Self {
            generator: Generator::Mahalanobis { m, chol },
            dim,
        })
    }

    /// φ(x) = Σ xᵢ log xᵢ on the interior of the `dim`-class simplex.
    pub fn negative_entropy(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("the simplex needs at least two coordinates"));
        }
        Ok(Self {
            generator: Generator::NegativeEntropy,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GeometryKind {
        match self.generator {
            Generator::SquaredNorm => GeometryKind::SquaredNorm,
            Generator::Mahalanobis { .. } => GeometryKind::Mahalanobis,
            Generator::NegativeEntropy => GeometryKind::NegativeEntropy,
        }
    }

    /// Checks that `x` lies in the domain where ∇φ is defined.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "expected a point of dimension {}, got {}",
                self.dim,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("non-finite coordinate".into()));
        }
        if let Generator::NegativeEntropy = self.generator {
            if let Some(v) = x.iter().find(|v| **v <= 0.0) {
                return Err(Error::DomainViolation(format!(
                    "simplex coordinate {v} is not strictly positive"
                )));
            }
            let sum: f64 = x.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                return Err(Error::DomainViolation(format!(
                    "simplex point sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// The generator φ(x).
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match &self.generator {
            Generator::SquaredNorm => dot(x, x),
            Generator::Mahalanobis { m, .. } => {
                let v = DVector::from_column_slice(x);
                v.dot(&(m * &v))
            }
            Generator::NegativeEntropy => x.iter().map(|&v| v * v.ln()).sum(),
        })
    }

    /// Dual coordinates x* = ∇φ(x).
    pub fn to_dual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(match &self.generator {
            Generator::SquaredNorm => x.iter().map(|v| 2.0 * v).collect(),
            Generator::Mahalanobis { m, .. } => {
                let v = DVector::from_column_slice(x);
                (m * v * 2.0).as_slice().to_vec()
            }
            Generator::NegativeEntropy => x.iter().map(|v| v.ln() + 1.0).collect(),
        })
    }

    /// Inverse dual map ∇φ*(x*).
    pub fn from_dual(&self, dual: &[f64]) -> Result<Vec<f64>> {
        if dual.len() != self.dim {
            return Err(invalid(format!(
                "expected a dual vector of dimension {}, got {}",
                self.dim,
                dual.len()
            )));
        }
        if dual.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dual vector has non-finite coordinates"));
        }
        Ok(match &self.generator {
            Generator::SquaredNorm => dual.iter().map(|v| 0.5 * v).collect(),
            Generator::Mahalanobis { chol, .. } => {
                let rhs = DVector::from_column_slice(dual) * 0.5;
                chol.solve(&rhs).as_slice().to_vec()
            }
            Generator::NegativeEntropy => softmax(dual),
        })
    }

    /// D(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩, evaluated in closed form.
    pub fn divergence(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(match &self.generator {
            Generator::SquaredNorm => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Generator::Mahalanobis { chol, .. } => {
                let diff = DVector::from_iterator(self.dim, x.iter().zip(y).map(|(a, b)| a - b));
                let lt = chol.l().transpose() * diff;
                lt.norm_squared()
            }
            Generator::NegativeEntropy => x.iter().zip(y).map(|(&a, &b)| b * rel_entropy_term(a / b - 1.0)).sum(),
        })
    }

    /// Projects a difference of dual vectors onto the directions the domain
    /// can move in. On the simplex dual coordinates are only defined up to a
    /// multiple of the all-ones vector, so the mean is removed; elsewhere this
    /// is the identity.
    pub fn project_dual_difference(&self, v: &mut [f64]) {
        if let Generator::NegativeEntropy = self.generator {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    }

    /// D(x, z) − D(x, y) − D(y, z) + ⟨z* − y*, x − y⟩, identically zero.
    pub fn law_of_cosines_residual(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let ys = self.to_dual(y)?;
        let zs = self.to_dual(z)?;
        let cross: f64 = zs
            .iter()
            .zip(&ys)
            .zip(x.iter().zip(y))
            .map(|((zd, yd), (xv, yv))| (zd - yd) * (xv - yv))
            .sum();
        Ok(self.divergence(x, z)? - self.divergence(x, y)? - self.divergence(y, z)? + cross)
    }

    /// Dual expectation (E[X*])*, the minimizer of E[D(y, X)] over y.
    pub fn dual_mean(&self, s: &SampleSet) -> Result<Vec<f64>> {
        self.check_dim(s)?;
        let mut acc = vec![0.0; self.dim];
        for (p, &w) in s.points.iter().zip(&s.weights) {
            for (a, d) in acc.iter_mut().zip(self.to_dual(p)?) {
                *a += w * d;
            }
        }
        self.from_dual(&acc)
    }

    /// E[D(X, y)] by direct summation.
    pub fn expected_divergence_from(&self, s: &SampleSet, y: &[f64]) -> Result<f64> {
        s.points
            .iter()
            .zip(&s.weights)
            .map(|(p, w)| Ok(w * self.divergence(p, y)?))
            .sum()
    }

    /// E[D(y, X)] by direct summation.
    pub fn expected_divergence_to(&self, y: &[f64], s: &SampleSet) -> Result<f64> {
        s.points
            .iter()
            .zip(&s.weights)
            .map(|(p, w)| Ok(w * self.divergence(y, p)?))
            .sum()
    }

    /// E[D(X, y)] = E[D(X, E X)] + D(E X, y).
    pub fn forward_decomposition(&self, s: &SampleSet, y: &[f64]) -> Result<ForwardDecomposition> {
        self.check_dim(s)?;
        self.check_point(y)?;
        let mean = s.mean();
        Ok(ForwardDecomposition {
            variance: self.expected_divergence_from(s, &mean)?,
            bias: self.divergence(&mean, y)?,
        })
    }

    /// E[D(y, X)] = D(y, Ě X) + E[D(Ě X, X)] with Ě the dual expectation.
    pub fn reverse_decomposition(&self, y: &[f64], s: &SampleSet) -> Result<ReverseDecomposition> {
        self.check_point(y)?;
        let dmean = self.dual_mean(s)?;
        Ok(ReverseDecomposition {
            bias: self.divergence(y, &dmean)?,
            dual_variance: self.expected_divergence_to(&dmean, s)?,
        })
    }

    fn check_dim(&self, s: &SampleSet) -> Result<()> {
        if s.dim() != self.dim {
            return Err(invalid(format!(
                "sample dimension {} does not match geometry dimension {}",
                s.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Parts of the forward (primal-mean) decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardDecomposition {
    pub variance: f64,
    pub bias: f64,
}

impl ForwardDecomposition {
    pub fn total(&self) -> f64 {
        self.variance + self.bias
    }
}

/// Parts of the reverse (dual-mean) decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseDecomposition {
    pub bias: f64,
    pub dual_variance: f64,
}

impl ReverseDecomposition {
    pub fn total(&self) -> f64 {
        self.bias + self.dual_variance
    }
}

/// A finite weighted distribution over points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sample set is empty"));
        }
        if points.len() != weights.len() {
            return Err(invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(invalid("sample points must share a positive dimension"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights on every point.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(invalid("sample set is empty"));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted arithmetic mean, the minimizer of E[D(X, y)] for every geometry.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += w * v;
            }
        }
        acc
    }
}

/// Weighted arithmetic mean of a sample set.
pub fn mean_minimizer(s: &SampleSet) -> Vec<f64> {
    s.mean()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// (1 + δ) log(1 + δ) − δ, with a series branch near zero so the result
/// never goes negative through cancellation.
fn rel_entropy_term(delta: f64) -> f64 {
    if delta.abs() < 1e-3 {
        let d2 = delta * delta;
        d2 * (0.5 - delta / 6.0 + d2 / 12.0 - d2 * delta / 20.0)
    } else {
        (1.0 + delta) * delta.ln_1p() - delta
    }
}
