//! Finite teacher/student scenarios with an explicit joint distribution.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::bregman::{BregmanGeometry, GeometryKind, SampleSet};
use crate::error::{invalid, Error, Result};
use crate::simplex::ProbVector;

const TABLE_TOL: f64 = 1e-12;

/// Every ingredient of the weak-to-strong setup as a finite table.
///
/// Predictions are indexed `[model][input]`; `joint[i][j]` is the probability
/// of drawing teacher `i` together with student `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteScenario {
    pub input_probs: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
    pub teachers: Vec<Vec<Vec<f64>>>,
    pub students: Vec<Vec<Vec<f64>>>,
    pub joint: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > TABLE_TOL {
        return Err(invalid(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl FiniteScenario {
    pub fn new(
        input_probs: Vec<f64>,
        truth: Vec<Vec<f64>>,
        teachers: Vec<Vec<Vec<f64>>>,
        students: Vec<Vec<Vec<f64>>>,
        joint: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let sc = Self {
            input_probs,
            truth,
            teachers,
            students,
            joint,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Shape and normalization checks that do not depend on a geometry.
    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.input_probs, "input distribution")?;
        let n_in = self.input_probs.len();
        if self.truth.len() != n_in {
            return Err(invalid("one ground-truth label per input is required"));
        }
        let dim = self.truth[0].len();
        if dim == 0 {
            return Err(invalid("labels must be nonempty"));
        }
        if self.teachers.is_empty() || self.students.is_empty() {
            return Err(invalid("at least one teacher and one student are required"));
        }
        for model in self.teachers.iter().chain(&self.students) {
            if model.len() != n_in {
                return Err(invalid("every model needs one prediction per input"));
            }
        }
        let all_points = self
            .truth
            .iter()
            .chain(self.teachers.iter().flatten())
            .chain(self.students.iter().flatten());
        for p in all_points {
            if p.len() != dim {
                return Err(invalid("all predictions must share one dimension"));
            }
        }
        if self.joint.len() != self.teachers.len() || self.joint.iter().any(|r| r.len() != self.students.len()) {
            return Err(invalid("joint table must be teachers × students"));
        }
        let flat: Vec<f64> = self.joint.iter().flatten().copied().collect();
        check_distribution(&flat, "joint table")
    }

    /// Rejects scenarios with a point outside the domain of `g`.
    pub fn check_domain(&self, g: &BregmanGeometry) -> Result<()> {
        self.validate()?;
        let points = self
            .truth
            .iter()
            .chain(self.teachers.iter().flatten())
            .chain(self.students.iter().flatten());
        for p in points {
            g.check_point(p)?;
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.input_probs.len()
    }

    pub fn n_teachers(&self) -> usize {
        self.teachers.len()
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn dim(&self) -> usize {
        self.truth[0].len()
    }

    pub fn teacher_marginal(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn student_marginal(&self) -> Vec<f64> {
        (0..self.n_students()).map(|j| self.joint.iter().map(|r| r[j]).sum()).collect()
    }

    /// `P(W = · | W′ = j)`, or `None` when student `j` has probability zero.
    pub fn posterior(&self, j: usize) -> Option<Vec<f64>> {
        let col: Vec<f64> = self.joint.iter().map(|r| r[j]).collect();
        let total: f64 = col.iter().sum();
        (total > 0.0).then(|| col.iter().map(|v| v / total).collect())
    }

    /// Posterior over teachers as a sample set of their predictions at `x`.
    pub fn posterior_teachers(&self, j: usize, x: usize) -> Option<SampleSet> {
        let post = self.posterior(j)?;
        let points = self.teachers.iter().map(|t| t[x].clone()).collect();
        // Renormalize so the weights pass the sample-set check exactly.
        let total: f64 = post.iter().sum();
        SampleSet::new(points, post.iter().map(|p| p / total).collect()).ok()
    }

    /// Same models with `P_W ⊗ P_{W′}` in place of the joint table.
    pub fn product_coupling(&self) -> Self {
        let pw = self.teacher_marginal();
        let ps = self.student_marginal();
        let joint = pw.iter().map(|a| ps.iter().map(|b| a * b).collect()).collect();
        Self {
            joint,
            ..self.clone()
        }
    }

    /// Replaces every student's predictions by the posterior mean of the
    /// teachers (`dual = false`) or their posterior dual mean (`dual = true`).
    pub fn with_posterior_students(&self, g: &BregmanGeometry, dual: bool) -> Result<Self> {
        let mut out = self.clone();
        for j in 0..self.n_students() {
            for x in 0..self.n_inputs() {
                let Some(set) = self.posterior_teachers(j, x) else {
                    continue;
                };
                out.students[j][x] = if dual { g.dual_mean(&set)? } else { set.mean() };
            }
        }
        Ok(out)
    }

    /// Errors unless every student matches its posterior (dual) mean to 1e-10.
    pub fn check_posterior_students(&self, g: &BregmanGeometry, dual: bool) -> Result<()> {
        let reference = self.with_posterior_students(g, dual)?;
        for (j, (a, b)) in self.students.iter().zip(&reference.students).enumerate() {
            for (x, (p, q)) in a.iter().zip(b).enumerate() {
                let gap = p.iter().zip(q).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                if gap > 1e-10 {
                    return Err(Error::Precondition(format!(
                        "student {j} at input {x} is {gap:e} away from its posterior {}mean",
                        if dual { "dual " } else { "" }
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draws a scenario with sizes taken from the generator's default ranges.
    pub fn random(kind: GeometryKind, rng: &mut ChaCha8Rng) -> Result<(Self, BregmanGeometry)> {
        let shape = ScenarioShape::random(rng);
        Self::random_with_shape(kind, shape, rng)
    }

    pub fn random_with_shape(
        kind: GeometryKind,
        shape: ScenarioShape,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Self, BregmanGeometry)> {
        shape.validate()?;
        let k = shape.classes;
        let geometry = match kind {
            GeometryKind::SquaredNorm => BregmanGeometry::squared_norm(k)?,
            GeometryKind::NegativeEntropy => BregmanGeometry::negative_entropy(k)?,
            GeometryKind::Mahalanobis => BregmanGeometry::mahalanobis(random_spd(k, rng))?,
        };
        let point = |rng: &mut ChaCha8Rng| random_point(kind, k, rng);
        let input_probs = flat_dirichlet(shape.inputs, rng);
        let truth = (0..shape.inputs).map(|_| point(rng)).collect::<Result<_>>()?;
        let teachers = (0..shape.teachers)
            .map(|_| (0..shape.inputs).map(|_| point(rng)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let students = (0..shape.students)
            .map(|_| (0..shape.inputs).map(|_| point(rng)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let flat = flat_dirichlet(shape.teachers * shape.students, rng);
        let joint = flat.chunks(shape.students).map(|c| c.to_vec()).collect();
        let sc = Self::new(input_probs, truth, teachers, students, joint)?;
        Ok((sc, geometry))
    }
}

/// Table sizes of a random scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioShape {
    pub teachers: usize,
    pub students: usize,
    pub inputs: usize,
    pub classes: usize,
}

impl ScenarioShape {
    /// Teachers in [1, 5], students in [1, 4], inputs in [2, 6], classes in [2, 8].
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            teachers: rng.random_range(1..=5),
            students: rng.random_range(1..=4),
            inputs: rng.random_range(2..=6),
            classes: rng.random_range(2..=8),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.teachers == 0 || self.students == 0 || self.inputs == 0 {
            return Err(invalid("scenario sizes must be positive"));
        }
        if self.classes < 2 {
            return Err(invalid("scenario needs at least two classes"));
        }
        Ok(())
    }
}

/// A draw from the flat Dirichlet on `n` coordinates, summing to one.
pub fn flat_dirichlet(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    // Push the rounding residue onto the largest entry.
    let residue = 1.0 - v.iter().sum::<f64>();
    let imax = (0..n).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
    if n > 0 {
        v[imax] += residue;
    }
    v
}

/// Uniform in the cube [−1, 1]^k for the flat geometries, clamped flat
/// Dirichlet for the simplex.
pub fn random_point(kind: GeometryKind, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(match kind {
        GeometryKind::NegativeEntropy => ProbVector::from_weights(flat_dirichlet(k, rng))?.into_inner(),
        _ => (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    })
}

/// `AAᵀ/k + I/2` with `A` uniform in [−1, 1].
pub fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..=1.0));
    let mut m = &a * a.transpose() / k as f64;
    for i in 0..k {
        m[(i, i)] += 0.5;
    }
    // Exact symmetry regardless of summation order.
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn random_scenarios_are_valid() {
        for seed in 0..50 {
            let mut r = rng::stream(seed, 0);
            for kind in [GeometryKind::SquaredNorm, GeometryKind::NegativeEntropy, GeometryKind::Mahalanobis] {
                let (sc, g) = FiniteScenario::random(kind, &mut r).unwrap();
                sc.check_domain(&g).unwrap();
                assert!((1..=5).contains(&sc.n_teachers()));
                assert!((1..=4).contains(&sc.n_students()));
                assert!((2..=6).contains(&sc.n_inputs()));
                assert!((2..=8).contains(&sc.dim()));
            }
        }
    }

    #[test]
    fn marginals_and_posteriors() {
        let p = |v: f64| vec![v, 1.0 - v];
        let sc = FiniteScenario::new(
            vec![0.5, 0.5],
            vec![p(0.9), p(0.2)],
            vec![vec![p(0.6), p(0.4)], vec![p(0.7), p(0.1)]],
            vec![vec![p(0.5), p(0.5)], vec![p(0.3), p(0.3)]],
            vec![vec![0.1, 0.3], vec![0.2, 0.4]],
        )
        .unwrap();
        let pw = sc.teacher_marginal();
        assert!((pw[0] - 0.4).abs() < 1e-15 && (pw[1] - 0.6).abs() < 1e-15);
        let post = sc.posterior(0).unwrap();
        assert!((post[0] - 1.0 / 3.0).abs() < 1e-15);
        let prod = sc.product_coupling();
        assert!((prod.joint[1][1] - 0.6 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        let p = vec![0.5, 0.5];
        let bad_joint = FiniteScenario::new(
            vec![1.0],
            vec![p.clone()],
            vec![vec![p.clone()]],
            vec![vec![p.clone()]],
            vec![vec![0.9]],
        );
        assert!(bad_joint.is_err());
        let bad_shape = FiniteScenario::new(vec![1.0], vec![p.clone()], vec![vec![p.clone()]], vec![vec![]], vec![vec![1.0]]);
        assert!(bad_shape.is_err());
        let boundary = FiniteScenario::new(
            vec![1.0],
            vec![vec![1.0, 0.0]],
            vec![vec![p.clone()]],
            vec![vec![p]],
            vec![vec![1.0]],
        )
        .unwrap();
        let g = BregmanGeometry::negative_entropy(2).unwrap();
        assert!(matches!(boundary.check_domain(&g), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut r = rng::stream(5, 1);
        for n in 1..20 {
            let v = flat_dirichlet(n, &mut r);
            assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
            assert!(v.iter().all(|x| *x >= 0.0));
        }
    }
}
