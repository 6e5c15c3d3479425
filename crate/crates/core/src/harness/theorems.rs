//! Exact evaluation of the misfit inequalities on finite scenarios.

use serde::Serialize;

use super::scenario::FiniteScenario;
use crate::bregman::{dot, BregmanGeometry, GeometryKind};
use crate::error::{Error, Result};
use crate::losses::{ce, entropy};
use crate::simplex::ProbVector;

/// Which argument order the student risk uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Student risk `E D(g, f′)`, misfit `E D(f′, f_W)`.
    Forward,
    /// Student risk `E D(f′, g)`, misfit `E D(f_W, f′)`.
    Reverse,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Reverse];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

/// Both sides of `lhs ≤ teacher_risk − misfit + epsilon`.
///
/// Dual differences entering `epsilon` are projected with
/// [`BregmanGeometry::project_dual_difference`], which leaves the cross term
/// unchanged and can only shrink the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremReport {
    pub lhs: f64,
    pub rhs: f64,
    pub teacher_risk: f64,
    pub misfit: f64,
    /// Cauchy–Schwarz residual.
    pub epsilon: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    /// The exact cross term that `epsilon` bounds in absolute value.
    pub inner_product: f64,
}

impl TheoremReport {
    /// `lhs − (teacher_risk − misfit + inner_product)`, zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        self.lhs - (self.teacher_risk - self.misfit + self.inner_product)
    }

    /// `lhs − (teacher_risk − misfit)`; zero when the student is the
    /// posterior (dual) mean.
    pub fn gain_gap(&self) -> f64 {
        self.lhs - (self.teacher_risk - self.misfit)
    }

    /// Whether `|inner_product| ≤ epsilon + tol`.
    pub fn epsilon_dominates(&self, tol: f64) -> bool {
        self.inner_product.abs() <= self.epsilon + tol
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| u - v).collect()
}

fn weighted_sum(points: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; points[0].len()];
    for (p, w) in points.iter().zip(weights) {
        for (a, v) in acc.iter_mut().zip(p.iter()) {
            *a += w * v;
        }
    }
    acc
}

fn evaluate(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<TheoremReport> {
    sc.check_domain(g)?;
    let (mut lhs, mut teacher, mut misfit, mut inner, mut a2, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let ps = sc.student_marginal();
    for x in 0..sc.n_inputs() {
        let mx = sc.input_probs[x];
        let truth = &sc.truth[x];
        let truth_dual = g.to_dual(truth)?;
        let preds: Vec<&[f64]> = sc.teachers.iter().map(|t| t[x].as_slice()).collect();
        let duals: Vec<Vec<f64>> = preds.iter().map(|p| g.to_dual(p)).collect::<Result<_>>()?;
        let dual_refs: Vec<&[f64]> = duals.iter().map(|d| d.as_slice()).collect();
        for (j, student) in sc.students.iter().enumerate() {
            let Some(post) = sc.posterior(j) else { continue };
            let fs = &student[x];
            let fs_dual = g.to_dual(fs)?;
            for (i, fw) in preds.iter().enumerate() {
                let w = mx * sc.joint[i][j];
                if w == 0.0 {
                    continue;
                }
                match direction {
                    Direction::Forward => {
                        lhs += w * g.divergence(truth, fs)?;
                        teacher += w * g.divergence(truth, fw)?;
                        misfit += w * g.divergence(fs, fw)?;
                    }
                    Direction::Reverse => {
                        lhs += w * g.divergence(fs, truth)?;
                        teacher += w * g.divergence(fw, truth)?;
                        misfit += w * g.divergence(fw, fs)?;
                    }
                }
            }
            let w = mx * ps[j];
            match direction {
                Direction::Forward => {
                    let mut dual_gap = sub(&weighted_sum(&dual_refs, &post), &fs_dual);
                    g.project_dual_difference(&mut dual_gap);
                    let primal_gap = sub(truth, fs);
                    inner += w * dot(&dual_gap, &primal_gap);
                    a2 += w * dot(&dual_gap, &dual_gap);
                    b2 += w * dot(&primal_gap, &primal_gap);
                }
                Direction::Reverse => {
                    let mut dual_gap = sub(&truth_dual, &fs_dual);
                    g.project_dual_difference(&mut dual_gap);
                    let primal_gap = sub(&weighted_sum(&preds, &post), fs);
                    inner += w * dot(&dual_gap, &primal_gap);
                    a2 += w * dot(&primal_gap, &primal_gap);
                    b2 += w * dot(&dual_gap, &dual_gap);
                }
            }
        }
    }
    let epsilon = a2.sqrt() * b2.sqrt();
    let rhs = teacher - misfit + epsilon;
    Ok(TheoremReport {
        lhs,
        rhs,
        teacher_risk: teacher,
        misfit,
        epsilon,
        slack: rhs - lhs,
        inner_product: inner,
    })
}

/// Student risk against teacher risk minus misfit, with the residual taken
/// from the teacher posterior given each student.
pub fn verify_theorem1(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<TheoremReport> {
    evaluate(sc, g, direction)
}

/// The same inequality with teacher and student drawn independently from
/// their marginals.
pub fn verify_theorem_a(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<TheoremReport> {
    evaluate(&sc.product_coupling(), g, direction)
}

/// Equality case: students must already be the posterior dual mean (forward)
/// or posterior mean (reverse) of the teachers.
pub fn verify_corollary1(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<TheoremReport> {
    sc.check_domain(g)?;
    sc.check_posterior_students(g, direction == Direction::Forward)?;
    evaluate(sc, g, direction)
}

/// Posterior-mean students matching `direction`.
pub fn posterior_mean_scenario(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<FiniteScenario> {
    sc.with_posterior_students(g, direction == Direction::Forward)
}

/// The entropy-geometry report re-derived from CE, RCE and entropy values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corollary3Report {
    pub report: TheoremReport,
    pub lhs_via_ce: f64,
    pub teacher_risk_via_ce: f64,
    pub misfit_via_ce: f64,
    pub slack_via_ce: f64,
}

impl Corollary3Report {
    pub fn slack_discrepancy(&self) -> f64 {
        (self.slack_via_ce - self.report.slack).abs()
    }
}

fn pv(p: &[f64]) -> Result<ProbVector> {
    ProbVector::new(p.to_vec())
}

/// Re-expresses every KL term as a cross-entropy minus an entropy and
/// rebuilds the slack from those pieces.
pub fn verify_corollary3(sc: &FiniteScenario, g: &BregmanGeometry, direction: Direction) -> Result<Corollary3Report> {
    if g.kind() != GeometryKind::NegativeEntropy {
        return Err(Error::Unsupported("cross-entropy form needs the negative-entropy geometry".into()));
    }
    let report = evaluate(sc, g, direction)?;
    let (mut lhs, mut teacher, mut misfit) = (0.0, 0.0, 0.0);
    for x in 0..sc.n_inputs() {
        let truth = pv(&sc.truth[x])?;
        for (i, t) in sc.teachers.iter().enumerate() {
            let fw = pv(&t[x])?;
            for (j, s) in sc.students.iter().enumerate() {
                let w = sc.input_probs[x] * sc.joint[i][j];
                let fs = pv(&s[x])?;
                match direction {
                    Direction::Forward => {
                        lhs += w * (ce(&truth, &fs)? - entropy(&truth));
                        teacher += w * (ce(&truth, &fw)? - entropy(&truth));
                        misfit += w * (ce(&fs, &fw)? - entropy(&fs));
                    }
                    Direction::Reverse => {
                        // RCE(g, f) = CE(f, g).
                        lhs += w * (crate::losses::rce(&truth, &fs)? - entropy(&fs));
                        teacher += w * (crate::losses::rce(&truth, &fw)? - entropy(&fw));
                        misfit += w * (ce(&fw, &fs)? - entropy(&fw));
                    }
                }
            }
        }
    }
    Ok(Corollary3Report {
        report,
        lhs_via_ce: lhs,
        teacher_risk_via_ce: teacher,
        misfit_via_ce: misfit,
        slack_via_ce: teacher - misfit + report.epsilon - lhs,
    })
}

/// Per-input terms of the squared-loss misfit split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eq10Row {
    pub input: usize,
    /// `E‖f′ − E[f_W | W′]‖²`
    pub lhs: f64,
    /// `E‖f′ − f_W‖²`
    pub misfit: f64,
    /// `E‖f_W − E[f_W | W′]‖²`
    pub cond_variance: f64,
}

impl Eq10Row {
    pub fn residual(&self) -> f64 {
        self.lhs - (self.misfit - self.cond_variance)
    }
}

/// Checks `E‖f′ − E[f_W|W′]‖² = E‖f′ − f_W‖² − E‖f_W − E[f_W|W′]‖²` input by
/// input, each term enumerated on its own.
pub fn epsilon_decomposition_check(sc: &FiniteScenario, g: &BregmanGeometry) -> Result<Vec<Eq10Row>> {
    if g.kind() != GeometryKind::SquaredNorm {
        return Err(Error::Unsupported("the misfit split is specific to the squared norm".into()));
    }
    sc.check_domain(g)?;
    let ps = sc.student_marginal();
    let mut rows = Vec::with_capacity(sc.n_inputs());
    for x in 0..sc.n_inputs() {
        let preds: Vec<&[f64]> = sc.teachers.iter().map(|t| t[x].as_slice()).collect();
        let cond: Vec<Option<Vec<f64>>> = (0..sc.n_students())
            .map(|j| sc.posterior(j).map(|post| weighted_sum(&preds, &post)))
            .collect();

        let mut lhs = 0.0;
        for (j, s) in sc.students.iter().enumerate() {
            if let Some(c) = &cond[j] {
                lhs += ps[j] * sq_dist(&s[x], c);
            }
        }
        let mut misfit = 0.0;
        for (i, t) in sc.teachers.iter().enumerate() {
            for (j, s) in sc.students.iter().enumerate() {
                misfit += sc.joint[i][j] * sq_dist(&s[x], &t[x]);
            }
        }
        let mut cond_variance = 0.0;
        for (i, t) in sc.teachers.iter().enumerate() {
            for (j, c) in cond.iter().enumerate() {
                if let Some(c) = c {
                    cond_variance += sc.joint[i][j] * sq_dist(&t[x], c);
                }
            }
        }
        rows.push(Eq10Row {
            input: x,
            lhs,
            misfit,
            cond_variance,
        });
    }
    Ok(rows)
}

/// Gains of the ideal CE and RCE students over the teacher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop1Report {
    /// `E CE(g, f_W) − E CE(g, f′)` for the posterior dual-mean student.
    pub ce_gain: f64,
    /// `E KL(f′, f_W)` for the same student.
    pub ce_misfit: f64,
    /// `E RCE(g, f_W) − E RCE(g, f′)` for the posterior-mean student.
    pub rce_gain: f64,
    /// `E KL(f_W, g) − E KL(f′, g) = E KL(f_W, f′)` for the posterior-mean student.
    pub reverse_kl_gain: f64,
    /// `E H(f′) − E H(f_W)` for the posterior-mean student.
    pub entropy_gap: f64,
}

impl Prop1Report {
    pub fn ce_discrepancy(&self) -> f64 {
        (self.ce_gain - self.ce_misfit).abs()
    }

    /// How far `reverse_kl_gain − rce_gain` is from `entropy_gap`.
    pub fn entropy_gap_discrepancy(&self) -> f64 {
        (self.reverse_kl_gain - self.rce_gain - self.entropy_gap).abs()
    }
}

/// Builds both ideal students from the teacher posterior and compares their
/// gains under CE and RCE.
pub fn verify_prop1(sc: &FiniteScenario) -> Result<Prop1Report> {
    let g = BregmanGeometry::negative_entropy(sc.dim())?;
    sc.check_domain(&g)?;
    let ce_sc = sc.with_posterior_students(&g, true)?;
    let rce_sc = sc.with_posterior_students(&g, false)?;
    let mut r = Prop1Report {
        ce_gain: 0.0,
        ce_misfit: 0.0,
        rce_gain: 0.0,
        reverse_kl_gain: 0.0,
        entropy_gap: 0.0,
    };
    for x in 0..sc.n_inputs() {
        let truth = pv(&sc.truth[x])?;
        for (i, t) in sc.teachers.iter().enumerate() {
            let fw = pv(&t[x])?;
            for j in 0..sc.n_students() {
                let w = sc.input_probs[x] * sc.joint[i][j];
                if w == 0.0 {
                    continue;
                }
                let dm = pv(&ce_sc.students[j][x])?;
                let m = pv(&rce_sc.students[j][x])?;
                r.ce_gain += w * (ce(&truth, &fw)? - ce(&truth, &dm)?);
                r.ce_misfit += w * g.divergence(dm.as_slice(), fw.as_slice())?;
                r.rce_gain += w * (crate::losses::rce(&truth, &fw)? - crate::losses::rce(&truth, &m)?);
                r.reverse_kl_gain += w * g.divergence(fw.as_slice(), m.as_slice())?;
                r.entropy_gap += w * (entropy(&m) - entropy(&fw));
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn p(v: f64) -> Vec<f64> {
        vec![v, 1.0 - v]
    }

    #[test]
    fn single_teacher_reduces_to_model_gap() {
        let sc = FiniteScenario::new(
            vec![0.3, 0.7],
            vec![vec![0.5, -1.0], vec![0.2, 0.2]],
            vec![vec![vec![0.1, 0.1], vec![-0.4, 0.9]]],
            vec![vec![vec![0.3, -0.2], vec![0.0, 0.5]], vec![vec![0.6, 0.6], vec![0.1, 0.1]]],
            vec![vec![0.4, 0.6]],
        )
        .unwrap();
        let g = BregmanGeometry::squared_norm(2).unwrap();
        for d in Direction::BOTH {
            let r = verify_theorem1(&sc, &g, d).unwrap();
            assert!(r.slack >= -1e-12);
            assert!(r.identity_residual().abs() < 1e-12);
            let gap: f64 = (0..2)
                .map(|x| {
                    sc.input_probs[x]
                        * (0.4 * sq_dist(&sc.students[0][x], &sc.teachers[0][x])
                            + 0.6 * sq_dist(&sc.students[1][x], &sc.teachers[0][x]))
                })
                .sum();
            assert!((r.misfit - gap).abs() < 1e-14);
        }
    }

    #[test]
    fn perfect_students_have_zero_risk() {
        let mut r = rng::stream(1, 0);
        let (mut sc, g) = FiniteScenario::random(GeometryKind::NegativeEntropy, &mut r).unwrap();
        for s in sc.students.iter_mut() {
            *s = sc.truth.clone();
        }
        for d in Direction::BOTH {
            let rep = verify_theorem1(&sc, &g, d).unwrap();
            assert_eq!(rep.lhs, 0.0);
            assert!(rep.slack >= 0.0);
        }
    }

    #[test]
    fn two_equal_teachers_mean_student() {
        let (p1, p2) = (vec![1.0, -0.5], vec![0.0, 0.5]);
        let sc = FiniteScenario::new(
            vec![1.0],
            vec![vec![0.3, 0.3]],
            vec![vec![p1.clone()], vec![p2.clone()]],
            vec![vec![vec![0.0, 0.0]]],
            vec![vec![0.5], vec![0.5]],
        )
        .unwrap();
        let g = BregmanGeometry::squared_norm(2).unwrap();
        let sc = posterior_mean_scenario(&sc, &g, Direction::Reverse).unwrap();
        assert_eq!(sc.students[0][0], vec![0.5, 0.0]);
        let r = verify_corollary1(&sc, &g, Direction::Reverse).unwrap();
        let cond_var = 0.5 * sq_dist(&p1, &[0.5, 0.0]) + 0.5 * sq_dist(&p2, &[0.5, 0.0]);
        assert!((r.teacher_risk - r.lhs - cond_var).abs() < 1e-14);
        assert!(r.gain_gap().abs() < 1e-14);
    }

    #[test]
    fn geometric_mean_student_equality() {
        let sc = FiniteScenario::new(
            vec![0.4, 0.6],
            vec![p(0.7), p(0.2)],
            vec![vec![p(0.9), p(0.3)], vec![p(0.4), p(0.6)]],
            vec![vec![p(0.5), p(0.5)]],
            vec![vec![0.5], vec![0.5]],
        )
        .unwrap();
        let g = BregmanGeometry::negative_entropy(2).unwrap();
        let sc = posterior_mean_scenario(&sc, &g, Direction::Forward).unwrap();
        let gm = (0.9f64 * 0.4).sqrt();
        let gm2 = (0.1f64 * 0.6).sqrt();
        assert!((sc.students[0][0][0] - gm / (gm + gm2)).abs() < 1e-14);
        let r = verify_corollary1(&sc, &g, Direction::Forward).unwrap();
        assert!(r.gain_gap().abs() < 1e-9);
        assert!(r.epsilon < 1e-9);
    }

    #[test]
    fn corollary1_rejects_mismatched_students() {
        let mut r = rng::stream(2, 0);
        let (sc, g) = FiniteScenario::random(GeometryKind::SquaredNorm, &mut r).unwrap();
        assert!(matches!(verify_corollary1(&sc, &g, Direction::Reverse), Err(Error::Precondition(_))));
    }

    #[test]
    fn dirac_posterior_has_no_gain() {
        let sc = FiniteScenario::new(
            vec![1.0],
            vec![p(0.8)],
            vec![vec![p(0.6)], vec![p(0.3)]],
            vec![vec![p(0.6)], vec![p(0.3)]],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        )
        .unwrap();
        let g = BregmanGeometry::negative_entropy(2).unwrap();
        for d in Direction::BOTH {
            let r = verify_corollary1(&sc, &g, d).unwrap();
            assert!((r.lhs - r.teacher_risk).abs() < 1e-15);
            assert!(r.misfit.abs() < 1e-15);
        }
        let prop = verify_prop1(&sc).unwrap();
        assert!(prop.ce_gain.abs() < 1e-15);
        let rows = epsilon_decomposition_check(
            &FiniteScenario::new(
                vec![1.0],
                vec![vec![0.0]],
                vec![vec![vec![1.0]], vec![vec![2.0]]],
                vec![vec![vec![0.5]], vec![vec![-1.0]]],
                vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            )
            .unwrap(),
            &BregmanGeometry::squared_norm(1).unwrap(),
        )
        .unwrap();
        assert_eq!(rows[0].cond_variance, 0.0);
        assert_eq!(rows[0].lhs, rows[0].misfit);
    }

    #[test]
    fn product_coupling_matches_theorem_a() {
        let sc = FiniteScenario::new(
            vec![0.5, 0.5],
            vec![vec![0.1], vec![0.9]],
            vec![vec![vec![0.0], vec![1.0]], vec![vec![0.5], vec![0.2]]],
            vec![vec![vec![0.3], vec![0.3]], vec![vec![0.7], vec![-0.2]]],
            vec![vec![0.3 * 0.4, 0.3 * 0.6], vec![0.7 * 0.4, 0.7 * 0.6]],
        )
        .unwrap();
        let g = BregmanGeometry::squared_norm(1).unwrap();
        for d in Direction::BOTH {
            let a = verify_theorem1(&sc, &g, d).unwrap();
            let b = verify_theorem_a(&sc, &g, d).unwrap();
            assert!((a.lhs - b.lhs).abs() < 1e-15);
            assert!((a.misfit - b.misfit).abs() < 1e-15);
            assert!((a.epsilon - b.epsilon).abs() < 1e-14);
        }
    }

    #[test]
    fn independent_copy_has_positive_misfit() {
        let teachers = vec![vec![p(0.8)], vec![p(0.3)], vec![p(0.55)]];
        let pw = [0.2, 0.5, 0.3];
        let joint = pw.iter().map(|a| pw.iter().map(|b| a * b).collect()).collect();
        let sc = FiniteScenario::new(vec![1.0], vec![p(0.6)], teachers.clone(), teachers, joint).unwrap();
        let g = BregmanGeometry::negative_entropy(2).unwrap();
        for d in Direction::BOTH {
            assert!(verify_theorem_a(&sc, &g, d).unwrap().misfit > 0.0);
        }
    }

    #[test]
    fn prop1_entropy_gap_example() {
        let sc = FiniteScenario::new(
            vec![1.0],
            vec![p(0.7)],
            vec![vec![p(0.9)], vec![p(0.1)]],
            vec![vec![p(0.5)]],
            vec![vec![0.5], vec![0.5]],
        )
        .unwrap();
        let r = verify_prop1(&sc).unwrap();
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((h - 0.3250829733914482).abs() < 1e-15);
        let expected = std::f64::consts::LN_2 - h;
        assert!((expected - 0.3680642071684971).abs() < 1e-15);
        assert!((r.entropy_gap - expected).abs() < 1e-9);
        assert!(r.entropy_gap_discrepancy() < 1e-9);
        assert!(r.ce_discrepancy() < 1e-9);
    }

    #[test]
    fn identical_teachers_have_no_gain() {
        let sc = FiniteScenario::new(
            vec![0.5, 0.5],
            vec![p(0.7), p(0.1)],
            vec![vec![p(0.6), p(0.2)], vec![p(0.6), p(0.2)]],
            vec![vec![p(0.5), p(0.5)]],
            vec![vec![0.25], vec![0.75]],
        )
        .unwrap();
        let r = verify_prop1(&sc).unwrap();
        assert!(r.ce_gain.abs() < 1e-12 && r.rce_gain.abs() < 1e-12 && r.entropy_gap.abs() < 1e-12);
    }

    #[test]
    fn corollary3_needs_entropy_geometry() {
        let mut r = rng::stream(3, 0);
        let (sc, g) = FiniteScenario::random(GeometryKind::SquaredNorm, &mut r).unwrap();
        assert!(verify_corollary3(&sc, &g, Direction::Forward).is_err());
        assert!(epsilon_decomposition_check(&sc, &BregmanGeometry::negative_entropy(sc.dim()).unwrap()).is_err());
    }
}
