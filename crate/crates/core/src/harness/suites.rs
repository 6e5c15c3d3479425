//! Randomized identity and inequality suites shared by the command-line
//! `verify` command and the test-suite.
//!
//! Each suite draws its inputs from per-item seeds derived from one master
//! seed, reduces every check to a nonnegative violation score and passes
//! when the largest score stays within its tolerance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    bias_variance_estimate, flat_dirichlet, posterior_mean_scenario, random_point, random_spd, verify_corollary1,
    verify_corollary3, verify_prop1, verify_theorem1, verify_theorem_a, Direction, FiniteScenario, TheoremReport,
};
use crate::bregman::{mean_minimizer, BregmanGeometry, GeometryKind, SampleSet};
use crate::error::Result;
use crate::rng;
use crate::simplex::ProbVector;

/// Sizes, seed and optional tolerance override for the suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Replaces every fixed tolerance when set; the grid search keeps its
    /// step-size tolerance.
    pub tolerance: Option<f64>,
    /// Random scenarios per geometry for the inequality suites.
    pub scenarios: usize,
    /// Random triples (and sample sets) per geometry.
    pub triples: usize,
    /// Random pairs per geometry for nonnegativity.
    pub pairs: usize,
    /// Sample sets checked by grid search.
    pub lemma_sets: usize,
    pub grid_step: f64,
    pub prop1_constructions: usize,
    pub bias_variance_draws: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tolerance: None,
            scenarios: 100,
            triples: 1000,
            pairs: 10_000,
            lemma_sets: 4,
            grid_step: 1e-3,
            prop1_constructions: 50,
            bias_variance_draws: 100,
        }
    }
}

impl SuiteConfig {
    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

/// Verdict of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub checks: usize,
    /// Largest violation score observed.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteOutcome {
    fn new(name: &str, checks: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            checks,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

/// One theorem evaluation, flattened for tabular output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremRow {
    pub suite: String,
    pub scenario_seed: u64,
    pub geometry: String,
    pub direction: String,
    pub lhs: f64,
    pub rhs: f64,
    pub misfit: f64,
    pub epsilon: f64,
    pub slack: f64,
    pub inner_product: f64,
}

impl TheoremRow {
    fn new(suite: &str, seed: u64, kind: GeometryKind, d: Direction, r: &TheoremReport) -> Self {
        Self {
            suite: suite.to_string(),
            scenario_seed: seed,
            geometry: kind.name().to_string(),
            direction: d.name().to_string(),
            lhs: r.lhs,
            rhs: r.rhs,
            misfit: r.misfit,
            epsilon: r.epsilon,
            slack: r.slack,
            inner_product: r.inner_product,
        }
    }
}

/// All suites with their rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteOutcome>,
    pub rows: Vec<TheoremRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

const GEOMETRIES: [GeometryKind; 3] = [
    GeometryKind::SquaredNorm,
    GeometryKind::Mahalanobis,
    GeometryKind::NegativeEntropy,
];

const THEOREM_GEOMETRIES: [GeometryKind; 2] = [GeometryKind::SquaredNorm, GeometryKind::NegativeEntropy];

fn kind_label(kind: GeometryKind) -> u64 {
    match kind {
        GeometryKind::SquaredNorm => 1,
        GeometryKind::Mahalanobis => 2,
        GeometryKind::NegativeEntropy => 3,
    }
}

/// Per-item generator for suite `suite` and geometry `kind`.
fn item_rng(cfg: &SuiteConfig, suite: u64, kind: GeometryKind, index: usize) -> (u64, ChaCha8Rng) {
    let seed = rng::derive(rng::derive(cfg.seed, suite), kind_label(kind));
    (seed, rng::stream(seed, index as u64))
}

fn random_geometry(kind: GeometryKind, rng: &mut ChaCha8Rng) -> Result<BregmanGeometry> {
    let k = rng.random_range(2..=8);
    match kind {
        GeometryKind::SquaredNorm => BregmanGeometry::squared_norm(k),
        GeometryKind::Mahalanobis => BregmanGeometry::mahalanobis(random_spd(k, rng)),
        GeometryKind::NegativeEntropy => BregmanGeometry::negative_entropy(k),
    }
}

fn random_sample_set(kind: GeometryKind, k: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
    let n = rng.random_range(1..=6);
    let points = (0..n).map(|_| random_point(kind, k, rng)).collect::<Result<_>>()?;
    SampleSet::new(points, flat_dirichlet(n, rng))
}

/// Residual of the three-point identity on random triples.
pub fn law_of_cosines(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for kind in GEOMETRIES {
        for i in 0..cfg.triples {
            let (_, mut r) = item_rng(cfg, 1, kind, i);
            let g = random_geometry(kind, &mut r)?;
            let k = g.dim();
            let x = random_point(kind, k, &mut r)?;
            let y = random_point(kind, k, &mut r)?;
            let z = random_point(kind, k, &mut r)?;
            worst = worst.max(g.law_of_cosines_residual(&x, &y, &z)?.abs());
            checks += 1;
        }
    }
    Ok(SuiteOutcome::new("law_of_cosines", checks, worst, cfg.tol(1e-9)))
}

/// Nonnegativity, identity of indiscernibles and the dual round trip.
pub fn divergence_basics(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for kind in GEOMETRIES {
        for i in 0..cfg.pairs {
            let (_, mut r) = item_rng(cfg, 2, kind, i);
            let g = random_geometry(kind, &mut r)?;
            let x = random_point(kind, g.dim(), &mut r)?;
            let y = random_point(kind, g.dim(), &mut r)?;
            worst = worst.max(-g.divergence(&x, &y)?).max(g.divergence(&x, &x)?);
            let back = g.from_dual(&g.to_dual(&x)?)?;
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let err = back.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            worst = worst.max(err);
            checks += 1;
        }
    }
    Ok(SuiteOutcome::new("divergence_basics", checks, worst, cfg.tol(1e-10)))
}

/// Forward and reverse decompositions against direct summation.
pub fn decompositions(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for kind in GEOMETRIES {
        for i in 0..cfg.triples {
            let (_, mut r) = item_rng(cfg, 3, kind, i);
            let g = random_geometry(kind, &mut r)?;
            let s = random_sample_set(kind, g.dim(), &mut r)?;
            let y = random_point(kind, g.dim(), &mut r)?;
            let fwd = g.forward_decomposition(&s, &y)?;
            worst = worst.max((fwd.total() - g.expected_divergence_from(&s, &y)?).abs());
            let rev = g.reverse_decomposition(&y, &s)?;
            worst = worst.max((rev.total() - g.expected_divergence_to(&y, &s)?).abs());
            checks += 2;
        }
    }
    Ok(SuiteOutcome::new("decompositions", checks, worst, cfg.tol(1e-10)))
}

/// Grid search over the 2-simplex for both minimizers of the expected KL.
///
/// The score is the largest coordinate distance between a grid argmin and
/// the corresponding closed-form minimizer, to be at most one grid step.
pub fn lemma1_grid(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let g = BregmanGeometry::negative_entropy(3)?;
    let step = cfg.grid_step;
    let n = (1.0 / step).round() as usize;
    let mut worst: f64 = 0.0;
    for i in 0..cfg.lemma_sets {
        let (_, mut r) = item_rng(cfg, 4, GeometryKind::NegativeEntropy, i);
        let m = r.random_range(2..=4);
        let points = (0..m)
            .map(|_| {
                let d = flat_dirichlet(3, &mut r);
                d.iter().map(|v| 0.7 * v + 0.1).collect::<Vec<f64>>()
            })
            .collect();
        let s = SampleSet::new(points, flat_dirichlet(m, &mut r))?;
        let mean = mean_minimizer(&s);
        let dual = g.dual_mean(&s)?;
        let mut best_fwd = (f64::INFINITY, [0.0; 3]);
        let mut best_rev = (f64::INFINITY, [0.0; 3]);
        for a in 1..n {
            for b in 1..(n - a) {
                let y = [a as f64 * step, b as f64 * step, (n - a - b) as f64 * step];
                let mut fwd = 0.0;
                let mut rev = 0.0;
                for (p, w) in s.points().iter().zip(s.weights()) {
                    for c in 0..3 {
                        fwd += w * p[c] * (p[c] / y[c]).ln();
                        rev += w * y[c] * (y[c] / p[c]).ln();
                    }
                }
                if fwd < best_fwd.0 {
                    best_fwd = (fwd, y);
                }
                if rev < best_rev.0 {
                    best_rev = (rev, y);
                }
            }
        }
        for c in 0..3 {
            worst = worst.max((best_fwd.1[c] - mean[c]).abs()).max((best_rev.1[c] - dual[c]).abs());
        }
    }
    Ok(SuiteOutcome::new("lemma1_grid", 2 * cfg.lemma_sets, worst, step * (1.0 + 1e-9)))
}

fn theorem_score(r: &TheoremReport) -> f64 {
    (-r.slack)
        .max(r.inner_product.abs() - r.epsilon)
        .max(r.identity_residual().abs())
}

/// Theorem 1 (`product = false`) or its product-coupling variant.
pub fn theorem1(cfg: &SuiteConfig, product: bool) -> Result<(SuiteOutcome, Vec<TheoremRow>)> {
    let name = if product { "theorem_a" } else { "theorem1" };
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for kind in THEOREM_GEOMETRIES {
        for i in 0..cfg.scenarios {
            let (_, mut r) = item_rng(cfg, 5, kind, i);
            let seed = rng::derive(rng::derive(cfg.seed, 5), kind_label(kind) * 1_000_003 + i as u64);
            let (sc, g) = FiniteScenario::random(kind, &mut r)?;
            for d in Direction::BOTH {
                let rep = if product {
                    verify_theorem_a(&sc, &g, d)?
                } else {
                    verify_theorem1(&sc, &g, d)?
                };
                worst = worst.max(theorem_score(&rep));
                rows.push(TheoremRow::new(name, seed, kind, d, &rep));
            }
        }
    }
    Ok((SuiteOutcome::new(name, rows.len(), worst, cfg.tol(1e-9)), rows))
}

/// Equality cases with posterior-mean students.
pub fn corollary1(cfg: &SuiteConfig) -> Result<(SuiteOutcome, Vec<TheoremRow>)> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for kind in THEOREM_GEOMETRIES {
        for i in 0..cfg.scenarios {
            let (_, mut r) = item_rng(cfg, 6, kind, i);
            let seed = rng::derive(rng::derive(cfg.seed, 6), kind_label(kind) * 1_000_003 + i as u64);
            let (sc, g) = FiniteScenario::random(kind, &mut r)?;
            for d in Direction::BOTH {
                let ideal = posterior_mean_scenario(&sc, &g, d)?;
                let rep = verify_corollary1(&ideal, &g, d)?;
                worst = worst.max(rep.gain_gap().abs()).max(rep.epsilon);
                rows.push(TheoremRow::new("corollary1", seed, kind, d, &rep));
            }
        }
    }
    Ok((SuiteOutcome::new("corollary1", rows.len(), worst, cfg.tol(1e-9)), rows))
}

/// Slack rebuilt from CE, RCE and entropy terms.
pub fn corollary3(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for i in 0..cfg.scenarios {
        let (_, mut r) = item_rng(cfg, 7, GeometryKind::NegativeEntropy, i);
        let (sc, g) = FiniteScenario::random(GeometryKind::NegativeEntropy, &mut r)?;
        for d in Direction::BOTH {
            worst = worst.max(verify_corollary3(&sc, &g, d)?.slack_discrepancy());
            checks += 1;
        }
    }
    Ok(SuiteOutcome::new("corollary3", checks, worst, cfg.tol(1e-9)))
}

/// CE gain equals the KL misfit; the RCE gain falls short of the reverse-KL
/// gain by exactly the entropy gap, which is nonnegative.
pub fn prop1(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    for i in 0..cfg.prop1_constructions {
        let (_, mut r) = item_rng(cfg, 8, GeometryKind::NegativeEntropy, i);
        let (sc, _) = FiniteScenario::random(GeometryKind::NegativeEntropy, &mut r)?;
        let rep = verify_prop1(&sc)?;
        worst = worst
            .max(rep.ce_discrepancy())
            .max(rep.entropy_gap_discrepancy())
            .max(-rep.entropy_gap);
    }
    Ok(SuiteOutcome::new("prop1", cfg.prop1_constructions, worst, cfg.tol(1e-9)))
}

/// Per-input squared-loss split, on random and on posterior-mean students.
pub fn eq10(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for i in 0..cfg.scenarios {
        let (_, mut r) = item_rng(cfg, 9, GeometryKind::SquaredNorm, i);
        let (sc, g) = FiniteScenario::random(GeometryKind::SquaredNorm, &mut r)?;
        let ideal = posterior_mean_scenario(&sc, &g, Direction::Reverse)?;
        for s in [&sc, &ideal] {
            for row in super::epsilon_decomposition_check(s, &g)? {
                worst = worst.max(row.residual().abs());
                checks += 1;
            }
        }
    }
    Ok(SuiteOutcome::new("eq10", checks, worst, cfg.tol(1e-10)))
}

/// Ensemble bias plus variance against the mean one-hot cross-entropy.
pub fn algorithm1_identity(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    for i in 0..cfg.bias_variance_draws {
        let (_, mut r) = item_rng(cfg, 10, GeometryKind::NegativeEntropy, i);
        let k = r.random_range(2..=8);
        let runs = (0..r.random_range(2..=8))
            .map(|_| ProbVector::from_weights(flat_dirichlet(k, &mut r)))
            .collect::<Result<Vec<_>>>()?;
        let truth = ProbVector::one_hot(k, r.random_range(0..k))?;
        worst = worst.max(bias_variance_estimate(&runs, &truth)?.identity_residual().abs());
    }
    Ok(SuiteOutcome::new("algorithm1_identity", cfg.bias_variance_draws, worst, cfg.tol(1e-9)))
}

/// Runs every suite in a fixed order.
pub fn run_all(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let mut suites = vec![
        law_of_cosines(cfg)?,
        divergence_basics(cfg)?,
        decompositions(cfg)?,
        lemma1_grid(cfg)?,
    ];
    let mut rows = Vec::new();
    for product in [false, true] {
        let (s, r) = theorem1(cfg, product)?;
        suites.push(s);
        rows.extend(r);
    }
    let (s, r) = corollary1(cfg)?;
    suites.push(s);
    rows.extend(r);
    suites.push(corollary3(cfg)?);
    suites.push(prop1(cfg)?);
    suites.push(eq10(cfg)?);
    suites.push(algorithm1_identity(cfg)?);
    Ok(VerifyReport { suites, rows })
}
