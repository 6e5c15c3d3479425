//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use rand::Rng;
use w2slab_core::harness::suites::{self, SuiteConfig, SuiteOutcome};
use w2slab_core::losses::{self, binary_rce_risks, rce_ordering_gap};
use w2slab_core::ridge::{h_closed_form, mp_integral, simulate_misfit, RidgeConfig};
use w2slab_core::trainer::{alpha_sweep, run_bias_variance, BiasVarianceConfig, PipelineConfig};
use w2slab_core::{rng, ProbVector};

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    details: Vec<String>,
}

fn criterion(id: usize, title: &'static str, limit: Duration, body: impl FnOnce(&mut Vec<String>) -> bool) -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let ok = body(&mut details);
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    details.push(format!("runtime {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()));
    let passed = ok && in_time;
    println!(
        "criterion {id} [{}] {title}: {}",
        if passed { "PASS" } else { "FAIL" },
        details.join("; ")
    );
    Outcome {
        id,
        title,
        passed,
        details,
    }
}

fn suite_line(s: &SuiteOutcome) -> String {
    format!("{} worst {:.3e} <= {:.1e} over {} checks", s.name, s.worst, s.tolerance, s.checks)
}

fn bregman_identities(details: &mut Vec<String>) -> bool {
    let cfg = SuiteConfig::default();
    let mut ok = true;
    for s in [
        suites::law_of_cosines(&cfg).unwrap(),
        suites::decompositions(&cfg).unwrap(),
        suites::lemma1_grid(&cfg).unwrap(),
    ] {
        ok &= s.passed;
        details.push(suite_line(&s));
    }
    ok &= cfg.triples == 1000 && cfg.grid_step == 1e-3;
    ok
}

fn theorem_suites(details: &mut Vec<String>) -> bool {
    let cfg = SuiteConfig::default();
    let mut ok = true;
    for product in [false, true] {
        let (s, rows) = suites::theorem1(&cfg, product).unwrap();
        let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        let dominated = rows.iter().all(|r| r.inner_product.abs() <= r.epsilon + 1e-9);
        ok &= s.passed && min_slack >= -1e-9 && dominated && rows.len() == 400;
        details.push(format!(
            "{} rows {} min slack {:.3e} eps dominates {}",
            s.name,
            rows.len(),
            min_slack,
            dominated
        ));
    }
    ok
}

fn equality_cases(details: &mut Vec<String>) -> bool {
    let cfg = SuiteConfig::default();
    let (c1, _) = suites::corollary1(&cfg).unwrap();
    let p1 = suites::prop1(&cfg).unwrap();
    details.push(suite_line(&c1));
    details.push(suite_line(&p1));
    c1.passed && p1.passed && p1.checks == 50
}

fn ridge_bound(details: &mut Vec<String>) -> bool {
    let mut ok = true;
    let spot = h_closed_form(1.0, 2.0).unwrap();
    let spot_ok = (spot - (0.5f64.sqrt() - 0.5)).abs() <= 1e-12 && (mp_integral(1.0, 2.0).unwrap() - spot).abs() <= 1e-6;
    ok &= spot_ok;
    details.push(format!("h(1,2) = {spot:.6}"));
    let mut worst_quad: f64 = 0.0;
    for eta0 in [0.5, 1.0] {
        let mut misfits = Vec::new();
        for gamma in [1.5, 2.0, 4.0] {
            let h = h_closed_form(eta0, gamma).unwrap();
            worst_quad = worst_quad.max((mp_integral(eta0, gamma).unwrap() - h).abs());
            let cfg = RidgeConfig {
                d_w: 200,
                gamma,
                n_ratio: 20.0,
                eta0,
                b: 1.0,
                seed: 7,
            };
            let est = simulate_misfit(&cfg, 50).unwrap();
            let raw = est.empirical_misfit / cfg.b;
            ok &= raw <= 1.1 * h;
            details.push(format!(
                "eta0 {eta0} gamma {gamma}: misfit/B {raw:.3e} vs 1.1h {:.4} (per-coordinate {:.4})",
                1.1 * h,
                est.normalized_misfit
            ));
            misfits.push(est.empirical_misfit);
        }
        let inversions = misfits.windows(2).filter(|w| w[1] > w[0]).count();
        ok &= inversions <= 1;
        details.push(format!("eta0 {eta0}: {inversions} inversions in gamma"));
    }
    ok &= worst_quad <= 1e-6;
    details.push(format!("max |mp - h| {worst_quad:.2e}"));
    ok
}

/// Five-point central difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * x.min(1.0 - x).min(0.05);
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn loss_suite(details: &mut Vec<String>) -> bool {
    type Loss = fn(&ProbVector, &ProbVector) -> w2slab_core::Result<f64>;
    type Grad = fn(&ProbVector, &ProbVector) -> w2slab_core::Result<[f64; 2]>;
    let pairs: [(&str, Loss, Grad); 4] = [
        ("ce", losses::ce, losses::grad_ce),
        ("rce", losses::rce, losses::grad_rce),
        ("kl", losses::kl, losses::grad_kl),
        ("rkl", losses::rkl, losses::grad_rkl),
    ];
    let mut r = rng::stream(2024, 5);
    let mut worst_grad: f64 = 0.0;
    for _ in 0..1000 {
        let y = ProbVector::binary(r.random_range(0.02..0.98)).unwrap();
        let p = r.random_range(0.02..0.98);
        let yhat = ProbVector::binary(p).unwrap();
        for (_, loss, grad) in &pairs {
            let g = grad(&y, &yhat).unwrap();
            for (j, gj) in g.iter().enumerate() {
                let pj = yhat.get(j);
                let num = derivative(
                    |t| {
                        let v = if j == 0 { [t, 1.0 - t] } else { [1.0 - t, t] };
                        loss(&y, &ProbVector::new(v.to_vec()).unwrap()).unwrap()
                    },
                    pj,
                );
                worst_grad = worst_grad.max((gj - num).abs() / gj.abs().max(num.abs()).max(1e-12));
            }
        }
    }
    let mut worst_uniform: f64 = 0.0;
    for k in 2..=8 {
        for _ in 0..20 {
            let w: Vec<f64> = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
            let yhat = ProbVector::from_weights(w).unwrap();
            let v = losses::rce(&ProbVector::uniform(k).unwrap(), &yhat).unwrap();
            worst_uniform = worst_uniform.max((v - (k as f64).ln()).abs());
        }
    }
    let mut worst_order: f64 = 0.0;
    for _ in 0..100 {
        let m = r.random_range(3..=12);
        let labels: Vec<ProbVector> = (0..m)
            .map(|_| ProbVector::binary(r.random_range(0.01..0.99)).unwrap())
            .collect();
        let w: Vec<f64> = (0..m).map(|_| r.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let weights: Vec<f64> = w.iter().map(|v| v / total).collect();
        let alpha = r.random_range(0.0..1.0);
        let best: Vec<ProbVector> = labels
            .iter()
            .map(|y| {
                (0..=1000)
                    .map(|i| ProbVector::binary(i as f64 / 1000.0).unwrap())
                    .min_by(|a, b| {
                        let la = losses::rce(y, a).unwrap();
                        let lb = losses::rce(y, b).unwrap();
                        la.total_cmp(&lb)
                    })
                    .unwrap()
            })
            .collect();
        let fstar = binary_rce_risks(&labels, &weights, &best, alpha).unwrap();
        for _ in 0..20 {
            let cand: Vec<ProbVector> = (0..m)
                .map(|_| ProbVector::binary(r.random_range(0.0..=1.0)).unwrap())
                .collect();
            let f = binary_rce_risks(&labels, &weights, &cand, alpha).unwrap();
            let (floor, smoothed_gap, raw_gap) = rce_ordering_gap(f, fstar);
            worst_order = worst_order.max(floor - smoothed_gap).max(smoothed_gap - raw_gap);
        }
    }
    details.push(format!("gradient rel err {worst_grad:.2e} (<= 1e-5)"));
    details.push(format!("rce uniform vs ln K {worst_uniform:.2e} (<= 1e-12)"));
    details.push(format!("ordering violation {worst_order:.2e}"));
    worst_grad <= 1e-5 && worst_uniform <= 1e-12 && worst_order <= 1e-12
}

fn figure2_trend(details: &mut Vec<String>) -> bool {
    let cfg = PipelineConfig::default();
    let result = alpha_sweep(
        &cfg,
        &["ce".to_string(), "rce".to_string()],
        &[0.0, 0.001, 0.01, 0.1, 1.0],
        3,
    )
    .unwrap();
    for c in &result.cells {
        details.push(format!(
            "{}@{}: acc {:.3}±{:.3} dist {:.2}",
            c.loss, c.alpha, c.acc_mean, c.acc_std, c.distance_mean
        ));
    }
    let mut ok = true;
    for name in ["rce_flat", "ce_drop", "rce_moves_farther"] {
        let v = result.verdicts.iter().find(|v| v.name == name).expect("verdict emitted");
        ok &= v.passed;
        details.push(format!("{name}: {}", v.detail));
    }
    ok
}

fn algorithm1(details: &mut Vec<String>) -> bool {
    let mut ok = true;
    let tiny = {
        let mut c = BiasVarianceConfig {
            k: 1,
            n_splits: 2,
            ..BiasVarianceConfig::default()
        };
        c.pipeline.task.n_test = 50;
        c
    };
    let r = run_bias_variance(&tiny).unwrap();
    ok &= r.max_identity_residual <= 1e-9;
    details.push(format!("k=1 N=2 residual {:.2e}", r.max_identity_residual));

    let mut lower = 0.0;
    let mut points = 0.0;
    for seed in 0..3 {
        let mut cfg = BiasVarianceConfig::default();
        cfg.pipeline.seed = seed;
        let r = run_bias_variance(&cfg).unwrap();
        ok &= r.max_identity_residual <= 1e-9;
        lower += r.ensemble_lower_fraction * r.points.len() as f64;
        points += r.points.len() as f64;
        details.push(format!(
            "seed {seed}: residual {:.2e}, ensemble lower on {:.1}%",
            r.max_identity_residual,
            100.0 * r.ensemble_lower_fraction
        ));
    }
    ok &= lower / points > 0.5;
    ok
}

#[test]
fn acceptance() {
    let outcomes = [
        criterion(1, "Bregman identities", Duration::from_secs(10), bregman_identities),
        criterion(2, "misfit inequalities", Duration::from_secs(30), theorem_suites),
        criterion(3, "equality cases", Duration::from_secs(10), equality_cases),
        criterion(4, "ridge misfit bound", Duration::from_secs(300), ridge_bound),
        criterion(5, "losses and gradients", Duration::from_secs(30), loss_suite),
        criterion(6, "CE vs RCE smoothing trend", Duration::from_secs(300), figure2_trend),
        criterion(7, "bias-variance estimator", Duration::from_secs(300), algorithm1),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({}): {}", o.id, o.title, o.details.join("; ")))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
