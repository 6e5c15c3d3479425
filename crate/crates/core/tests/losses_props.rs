use proptest::prelude::*;
use w2slab_core::losses::{self, binary_rce_risks, rce_ordering_gap};
use w2slab_core::ProbVector;

fn prob() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

fn simplex(k: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|w| ProbVector::from_weights(w).unwrap())
}

fn binary(p: f64) -> ProbVector {
    ProbVector::binary(p).unwrap()
}

proptest! {
    #[test]
    fn gradients_match_central_differences(y in prob(), p in prob()) {
        type Loss = fn(&ProbVector, &ProbVector) -> w2slab_core::Result<f64>;
        type Grad = fn(&ProbVector, &ProbVector) -> w2slab_core::Result<[f64; 2]>;
        let cases: [(Loss, Grad); 4] = [
            (losses::ce, losses::grad_ce),
            (losses::rce, losses::grad_rce),
            (losses::kl, losses::grad_kl),
            (losses::rkl, losses::grad_rkl),
        ];
        let (yv, h) = (binary(y), 1e-6);
        for (loss, grad) in cases {
            let g = grad(&yv, &binary(p)).unwrap()[0];
            let num = (loss(&yv, &binary(p + h)).unwrap() - loss(&yv, &binary(p - h)).unwrap()) / (2.0 * h);
            prop_assert!((g - num).abs() <= 1e-5 * g.abs().max(1.0), "analytic {} numerical {}", g, num);
        }
    }

    #[test]
    fn rce_against_uniform_label_is_log_k(k in 2usize..10, seed in any::<u64>()) {
        let w: Vec<f64> = (0..k).map(|i| 0.05 + ((seed >> (i % 60)) & 0xff) as f64).collect();
        let yhat = ProbVector::from_weights(w).unwrap();
        let v = losses::rce(&ProbVector::uniform(k).unwrap(), &yhat).unwrap();
        prop_assert!((v - (k as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn kl_is_ce_minus_entropy(y in simplex(4), yhat in simplex(4)) {
        let kl = losses::kl(&y, &yhat).unwrap();
        prop_assert!(kl >= -1e-12);
        prop_assert!((kl - (losses::ce(&y, &yhat).unwrap() - losses::entropy(&y))).abs() <= 1e-12);
    }

    #[test]
    fn smoothing_preserves_argmax(y in prob(), alpha in 0.001f64..=1.0) {
        prop_assume!((y - 0.5).abs() > 1e-9);
        let s = losses::smooth_labels(&binary(y), alpha).unwrap();
        prop_assert_eq!(s.argmax(), binary(y).argmax());
        prop_assert!((s.get(0) - 0.5).abs() <= (y - 0.5).abs() + 1e-15);
    }

    #[test]
    fn smoothing_endpoints(y in prob()) {
        prop_assert_eq!(losses::smooth_labels(&binary(y), 1.0).unwrap(), binary(y));
        prop_assert_eq!(losses::smooth_labels(&binary(y), 0.0).unwrap(), ProbVector::uniform(2).unwrap());
    }

    #[test]
    fn smoothed_risk_gap_is_dominated(
        labels in prop::collection::vec(prob(), 2..10),
        cand in prop::collection::vec(0.0f64..=1.0, 10),
        alpha in 0.0f64..=1.0,
    ) {
        let m = labels.len();
        let ys: Vec<ProbVector> = labels.iter().map(|&y| binary(y)).collect();
        let weights = vec![1.0 / m as f64; m];
        let fstar: Vec<ProbVector> = labels.iter().map(|&y| binary(if y > 0.5 { 1.0 } else { 0.0 })).collect();
        let f: Vec<ProbVector> = cand[..m].iter().map(|&p| binary(p)).collect();
        let a = binary_rce_risks(&ys, &weights, &f, alpha).unwrap();
        let b = binary_rce_risks(&ys, &weights, &fstar, alpha).unwrap();
        let (zero, mid, top) = rce_ordering_gap(a, b);
        prop_assert!(zero <= mid + 1e-12 && mid <= top + 1e-12);
    }

    #[test]
    fn composite_losses_bracket_their_parts(y in prob(), p in prob()) {
        let cfg = losses::CompositeLossConfig::default();
        let (yv, pv) = (binary(y), binary(p));
        let ce = losses::ce(&yv, &pv).unwrap();
        let rce = losses::rce(&yv, &pv).unwrap();
        let cace = losses::cace(&yv, &pv, &cfg).unwrap();
        prop_assert!(cace == ce || cace == rce);
        prop_assert!((losses::sl(&yv, &pv, &cfg).unwrap() - (ce + rce)).abs() <= 1e-12);
    }
}
