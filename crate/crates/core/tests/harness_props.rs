use proptest::prelude::*;
use w2slab_core::bregman::GeometryKind;
use w2slab_core::harness::{
    bias_variance_estimate, ensemble_dual_mean_prediction, epsilon_decomposition_check, posterior_mean_scenario,
    verify_corollary1, verify_corollary3, verify_prop1, verify_theorem1, verify_theorem_a, Direction, FiniteScenario,
};
use w2slab_core::{rng, ProbVector};

fn kinds() -> impl Strategy<Value = GeometryKind> {
    prop_oneof![Just(GeometryKind::SquaredNorm), Just(GeometryKind::NegativeEntropy)]
}

fn directions() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Forward), Just(Direction::Reverse)]
}

proptest! {
    #[test]
    fn inequalities_hold_with_dominated_residual(kind in kinds(), d in directions(), seed in any::<u64>()) {
        let (sc, g) = FiniteScenario::random(kind, &mut rng::stream(seed, 0)).unwrap();
        for rep in [verify_theorem1(&sc, &g, d).unwrap(), verify_theorem_a(&sc, &g, d).unwrap()] {
            prop_assert!(rep.slack >= -1e-9);
            prop_assert!(rep.epsilon_dominates(1e-9));
            prop_assert!(rep.identity_residual().abs() <= 1e-9);
            prop_assert!(rep.misfit >= -1e-12);
        }
    }

    #[test]
    fn posterior_mean_students_reach_equality(kind in kinds(), d in directions(), seed in any::<u64>()) {
        let (sc, g) = FiniteScenario::random(kind, &mut rng::stream(seed, 1)).unwrap();
        let ideal = posterior_mean_scenario(&sc, &g, d).unwrap();
        let rep = verify_corollary1(&ideal, &g, d).unwrap();
        prop_assert!(rep.gain_gap().abs() <= 1e-9);
        prop_assert!(rep.epsilon <= 1e-9);
    }

    #[test]
    fn cross_entropy_form_agrees(d in directions(), seed in any::<u64>()) {
        let (sc, g) = FiniteScenario::random(GeometryKind::NegativeEntropy, &mut rng::stream(seed, 2)).unwrap();
        prop_assert!(verify_corollary3(&sc, &g, d).unwrap().slack_discrepancy() <= 1e-9);
    }

    #[test]
    fn prop1_entropy_gap(seed in any::<u64>()) {
        let (sc, _) = FiniteScenario::random(GeometryKind::NegativeEntropy, &mut rng::stream(seed, 3)).unwrap();
        let rep = verify_prop1(&sc).unwrap();
        prop_assert!(rep.ce_discrepancy() <= 1e-9);
        prop_assert!(rep.entropy_gap_discrepancy() <= 1e-9);
        prop_assert!(rep.entropy_gap >= -1e-12);
        prop_assert!(rep.rce_gain <= rep.reverse_kl_gain + 1e-12);
    }

    #[test]
    fn squared_loss_split(seed in any::<u64>()) {
        let (sc, g) = FiniteScenario::random(GeometryKind::SquaredNorm, &mut rng::stream(seed, 4)).unwrap();
        for row in epsilon_decomposition_check(&sc, &g).unwrap() {
            prop_assert!(row.residual().abs() <= 1e-10);
        }
    }

    #[test]
    fn ensemble_bias_variance_identity(
        runs in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..8),
        class in 0usize..3,
    ) {
        let preds: Vec<ProbVector> = runs.into_iter().map(|w| ProbVector::from_weights(w).unwrap()).collect();
        let truth = ProbVector::one_hot(3, class).unwrap();
        let bv = bias_variance_estimate(&preds, &truth).unwrap();
        prop_assert!(bv.identity_residual().abs() <= 1e-9);
        prop_assert!(bv.bias >= 0.0 && bv.variance >= -1e-15);
        let ens = ensemble_dual_mean_prediction(&preds).unwrap();
        prop_assert!((ens.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
