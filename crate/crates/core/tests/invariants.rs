use proptest::prelude::*;

use tass::estimation::ParamTransform;
use tass::likelihood::regime_weights;
use tass::model::{latent_step, TassParams};
use tass::numerics::special::{gamma_p, gamma_q, GammaLaw};
use tass::numerics::{pairwise_sum, QuadratureRule, Reparameterization};
use tass::prediction::{hitting_distribution_from_states, next_threshold};

fn params(alpha: f64, beta: f64, r: Vec<f64>) -> TassParams {
    let m = r.len() + 1;
    TassParams::new(vec![0.3; m], (0..m).map(|i| i as f64).collect(), vec![1.0; m], r, GammaLaw::new(alpha, beta).unwrap())
        .unwrap()
}

/// Increasing thresholds at least 0.02 apart inside (0.02, 0.98).
fn thresholds(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..0.98, 0..max).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 0.02);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn latent_step_stays_in_unit_interval(y in 0.0f64..1.0, eps in 0.0f64..50.0) {
        let (next, wraps) = latent_step(y, eps);
        prop_assert!((0.0..1.0).contains(&next));
        prop_assert!((next + wraps as f64 - y - eps).abs() < 1e-9);
    }

    #[test]
    fn regime_weights_are_a_distribution(alpha in 0.2f64..5.0, beta in 2.0f64..200.0, r in thresholds(3)) {
        let p = params(alpha, beta, r);
        let w = regime_weights(&p, 100, &QuadratureRule::gauss_legendre(32));
        prop_assert!(w.as_slice().iter().all(|&v| v >= -1e-12));
        prop_assert!((w.total() - 1.0).abs() < 1e-6);
        // the middle marginal is the stationary Uniform law of the regime
        let m = p.m();
        let edges = p.edges();
        for j in 0..m {
            let mut mass = 0.0;
            for i in 0..m {
                for k in 0..m {
                    mass += w.get(i, j, k);
                }
            }
            prop_assert!((mass - (edges[j + 1] - edges[j])).abs() < 1e-6);
        }
    }

    #[test]
    fn incomplete_gamma_halves_sum_to_one(a in 0.01f64..200.0, x in 0.0f64..400.0) {
        prop_assert!((gamma_p(a, x) + gamma_q(a, x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trips(
        phi in prop::collection::vec(-0.95f64..0.95, 2),
        a in prop::collection::vec(-5.0f64..5.0, 2),
        sigma in prop::collection::vec(0.1f64..5.0, 2),
        r in 0.05f64..0.95,
        alpha in 0.05f64..50.0,
        beta in 0.5f64..5000.0,
    ) {
        let t = ParamTransform::new(2, 0.0, 2.0);
        let natural = vec![phi[0], a[0], sigma[0], phi[1], a[1], sigma[1], r, alpha, beta];
        let back = t.to_natural(&t.to_unconstrained(&natural));
        for (u, v) in natural.iter().zip(&back) {
            prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
        }
    }

    #[test]
    fn next_threshold_is_ahead_of_the_state(y in 0.0f64..1.0, k in 1usize..12, r in thresholds(4)) {
        let p = params(0.5, 50.0, r);
        let (edge, wraps) = next_threshold(y, k, &p).unwrap();
        let barrier = edge + wraps as f64 - y;
        prop_assert!(barrier > 0.0);
        // each further change-point sits at least as far away
        let (e2, w2) = next_threshold(y, k + 1, &p).unwrap();
        prop_assert!(e2 + w2 as f64 - y > barrier);
    }

    #[test]
    fn survival_is_nonincreasing(states in prop::collection::vec(0.0f64..1.0, 1..20), k in 1usize..4) {
        let p = params(0.5, 50.0, vec![0.6]);
        let d = hitting_distribution_from_states(&states, &p, k, 1e-8).unwrap();
        prop_assert!(d.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(d.survival.iter().all(|s| (0.0..=1.0).contains(s)));
        prop_assert!(*d.survival.last().unwrap() < 1e-8);
    }

    #[test]
    fn pairwise_sum_agrees_with_naive(v in prop::collection::vec(-1e3f64..1e3, 0..500)) {
        let naive: f64 = v.iter().sum();
        prop_assert!((pairwise_sum(&v) - naive).abs() < 1e-8);
    }
}
