//! Cross-module invariants under randomized inputs.

use infotherm::cycle_laws::{
    cyclic_information, green_check, mixed_derivative, rectangle_second_difference,
    second_law_check, simulate_driven_cycle, simulate_trajectory, ConstitutiveScaling,
    SamplingDynamics, StimulusLoop, Waveform,
};
use infotherm::optimal::{dp_oracle, optimal_info_gain, DpGrid};
use infotherm::paths::{information_gain, sampling_work, CyclePath, ProcessPath};
use infotherm::sensory::{cycle_balance, loop_cycle_balance, AdaptationParams};
use infotherm::state::{entropy, theta, InferenceState, NoiseModel};
use infotherm::{BudgetProblem, Orientation};
use proptest::prelude::*;

fn mi(r: f64) -> NoiseModel<f64> {
    NoiseModel::mutual_info(r).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mixed_derivative_is_nonpositive_for_monotone_scaling(
        mu in 0.01f64..50.0, m in 0.01f64..1e3, c in 0.01f64..10.0, p in 0.0f64..4.0, r in 0.0f64..10.0,
    ) {
        let law = ConstitutiveScaling::new(c, p).unwrap();
        prop_assert!(mixed_derivative(mu, m, &law, &mi(r)) <= 0.0);
    }

    #[test]
    fn rectangles_are_supermodular_reversed(
        mu1 in 0.1f64..5.0, dmu in 0.01f64..5.0, m1 in 0.1f64..50.0, dm in 0.01f64..50.0,
        c in 0.1f64..5.0, p in 0.0f64..3.0, r in 0.01f64..5.0,
    ) {
        let law = ConstitutiveScaling::new(c, p).unwrap();
        let noise = mi(r);
        let sd = rectangle_second_difference((mu1, mu1 + dmu), (m1, m1 + dm), &law, &noise).unwrap();
        prop_assert!(sd <= 1e-12);
        let lp = StimulusLoop::from_ring(&[
            (mu1, m1), (mu1 + dmu, m1), (mu1 + dmu, m1 + dm), (mu1, m1 + dm),
        ]).unwrap();
        let line = cyclic_information(&lp, &law, &noise);
        prop_assert!((line + sd).abs() <= 1e-9 * (1.0 + sd.abs()));
    }

    #[test]
    fn reversing_a_loop_negates_cyclic_information(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lp = infotherm::cycle_laws::random_loop::<f64, _>(&mut rng, false);
        let law = ConstitutiveScaling::new(1.0, 1.5).unwrap();
        let fwd = second_law_check(&lp, &law, &mi(0.7)).unwrap();
        let back = second_law_check(&lp.reversed(), &law, &mi(0.7)).unwrap();
        prop_assert_eq!(fwd.orientation, Orientation::CounterClockwise);
        prop_assert!((fwd.cyclic_info + back.cyclic_info).abs() <= 1e-12 * (1.0 + fwd.cyclic_info.abs()));
        prop_assert!(fwd.holds && back.holds && back.orientation_reversed);
        let g = green_check(&lp, &law, &mi(0.7));
        prop_assert!(g.agrees(1e-6, 1e-12));
    }

    #[test]
    fn adaptation_balance_equals_loop_integral(
        k in 0.1f64..20.0, beta in 0.05f64..20.0, p in 0.2f64..3.0, d in 0.05f64..20.0, i in 0.01f64..100.0,
    ) {
        let params = AdaptationParams::new(k, beta, p, d, 1.0).unwrap();
        let direct = cycle_balance(i, &params).unwrap();
        let line = loop_cycle_balance(i, &params).unwrap();
        prop_assert!((direct - line).abs() <= 1e-3 * direct.abs() + 1e-12, "{} vs {}", direct, line);
    }

    #[test]
    fn relaxation_never_overshoots(m0 in 0.1f64..10.0, mu in 0.1f64..10.0, a in 0.1f64..20.0) {
        let law = ConstitutiveScaling::new(1.0, 2.0).unwrap();
        let dyns = SamplingDynamics::linear(a, &law).unwrap();
        let w = Waveform::constant(mu, 5.0 / a).unwrap();
        let traj = simulate_trajectory(&w, &dyns, 0.0, 5.0 / a, 0.01 / a, m0).unwrap();
        let gaps: Vec<f64> = traj.iter().map(|q| q.m - mu).collect();
        prop_assert!(gaps.windows(2).all(|g| g[1].abs() <= g[0].abs() && g[1] * g[0] >= 0.0));
    }
}

#[test]
fn driven_loop_area_shrinks_towards_quasi_static() {
    let law = ConstitutiveScaling::new(1.0, 2.0).unwrap();
    let noise = mi(1.0);
    let wave = Waveform::trapezoid(1.0, 3.0, 2.0, 8.0).unwrap();
    let mut prev = f64::INFINITY;
    for a in [0.5, 2.0, 8.0, 32.0] {
        let dyns = SamplingDynamics::linear(a, &law).unwrap();
        let c = simulate_driven_cycle(&wave, &dyns, 400.0, 1e-3, 3000).unwrap();
        let v = second_law_check(&c.stimulus_loop, &law, &noise).unwrap();
        assert_eq!(v.orientation, Orientation::CounterClockwise);
        assert!(v.cyclic_info >= 0.0);
        let area = c.stimulus_loop.signed_area();
        assert!(area > 0.0 && area < prev, "a={a}: {area} vs {prev}");
        prev = area;
    }
}

#[test]
fn dp_never_beats_the_closed_form() {
    for (ma, mb, w, r) in [(1.0, 4.0, 1.0, 1.0), (1.0, 9.0, 5.0, 0.5), (2.0, 5.0, 0.5, 0.1)] {
        let problem = BudgetProblem::new(ma, mb, w, mi(r)).unwrap();
        let opt = optimal_info_gain(&problem).unwrap();
        let dp = dp_oracle(&problem, &DpGrid::cube(32)).unwrap();
        assert!(dp.best_gain <= opt + 1e-9);
        assert!(opt - dp.best_gain < 2e-2, "{opt} vs {}", dp.best_gain);
        assert!(sampling_work(&dp.best_path) <= w * (1.0 + 1e-9));
    }
}

#[test]
fn single_precision_instantiation() {
    let noise = NoiseModel::<f32>::mutual_info(1.0).unwrap();
    let st = InferenceState::<f32>::new(4.0, 4.0).unwrap();
    assert!((entropy(&st, &noise).unwrap() - 0.346_573_6).abs() < 1e-6);
    assert_eq!(theta(&st, &noise), 16.0);
    let cyc = CyclePath::<f32>::from_ring(&[(1.0, 1.0), (1.0, 3.0), (7.389_056, 3.0), (7.389_056, 1.0)]).unwrap();
    assert!((sampling_work(cyc.path()) - 4.0).abs() < 1e-4);
    let p = ProcessPath::<f32>::from_pairs(&[(1.0, 2.0), (4.0, 0.5)]).unwrap();
    assert!(information_gain(&p, &noise) > 0.0);
    let problem = BudgetProblem::<f32>::new(1.0, 4.0, 1.0, noise).unwrap();
    assert!((optimal_info_gain(&problem).unwrap() - (2f32.ln() - 0.5)).abs() < 1e-6);
    let law = ConstitutiveScaling::<f32>::new(1.0, 2.0).unwrap();
    let lp = StimulusLoop::<f32>::from_ring(&[(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)]).unwrap();
    assert!(second_law_check(&lp, &law, &noise).unwrap().holds);
    let params = AdaptationParams::<f32>::new(2.0, 1.0, 2.0, 1.0, 1.0).unwrap();
    assert!((cycle_balance(3.0, &params).unwrap() - 2.125f32.ln()).abs() < 1e-5);
}
