//! Swap-test attention: exact overlaps, the ancilla circuit and shot noise.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swapattn::attention::*;
use swapattn::statevec::StateVector;

fn random_state(n: usize, seed: u64) -> StateVector<f64> {
    StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn circuit_agrees_with_analytic() {
    for n in 2..=8 {
        for seed in 0..3 {
            let s = random_state(n, 10 * n as u64 + seed);
            let a = attention_analytic(&s).unwrap();
            let c = attention_circuit(&s, None, 0).unwrap();
            for (x, y) in a.upper_triangle().iter().zip(c.upper_triangle()) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn shot_estimates_stay_close() {
    let s = random_state(6, 99);
    let exact = attention_analytic(&s).unwrap();
    let noisy = attention_circuit(&s, Some(10_000), 5).unwrap();
    for (x, y) in exact.upper_triangle().iter().zip(noisy.upper_triangle()) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
    assert_eq!(noisy, attention_circuit(&s, Some(10_000), 5).unwrap());
}

#[test]
fn zero_shots_rejected() {
    assert!(attention_circuit(&random_state(3, 1), Some(0), 0).is_err());
}

#[test]
fn single_qubit_rejected() {
    let s = StateVector::<f64>::zero_state(1).unwrap();
    assert!(attention_analytic(&s).is_err());
}

#[test]
fn f32_agrees_with_f64() {
    let s = random_state(5, 4);
    let a64 = attention_analytic(&s).unwrap();
    let a32 = attention_analytic(&s.cast::<f32>()).unwrap();
    for (x, y) in a64.upper_triangle().iter().zip(a32.upper_triangle()) {
        assert!((x - y as f64).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_shape_invariants(seed in any::<u64>(), n in 2usize..8) {
        let m = attention_analytic(&random_state(n, seed)).unwrap();
        m.validate().unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!((-1.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn global_phase_invariance(seed in any::<u64>(), phi in -6.3f64..6.3) {
        let s = random_state(5, seed);
        let mut t = s.clone();
        t.apply_global_phase(phi);
        let (a, b) = (attention_analytic(&s).unwrap(), attention_analytic(&t).unwrap());
        for (x, y) in a.upper_triangle().iter().zip(b.upper_triangle()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
