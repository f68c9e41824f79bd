use std::f64::consts::PI;

use proptest::prelude::*;
use qho_context::inequality::{chsh_closed_form, chsh_value, Via, TSIRELSON};
use qho_context::moussa::normalized_expectation;
use qho_context::noise::{phase_damp, t1_relax, thermal_ground_population};
use qho_context::operator::{expm, hs_fidelity, kron, trace_product, Operator, C64};
use qho_context::random::{random_commuting_observables, random_density, random_hermitian, random_unitary};
use qho_context::state::level_state;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_hermitian(&mut r, 2, 1.0), random_unitary(&mut r, 2), random_hermitian(&mut r, 2, 2.0));
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-14);
    }

    #[test]
    fn kron_is_bilinear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut r = rng(seed);
        let (a, a2, b) = (random_hermitian(&mut r, 2, 1.0), random_hermitian(&mut r, 2, 1.0), random_unitary(&mut r, 4));
        let lhs = kron(&(&a + &a2.scale_real(s)), &b);
        let rhs = &kron(&a, &b) + &kron(&a2, &b).scale_real(s);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn kron_mixed_product(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c, d) = (random_unitary(&mut r, 2), random_unitary(&mut r, 4), random_unitary(&mut r, 2), random_unitary(&mut r, 4));
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn expm_is_unitary_and_a_group(seed in any::<u64>(), t in -5.0f64..5.0, s in -5.0f64..5.0) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, 8, 4.0);
        let u = expm(&h, t).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        let prod = &expm(&h, t).unwrap() * &expm(&h, s).unwrap();
        prop_assert!(prod.max_abs_diff(&expm(&h, t + s).unwrap()) < 1e-10);
    }

    #[test]
    fn hs_fidelity_ignores_global_phase(seed in any::<u64>(), phi in -PI..PI) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, 4);
        let v = u.scale(C64::from_polar(1.0, phi));
        prop_assert!((hs_fidelity(&u, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_chsh_respects_ceiling(l in 0usize..4, beta in -PI..PI, eta in -PI..PI) {
        let rho = level_state(l).unwrap();
        let v = chsh_value(&rho, beta, eta, Via::Moussa).unwrap();
        prop_assert!(v.abs() <= TSIRELSON + 1e-10);
        prop_assert!((v - chsh_closed_form(l, beta, eta).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ancilla_protocol_matches_trace(seed in any::<u64>(), k in 1usize..4) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 2);
        let ops = random_commuting_observables(&mut r, 4, k);
        let refs: Vec<&Operator> = ops.iter().collect();
        let direct = trace_product(rho.op(), &Operator::product(refs.iter().copied()).unwrap()).unwrap().re;
        prop_assert!((normalized_expectation(&rho, &refs).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn relaxation_channels_stay_physical(seed in any::<u64>(), t in 0.0f64..3.0, spin in 1usize..4) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 3);
        for out in [
            phase_damp(&rho, t, 0.8, spin).unwrap(),
            t1_relax(&rho, t, 6.3, spin, thermal_ground_population(1e-5, 3)).unwrap(),
        ] {
            prop_assert!((out.op().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(out.eigenvalues().iter().all(|&e| e >= -1e-10));
        }
    }
}
