//! Property-based invariants of the operator and the statistics.

use nalgebra::Complex;
use proptest::prelude::*;

use pasrad_core::detectors::{lrt_statistic, unified_statistic, DetectorKind};
use pasrad_core::oracle::random_aligned;
use pasrad_core::scenario::{bistatic_delay, target_doppler, Point};
use pasrad_core::signal::DelayDopplerPlan;
use pasrad_core::{CVector, C64};

fn complex_vector(len: usize) -> impl Strategy<Value = CVector> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(|v| {
        CVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| C64::new(re, im)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_unitary(
        v in complex_vector(48),
        delay in 0.0f64..1e-3,
        doppler in -5e4f64..5e4,
    ) {
        prop_assume!(v.norm() > 1e-6);
        let plan = DelayDopplerPlan::new(48);
        let out = plan.apply(&v, delay, doppler, 10e6);
        let rel = (out.norm() - v.norm()).abs() / v.norm();
        prop_assert!(rel < 1e-12, "unitarity defect {rel}");
    }

    #[test]
    fn adjoint_inverts_apply(
        v in complex_vector(40),
        delay in 0.0f64..1e-3,
        doppler in -5e4f64..5e4,
    ) {
        let plan = DelayDopplerPlan::new(40);
        let out = plan.apply_adjoint(&plan.apply(&v, delay, doppler, 10e6), delay, doppler, 10e6);
        prop_assert!((&out - &v).camax() < 1e-10);
    }

    #[test]
    fn zero_doppler_delays_compose(
        v in complex_vector(36),
        t1 in 0.0f64..1e-4,
        t2 in 0.0f64..1e-4,
    ) {
        let plan = DelayDopplerPlan::new(36);
        let a = plan.apply(&plan.apply(&v, t2, 0.0, 10e6), t1, 0.0, 10e6);
        let b = plan.apply(&v, t1 + t2, 0.0, 10e6);
        prop_assert!((&a - &b).camax() < 1e-10);
    }

    #[test]
    fn delays_are_symmetric_and_nonnegative(
        ax in -50.0f64..50.0, ay in -50.0f64..50.0,
        bx in -50.0f64..50.0, by in -50.0f64..50.0,
        vx in -50.0f64..50.0, vy in -50.0f64..50.0,
    ) {
        let (a, b) = (Point::new(ax * 1e3, ay * 1e3), Point::new(bx * 1e3, by * 1e3));
        let via = Point::new(vx * 1e3, vy * 1e3);
        prop_assert_eq!(bistatic_delay(&a, &b, None), bistatic_delay(&b, &a, None));
        prop_assert!(bistatic_delay(&a, &b, None) >= 0.0);
        prop_assert!(bistatic_delay(&a, &b, Some(&via)) >= 0.0);
    }

    #[test]
    fn doppler_is_linear_in_velocity(
        vx in -300.0f64..300.0, vy in -300.0f64..300.0,
        scale in -4.0f64..4.0,
    ) {
        let (tx, rx) = (Point::new(30e3, 10e3), Point::new(1e3, 30e3));
        let target = Point::new(35e3, 45e3);
        let lam = 0.5;
        let v = Point::new(vx, vy);
        let f1 = target_doppler(&tx, &rx, &target, &v, lam).unwrap();
        let f2 = target_doppler(&tx, &rx, &target, &(v * scale), lam).unwrap();
        prop_assert!((f2 - scale * f1).abs() <= 1e-9 * f1.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_statistics_ordered_and_rd_bounded(seed in 0u64..1u64 << 32) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let aligned = random_aligned(16, 2, 3, &mut rng);
        let ug = unified_statistic(&aligned, DetectorKind::UsualGradient).unwrap();
        let ag = unified_statistic(&aligned, DetectorKind::AltGradient).unwrap();
        prop_assert!(ug <= ag + 1e-12, "UG {ug} > AG {ag}");
        let rd = unified_statistic(&aligned, DetectorKind::RaoDurbin).unwrap();
        prop_assert!((-1e-10..=6.0 + 1e-10).contains(&rd), "RD {rd} out of [0, NtNr]");
        prop_assert!(lrt_statistic(&aligned).unwrap() >= -1e-10);
    }

    #[test]
    fn statistics_invariant_under_global_phase_scaling(
        seed in 0u64..1u64 << 32,
        phase in 0.0f64..std::f64::consts::TAU,
        log_mag in -2.0f64..2.0,
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let aligned = random_aligned(12, 1, 2, &mut rng);
        let gamma = Complex::from_polar(10f64.powf(log_mag), phase);
        let gammas = pasrad_core::CMatrix::from_element(1, 2, gamma);
        let dev = pasrad_core::montecarlo::max_relative_deviation(
            &aligned,
            &gammas,
            &DetectorKind::TWO_CHANNEL,
        )
        .unwrap();
        prop_assert!(dev < 1e-10, "deviation {dev}");
    }
}
