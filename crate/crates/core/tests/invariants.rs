use proptest::prelude::*;

use sds_core::dynamics::{effective_zeta, DriveParams};
use sds_core::metrology::{
    bounds_report, incompatibility_sds, mode_occupation_sds, qfim_multiparam_sds, DickeWeights, Setting,
};
use sds_core::protocols::{protocol_distribution, wigner, PhaseGrid, Protocol, Route};
use sds_core::C64;

fn symmetric_weights() -> impl Strategy<Value = DickeWeights> {
    (1usize..=10)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0.05..1.0f64, 0.0..6.3f64, 0.0..6.3f64), n / 2 + 1),
            )
        })
        .prop_map(|(n, draws)| {
            let mut w = vec![C64::new(0.0, 0.0); n + 1];
            for (k, &(mag, a, b)) in draws.iter().enumerate() {
                w[k] = C64::from_polar(mag, a);
                w[n - k] = C64::from_polar(mag, b);
            }
            let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            DickeWeights::new(n, w.into_iter().map(|c| c / norm).collect()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_are_ordered(w in symmetric_weights(), zeta in 0.05..2.0f64) {
        let report = bounds_report(&w, zeta).unwrap();
        for s in &report.settings {
            prop_assert!(s.hl <= s.qcrb * (1.0 + 1e-12), "{s:?}");
            prop_assert!(s.qcrb <= s.sql * (1.0 + 1e-12), "{s:?}");
        }
        let n = mode_occupation_sds(&w, zeta).unwrap();
        let abs = report.settings.iter().find(|s| s.setting == Setting::Abs).unwrap();
        prop_assert!((abs.qcrb * (8.0 * n + 4.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn qfim_is_positive_and_incompatibility_bounded(w in symmetric_weights(), zeta in 0.0..2.0f64) {
        let q = qfim_multiparam_sds(&w, zeta).unwrap();
        prop_assert!(q.is_psd(1e-12));
        prop_assert!((q.get(0, 1) - q.get(1, 0)).abs() < 1e-12);
        let r = incompatibility_sds(&w, zeta).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0 + 1e-12, "{r}");
    }

    #[test]
    fn distributions_are_normalized(
        n in 1usize..=6,
        zeta in 0.0..1.5f64,
        amp in 0.0..1.0f64,
        arg in 0.0..6.3f64,
    ) {
        let beta = C64::from_polar(amp, arg);
        let mut protocols = vec![Protocol::Coherent];
        if n == 1 {
            protocols.push(Protocol::SingleSpin);
        }
        if n % 2 == 0 {
            protocols.push(Protocol::Ghz);
        }
        for p in protocols {
            let d = protocol_distribution(p, n, zeta, beta, Route::Exact).unwrap();
            prop_assert!(d.probabilities.iter().all(|&x| x >= -1e-14));
            prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn drive_reaches_its_target(
        g in 1e3..1e5f64,
        zeta in 0.01..1.5f64,
        ell in 1u32..4,
        reps in 1u32..50,
    ) {
        let p = DriveParams::for_target(g, zeta, std::f64::consts::PI, ell, reps).unwrap();
        prop_assert!((effective_zeta(&p).norm() / zeta - 1.0).abs() < 1e-9);
        let one = DriveParams::for_target(g, zeta, std::f64::consts::PI, ell, 1).unwrap();
        // fixed target: duration grows as the square root of the repetitions
        prop_assert!((p.total_duration() / one.total_duration() - (reps as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn wigner_is_normalized(amps in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6)) {
        prop_assume!(amps.iter().any(|&(a, b)| a.abs() + b.abs() > 0.1));
        let psi = nalgebra::DVector::from_iterator(amps.len(), amps.iter().map(|&(a, b)| C64::new(a, b)));
        let field = wigner(&psi, PhaseGrid::square(9.0, 91)).unwrap();
        prop_assert!((field.integral() - 1.0).abs() < 1e-6, "{}", field.integral());
        prop_assert!(field.values.iter().all(|w| w.abs() <= 0.5 / std::f64::consts::PI + 1e-12));
    }
}
