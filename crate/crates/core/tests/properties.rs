use dimerlab_core::inference::{default_axis, fit, synthesize_data, DimerScenario, FitProblem, Observable, Param};
use dimerlab_core::observables::{
    baseline_resonance_probability, dressed_scan, excitation_spectrum, extinction_ratio_at, g2_curve, lifetime_trace,
    linear_scan, peak_fit, DriveTarget, InitialState, ResonanceMcParams,
};
use dimerlab_core::units::lifetime_ns;
use dimerlab_core::SystemModel;
use proptest::prelude::*;

const BASE: f64 = 381_900_000.0;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn spectrum_is_translation_invariant(
        delta in -800.0f64..800.0,
        j in -600.0f64..600.0,
        shift in -5.0e4f64..5.0e4,
    ) {
        let m = SystemModel::dimer(BASE + delta / 2.0, BASE - delta / 2.0, j, 33.0, 0.2, 1.0).unwrap();
        let moved = m.clone().translated(shift);
        let scan = linear_scan(BASE - 1500.0, BASE + 1500.0, 61);
        let scan_moved: Vec<f64> = scan.iter().map(|f| f + shift).collect();
        let a = excitation_spectrum(&m, 5.0, &scan).unwrap();
        let b = excitation_spectrum(&moved, 5.0, &scan_moved).unwrap();
        let peak = a.max_signal();
        for (x, y) in a.signal.iter().zip(&b.signal) {
            // only the rounding of (omega + c) - (laser + c) differs
            prop_assert!((x - y).abs() <= 1e-6 * peak);
        }
    }

    #[test]
    fn weak_drive_signal_is_quadratic(delta in -500.0f64..500.0, j in -400.0f64..400.0, df in -300.0f64..300.0) {
        let m = SystemModel::dimer(BASE + delta / 2.0, BASE - delta / 2.0, j, 37.0, 0.135, 1.0).unwrap();
        let rabi = 0.01 * 37.0;
        let one = excitation_spectrum(&m, rabi, &[BASE + df]).unwrap().signal[0];
        let two = excitation_spectrum(&m, 2.0 * rabi, &[BASE + df]).unwrap().signal[0];
        prop_assert!((two / one / 4.0 - 1.0).abs() < 0.01, "{}", two / one);
    }

    #[test]
    fn dressed_rates_sum_to_twice_gamma0(
        delta in -3000.0f64..3000.0,
        j in prop_oneof![-2000.0f64..-50.0, 50.0f64..2000.0],
        alpha in 0.05f64..0.6,
    ) {
        let m = SystemModel::dimer(BASE + delta / 2.0, BASE - delta / 2.0, j, 33.0, alpha, 0.0).unwrap();
        let t = linear_scan(0.0, 20.0, 201);
        let p = lifetime_trace(&m, InitialState::Plus, &t).unwrap().fit.tau_ns;
        let q = lifetime_trace(&m, InitialState::Minus, &t).unwrap().fit.tau_ns;
        let sum = (1.0 / p + 1.0 / q) * lifetime_ns(33.0);
        prop_assert!((sum / 2.0 - 1.0).abs() < 0.02, "{sum}");
    }

    #[test]
    fn g2_relaxes_to_one(
        delta in -3000.0f64..3000.0,
        j in -1500.0f64..1500.0,
        s in 0.1f64..30.0,
        plus in any::<bool>(),
    ) {
        let m = SystemModel::dimer(BASE + delta / 2.0, BASE - delta / 2.0, j, 33.0, 0.11, 1.0).unwrap();
        let target = if plus { DriveTarget::Plus } else { DriveTarget::Minus };
        let rabi = dimerlab_core::units::rabi_from_saturation(s, 33.0);
        let tr = g2_curve(&m, rabi, target, &[0.0, 400.0]).unwrap();
        prop_assert!(tr.g2.iter().all(|g| *g >= 0.0));
        prop_assert!((tr.g2[1] - 1.0).abs() < 1e-3, "{:?}", tr.g2);
    }
}

proptest! {
    #![proptest_config(cfg(6))]

    #[test]
    fn weak_drive_extinction_ratio_is_bounded(delta in 0.0f64..3000.0) {
        let m = SystemModel::dimer(BASE, BASE, -116.0, 37.0, 0.135, 1.0).unwrap();
        let p = extinction_ratio_at(&m, delta, 0.05 * 37.0).unwrap();
        prop_assert!(p.ratio >= 0.0 && p.ratio <= 1.05, "{p:?}");
    }
}

proptest! {
    #![proptest_config(cfg(20))]

    #[test]
    fn noiseless_lifetime_fits_round_trip(
        delta in -3000.0f64..3000.0,
        j in prop_oneof![-2000.0f64..-200.0, 200.0f64..2000.0],
        gamma0 in 15.0f64..80.0,
        alpha in 0.05f64..0.6,
        nudge in 0.85f64..1.15,
    ) {
        let truth = DimerScenario::new(delta, j, gamma0, alpha, 0.0);
        let obs = Observable::Lifetime;
        let data = synthesize_data(&truth, &obs, &default_axis(&truth, &obs).unwrap(), 0.0, 0).unwrap();
        let mut start = truth;
        start.gamma0_mhz *= nudge;
        start.alpha = (alpha / nudge).clamp(0.01, 0.99);
        let r = fit(&FitProblem::new(obs, start, &[Param::Gamma0, Param::Alpha], data)).unwrap();
        prop_assert!((r.scenario.gamma0_mhz / gamma0 - 1.0).abs() < 1e-3, "{r:?}");
        prop_assert!((r.scenario.alpha / alpha - 1.0).abs() < 1e-3, "{r:?}");
    }
}

proptest! {
    #![proptest_config(cfg(8))]

    #[test]
    fn monte_carlo_is_reproducible(seed in any::<u64>()) {
        let p = ResonanceMcParams { n_samples: 20_000, seed, ..ResonanceMcParams::default() };
        let a = baseline_resonance_probability(&p).unwrap();
        let b = baseline_resonance_probability(&p).unwrap();
        prop_assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
        prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn three_line_spectra_fit_closely(s in 10.0f64..30.0, j in 800.0f64..1200.0) {
        let m = SystemModel::dimer(BASE + 1300.0, BASE - 1300.0, j, 33.0, 0.11, 1.0).unwrap();
        let ds = m.dressed_states().unwrap();
        let scan = dressed_scan(&[ds.freq_minus_mhz, BASE, ds.freq_plus_mhz], 35.0, 8.0);
        let tr = excitation_spectrum(&m, dimerlab_core::units::rabi_from_saturation(s, 33.0), &scan).unwrap();
        let fit = peak_fit(&tr, 3, None).unwrap();
        let norm = tr.signal.iter().map(|y| y * y).sum::<f64>().sqrt();
        prop_assert!(fit.residual_norm < 0.02 * norm, "{} vs {}", fit.residual_norm, norm);
    }
}

proptest! {
    #![proptest_config(cfg(3))]

    #[test]
    fn rare_resonances_scale_with_threshold(k in 0.5f64..2.0, seed in any::<u64>()) {
        let p = ResonanceMcParams { threshold_factor: k, seed, ..ResonanceMcParams::default() };
        let doubled = ResonanceMcParams { threshold_factor: 2.0 * k, seed: seed ^ 1, ..p };
        let a = baseline_resonance_probability(&p).unwrap();
        let b = baseline_resonance_probability(&doubled).unwrap();
        prop_assert!(b.p_hat < 0.01);
        // doubling is exact only in the x << W limit; the rest must hide in the noise
        let z = (b.p_hat - 2.0 * a.p_hat) / (b.stderr.powi(2) + 4.0 * a.stderr.powi(2)).sqrt();
        prop_assert!(z.abs() < 4.0, "{a:?} -> {b:?}, z = {z}");
    }
}
