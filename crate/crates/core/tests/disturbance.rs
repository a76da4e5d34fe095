mod common;

use approx::assert_abs_diff_eq;
use common::*;
use plmpc_core::disturbance::{
    iteration_seed, sample_theta, Atom, DisturbanceBasis, Interval, PeriodFraction, ThetaDomain, ThetaSample,
};
use plmpc_core::linalg::Vector;
use plmpc_core::scenarios::{building_scenario, spring_mass_scenario};
use proptest::prelude::*;
use std::f64::consts::PI;

fn fourier(period: usize, harmonics: u32) -> DisturbanceBasis {
    let mut atoms = vec![Atom::Constant];
    for k in 1..=harmonics {
        atoms.push(Atom::Sine { harmonic: k });
        atoms.push(Atom::Cosine { harmonic: k });
    }
    DisturbanceBasis::new(period, vec![atoms], vec![Interval::new(0.0, 0.0)]).unwrap()
}

#[test]
fn constant_atom_only() {
    let basis = fourier(20, 2);
    let th = theta(&[1.7, 0.0, 0.0, 0.0, 0.0]);
    for t in 0..=20 {
        assert_eq!(basis.evaluate_correlated(&th, t).unwrap()[0], 1.7);
    }
}

#[test]
fn spring_mass_sine_peak() {
    let s = spring_mass_scenario().unwrap();
    let w = s.basis.evaluate_correlated(&theta(&[0.03, 0.05, -0.02, 0.07]), 50 / 4).unwrap();
    // T/4 = 12.5 is not integral; t = 12 sits just before the peak.
    assert_abs_diff_eq!(w[0], 0.03 + 0.05 * (2.0 * PI * 12.0 / 50.0).sin(), epsilon = 1e-15);
    let basis = DisturbanceBasis::new(52, vec![vec![Atom::Constant, Atom::Sine { harmonic: 1 }]], vec![Interval::new(0.0, 0.0)]).unwrap();
    assert_abs_diff_eq!(basis.evaluate_correlated(&theta(&[0.03, 0.05]), 13).unwrap()[0], 0.08, epsilon = 1e-15);
}

#[test]
fn building_channel_examples() {
    let b = building_scenario().unwrap();
    let th = theta(&[12.0, -4.0, 16.0, 1.0, 6.0]);
    assert_abs_diff_eq!(b.basis.evaluate_correlated(&th, 72).unwrap()[1], 16.0, epsilon = 1e-12);
    assert_abs_diff_eq!(b.basis.evaluate_correlated(&th, 50).unwrap()[2], 7.0, epsilon = 1e-12);
    // Outside the square window only the constant part is left.
    assert_abs_diff_eq!(b.basis.evaluate_correlated(&th, 40).unwrap()[2], 1.0, epsilon = 1e-12);
    assert_eq!(b.basis.evaluate_correlated(&th, 20).unwrap()[1], 0.0);
}

#[test]
fn triangle_follows_the_ramp_formula() {
    let tri = Atom::Triangle { start: PeriodFraction::new(1, 4), peak: PeriodFraction::new(1, 2), end: PeriodFraction::new(3, 4) };
    let period = 144;
    for t in 36..72 {
        let expected = (4.0 * t as f64 - period as f64) / period as f64;
        assert_abs_diff_eq!(tri.evaluate(t, period), expected, epsilon = 1e-14);
    }
    for t in 72..108 {
        let expected = (3.0 * period as f64 - 4.0 * t as f64) / period as f64;
        assert_abs_diff_eq!(tri.evaluate(t, period), expected, epsilon = 1e-14);
    }
    assert_eq!(tri.evaluate(108, period), 0.0);
}

#[test]
fn fit_constant_signal() {
    let basis = DisturbanceBasis::new(50, vec![vec![Atom::Constant, Atom::Sine { harmonic: 1 }]], vec![Interval::new(0.0, 0.0)]).unwrap();
    let fit = basis.fit_coefficients(&vec![v(&[7.0]); 51]).unwrap();
    assert_abs_diff_eq!(fit.theta.0[0], 7.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.theta.0[1], 0.0, epsilon = 1e-12);
    assert!(fit.residual_max_abs <= 1e-12);
}

#[test]
fn fit_pure_sine() {
    let basis = DisturbanceBasis::new(50, vec![vec![Atom::Constant, Atom::Sine { harmonic: 1 }]], vec![Interval::new(0.0, 0.0)]).unwrap();
    let w: Vec<Vector> = (0..=50).map(|t| v(&[3.0 * (2.0 * PI * t as f64 / 50.0).sin()])).collect();
    let fit = basis.fit_coefficients(&w).unwrap();
    assert_abs_diff_eq!(fit.theta.0[1], 3.0, epsilon = 1e-10);
}

#[test]
fn fit_noisy_signal_matches_scripted_least_squares() {
    let basis = DisturbanceBasis::new(50, vec![vec![Atom::Constant, Atom::Sine { harmonic: 1 }]], vec![Interval::new(-0.1, 0.1)]).unwrap();
    let w: Vec<Vector> = (0..=50)
        .map(|t| {
            let tf = t as f64;
            v(&[0.7 + 1.3 * (2.0 * PI * tf / 50.0).sin() + 0.1 * (7.3 * tf * tf + 0.4).sin()])
        })
        .collect();
    let fit = basis.fit_coefficients(&w).unwrap();
    assert_abs_diff_eq!(fit.theta.0[0], 0.7020712665821213, epsilon = 1e-11);
    assert_abs_diff_eq!(fit.theta.0[1], 1.300724749730228, epsilon = 1e-11);
}

#[test]
fn degenerate_box_samples_exactly() {
    let d = ThetaDomain::from_intervals(&[Interval::new(0.25, 0.25), Interval::new(-1.0, 1.0)]).unwrap();
    for seed in 0..100 {
        assert_eq!(sample_theta(&d, seed).0[0], 0.25);
    }
}

#[test]
fn spring_mass_samples_stay_in_box() {
    let s = spring_mass_scenario().unwrap();
    for seed in 0..10_000u64 {
        let th = sample_theta(&s.domain, iteration_seed(seed, 1, 0));
        assert!(s.domain.contains(&th));
    }
}

#[test]
fn samples_are_reproducible() {
    let s = building_scenario().unwrap();
    assert_eq!(sample_theta(&s.domain, 42), sample_theta(&s.domain, 42));
    assert_ne!(sample_theta(&s.domain, 42), sample_theta(&s.domain, 43));
    assert_eq!(s.basis.sample_residual(9), s.basis.sample_residual(9));
}

#[test]
fn zero_residual_realization_is_correlated_part() {
    let s = spring_mass_scenario().unwrap();
    let th = theta(&[0.05, -0.02, 0.01, 0.09]);
    let w = s.basis.generate_realization(&th, 3).unwrap();
    for (t, wt) in w.iter().enumerate() {
        assert_eq!(wt, &s.basis.evaluate_correlated(&th, t).unwrap());
    }
}

#[test]
fn building_residuals_stay_in_bounds() {
    let b = building_scenario().unwrap();
    let bounds = b.basis.residual_bounds().to_vec();
    let mut draws = 0;
    let mut seed = 0u64;
    while draws < 100_000 {
        for r in b.basis.sample_residual(seed) {
            for (c, bd) in bounds.iter().enumerate() {
                assert!(r[c] >= bd.lower && r[c] <= bd.upper);
            }
            draws += 1;
        }
        seed += 1;
    }
}

#[test]
fn rank_deficient_basis_is_rejected() {
    let r = DisturbanceBasis::new(4, vec![vec![Atom::Constant, Atom::Sine { harmonic: 2 }]], vec![Interval::new(0.0, 0.0)]);
    assert!(r.is_err());
}

proptest! {
    #[test]
    fn fit_round_trip(coefs in prop::collection::vec(-5.0f64..5.0, 7)) {
        let basis = fourier(24, 3);
        let th = ThetaSample::from_slice(&coefs);
        let w = basis.correlated_sequence(&th).unwrap();
        let fit = basis.fit_coefficients(&w).unwrap();
        prop_assert!((&fit.theta.0 - &th.0).amax() <= 1e-9);
    }

    #[test]
    fn building_fit_round_trip(seed in any::<u64>()) {
        let b = building_scenario().unwrap();
        let th = sample_theta(&b.domain, seed);
        let w = b.basis.correlated_sequence(&th).unwrap();
        let fit = b.basis.fit_coefficients(&w).unwrap();
        prop_assert!((&fit.theta.0 - &th.0).amax() <= 1e-9);
    }

    #[test]
    fn parseval(coefs in prop::collection::vec(-5.0f64..5.0, 7)) {
        // Harmonics below T/2 on a T-point grid are orthogonal.
        let period = 24;
        let basis = fourier(period, 3);
        let th = ThetaSample::from_slice(&coefs);
        let energy: f64 = (0..period).map(|t| basis.evaluate_correlated(&th, t).unwrap()[0].powi(2)).sum();
        let spectral = period as f64 * (coefs[0].powi(2) + 0.5 * coefs[1..].iter().map(|c| c * c).sum::<f64>());
        prop_assert!((energy - spectral).abs() <= 1e-9);
    }

    #[test]
    fn residuals_within_bounds(seed in any::<u64>(), lo in -3.0f64..0.0, hi in 0.0f64..3.0) {
        let basis = DisturbanceBasis::new(30, vec![vec![Atom::Constant]], vec![Interval::new(lo, hi)]).unwrap();
        for r in basis.sample_residual(seed) {
            prop_assert!(r[0] >= lo && r[0] <= hi);
        }
    }

    #[test]
    fn theta_samples_within_domain(seed in any::<u64>()) {
        let b = building_scenario().unwrap();
        prop_assert!(b.domain.contains(&sample_theta(&b.domain, seed)));
    }
}
