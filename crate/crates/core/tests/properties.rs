//! Property-based tests over randomized schemes, responses and detector
//! settings.

use std::f64::consts::PI;

use ion_eit::atom::{
    build_barium8, build_lambda3, build_two_level, BariumRates, LaserField, LevelScheme, Polarization, Transition,
    BOHR_MAGNETON_OVER_HBAR,
};
use ion_eit::detection::{lockin_measure_with, ChopperConfig, Detector, LockInMode};
use ion_eit::dynamics::{build_liouvillian, evolve_observed, steady_state, DensityMatrix, EIGEN_FLOOR};
use ion_eit::linalg::{hermitian_eigenvalues, ONE};
use ion_eit::scattering::{lambda_response, transmission, two_level_response, CouplingGeometry};
use ion_eit::spectra::{
    fit_lorentzian, fit_lorentzian_xy, lorentzian, scan, Column, Engine, ScanAxis, ScanParameter,
};
use proptest::prelude::*;

const MHZ: f64 = 2.0 * PI * 1e6;

fn two_level() -> impl Strategy<Value = LevelScheme> {
    (0.5..1.5f64, 0.1..2.0f64, -2.0..2.0f64, 0.0..0.5f64).prop_map(|(gamma, rabi, det, lw)| {
        let laser = LaserField::new("p", Transition::GroundExcited, rabi, det).with_linewidth(lw);
        build_two_level(gamma, laser).unwrap()
    })
}

fn lambda() -> impl Strategy<Value = LevelScheme> {
    (
        0.2..0.8f64,
        0.1..0.5f64,
        0.02..0.3f64,
        0.05..2.0f64,
        -1.0..1.0f64,
        0.1..2.0f64,
        -1.0..1.0f64,
    )
        .prop_map(|(gg, gr, g0, wp, dp, wc, dc)| {
            build_lambda3(
                gg,
                gr,
                g0,
                LaserField::new("p", Transition::GroundExcited, wp, dp),
                LaserField::new("c", Transition::MetastableExcited, wc, dc),
            )
            .unwrap()
        })
}

fn barium() -> impl Strategy<Value = LevelScheme> {
    (0.1..1.0f64, 0.1..0.3f64, 0.5..2.0f64, -1.0..1.0f64, 0.5..2.0f64, -1.0..1.0f64).prop_map(
        |(u, mix, wg, dg, wr, dr)| {
            let rates = BariumRates {
                total_decay: 2.0,
                sublevel_mixing: mix,
                ..BariumRates::default()
            };
            let lasers = vec![
                LaserField::new("green", Transition::GroundExcited, wg, dg)
                    .with_polarization(Polarization::linear_perpendicular()),
                LaserField::new("red", Transition::MetastableExcited, wr, dr)
                    .with_polarization(Polarization::linear_perpendicular()),
            ];
            build_barium8(u / BOHR_MAGNETON_OVER_HBAR, lasers, rates).unwrap()
        },
    )
}

fn any_scheme() -> impl Strategy<Value = LevelScheme> {
    prop_oneof![3 => two_level(), 3 => lambda(), 1 => barium()]
}

/// Cooling-repumper ion in physical units; settles in microseconds.
fn ion() -> impl Strategy<Value = LevelScheme> {
    (0.5..3.0f64, -20.0..5.0f64, 1.0..8.0f64, -20.0..20.0f64).prop_map(|(wp, dp, wc, dc)| {
        build_lambda3(
            7.3365 * MHZ,
            2.7135 * MHZ,
            0.05 * MHZ,
            LaserField::new("cool", Transition::GroundExcited, wp * MHZ, dp * MHZ),
            LaserField::new("repump", Transition::MetastableExcited, wc * MHZ, dc * MHZ),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_keeps_a_valid_density_matrix(scheme in any_scheme(), start in 0usize..8) {
        let l = build_liouvillian(&scheme).unwrap();
        let start = DensityMatrix::pure(scheme.dim(), start % scheme.dim());
        let t = 3.0 / scheme.min_relaxation_rate();
        let mut step = 0usize;
        let mut worst = (0.0f64, 0.0f64, f64::INFINITY);
        evolve_observed(&l, &start, t, t, |_, rho| {
            step += 1;
            if step % 53 == 1 {
                worst.0 = worst.0.max(rho.hermiticity_error());
                worst.1 = worst.1.max((rho.trace() - ONE).norm());
                let ev = hermitian_eigenvalues(rho).unwrap();
                worst.2 = ev.into_iter().fold(worst.2, f64::min);
            }
        })
        .unwrap();
        prop_assert!(worst.0 <= 1e-10, "hermiticity error {}", worst.0);
        prop_assert!(worst.1 <= 1e-10, "trace error {}", worst.1);
        prop_assert!(worst.2 >= EIGEN_FLOOR, "eigenvalue {}", worst.2);
    }

    #[test]
    fn liouvillian_preserves_trace_and_fixes_the_steady_state(scheme in any_scheme()) {
        let l = build_liouvillian(&scheme).unwrap();
        prop_assert!(l.generator().is_trace_preserving());
        let rho = steady_state(&l).unwrap();
        prop_assert!(rho.check().is_ok());
        let residual = l.apply(rho.matrix()).unwrap().max_abs();
        prop_assert!(residual <= 1e-9 * l.spectral_norm(), "residual {residual}");
    }

    #[test]
    fn transmission_stays_within_interference_bounds(
        eps in 0.0..=0.5f64,
        gamma in 0.1..10.0f64,
        delta in -50.0..50.0f64,
        delta2 in -5.0..5.0f64,
        omega_r in 0.0..3.0f64,
        gamma0 in 0.0..1.0f64,
    ) {
        let (lo, hi) = ((1.0 - 2.0 * eps).powi(2), (1.0 + 2.0 * eps).powi(2));
        for r in [
            two_level_response(delta, gamma).unwrap(),
            lambda_response(delta2, delta, omega_r, gamma, gamma0).unwrap(),
        ] {
            let t = transmission(eps, r).unwrap();
            prop_assert!(t.transmission >= lo - 1e-12 && t.transmission <= hi + 1e-12);
            prop_assert!((t.extinction - (1.0 - t.transmission)).abs() <= 1e-15);
        }
    }

    #[test]
    fn lorentzian_fit_recovers_synthetic_parameters(
        center in -0.3..0.3f64,
        fwhm in 0.1..0.6f64,
        depth in prop_oneof![0.001..0.5f64, -0.5..-0.001f64],
        baseline in -1.0..1.0f64,
    ) {
        let x: Vec<f64> = (0..121).map(|k| -1.5 + 0.025 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, center, fwhm, depth, baseline)).collect();
        let fit = fit_lorentzian_xy(&x, &y).unwrap();
        prop_assert!((fit.center - center).abs() <= 1e-6 * fwhm);
        prop_assert!((fit.fwhm - fwhm).abs() <= 1e-6 * fwhm);
        prop_assert!((fit.depth - depth).abs() <= 1e-6 * depth.abs());
        prop_assert!((fit.baseline - baseline).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lockin_is_linear_in_the_detector_channels(scheme in ion(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let off = scheme.control_off().unwrap();
        let geometry = CouplingGeometry::from_epsilon(0.04, 0.3).unwrap();
        let chopper = ChopperConfig::default();
        let measure = |probe_power: f64, forward_fluorescence: f64| {
            let d = Detector { probe_power, forward_fluorescence, shot_noise: None };
            lockin_measure_with(&scheme, &off, &chopper, &geometry, &d).unwrap().dc_signal
        };
        let combined = measure(a, b);
        let parts = a * measure(1.0, 0.0) + b * measure(0.0, 1.0);
        prop_assert!((combined - parts).abs() <= 1e-12 * (1.0 + parts.abs()));
    }

    #[test]
    fn quasi_static_lockin_is_frequency_invariant_and_odd_under_swap(
        scheme in ion(),
        phase in 0.0..(2.0 * PI),
    ) {
        let off = scheme.control_off().unwrap();
        let geometry = CouplingGeometry::from_epsilon(0.04, 1.0).unwrap();
        let d = Detector::default();
        let at = |frequency: f64| ChopperConfig {
            frequency,
            demod_phase: phase,
            mode: LockInMode::QuasiStatic,
            ..ChopperConfig::default()
        };
        let fast = lockin_measure_with(&scheme, &off, &at(600.0), &geometry, &d).unwrap();
        let slow = lockin_measure_with(&scheme, &off, &at(60.0), &geometry, &d).unwrap();
        prop_assert!(fast.settled && slow.settled);
        prop_assert!((fast.dc_signal - slow.dc_signal).abs() <= 1e-6 * fast.dc_signal.abs().max(1e-15));
        let swapped = lockin_measure_with(&off, &scheme, &at(600.0), &geometry, &d).unwrap();
        prop_assert!((swapped.dc_signal + fast.dc_signal).abs() <= 1e-12 * (1.0 + fast.dc_signal.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eit_fluorescence_minimum_sits_at_the_transmission_maximum(
        omega_c in 1.0..6.0f64,
        lw_p in 0.01..0.2f64,
        lw_c in 0.01..0.2f64,
    ) {
        let scheme = build_lambda3(
            7.3365 * MHZ,
            2.7135 * MHZ,
            0.0,
            LaserField::new("p", Transition::GroundExcited, 0.1 * MHZ, 0.0).with_linewidth(lw_p * MHZ),
            LaserField::new("c", Transition::MetastableExcited, omega_c * MHZ, 0.0).with_linewidth(lw_c * MHZ),
        )
        .unwrap();
        let axis = ScanAxis::new(ScanParameter::TwoPhotonDetuning, -3.0 * MHZ, 3.0 * MHZ, 61).unwrap();
        let geometry = CouplingGeometry::from_epsilon(0.0034, 1.0).unwrap();
        let table = scan(&scheme, &axis, &geometry, Engine::Numeric).unwrap();
        let t = table.column(Column::Transmission);
        let f = table.column(Column::Fluorescence);
        let t_max = (0..t.len()).max_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
        let f_min = (0..f.len()).min_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        prop_assert!(t_max.abs_diff(f_min) <= 1, "{t_max} vs {f_min}");
    }

    #[test]
    fn scans_are_deterministic_and_fits_grid_stable(gamma_mhz in 2.0..10.0f64, eps in 0.001..0.05f64) {
        let laser = LaserField::new("p", Transition::GroundExcited, gamma_mhz * MHZ / 100.0, 0.0);
        let scheme = build_two_level(gamma_mhz * MHZ, laser).unwrap();
        let geometry = CouplingGeometry::from_epsilon(eps, 1.0).unwrap();
        let span = 6.0 * gamma_mhz * MHZ;
        let coarse = ScanAxis::new(ScanParameter::ProbeDetuning, -span, span, 101).unwrap();
        let fine = ScanAxis::new(ScanParameter::ProbeDetuning, -span, span, 401).unwrap();
        let a = scan(&scheme, &coarse, &geometry, Engine::Numeric).unwrap();
        let b = scan(&scheme, &coarse, &geometry, Engine::Numeric).unwrap();
        prop_assert_eq!(&a.rows, &b.rows);
        let fa = fit_lorentzian(&a, Column::Extinction).unwrap();
        let fb = fit_lorentzian(&scan(&scheme, &fine, &geometry, Engine::Numeric).unwrap(), Column::Extinction)
            .unwrap();
        prop_assert!((fa.fwhm - fb.fwhm).abs() <= 0.005 * fb.fwhm);
        prop_assert!((fa.depth - fb.depth).abs() <= 0.005 * fb.depth.abs());
    }
}
