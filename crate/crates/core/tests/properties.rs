//! Property-based invariants.

use std::f64::consts::PI;
use std::sync::Arc;

use cascade_core::emitter::{simulate_batch, simulate_range, DetectorModel, EmitterConfig};
use cascade_core::gating::{apply_windows, DetectionWindow};
use cascade_core::interferometry::{
    coincidence_probability, phase_scan, visibility, AnalyzerConfig, ScanPhase, PORT_PAIRS,
};
use cascade_core::rng::derive_seed;
use cascade_core::swapping::{mixed_overlap, purcell_adjust, PurcellFactors};
use cascade_core::timebin::{bin_balance, make_pair_state, PumpConfig};
use cascade_core::{
    build_cascade_amplitude, error_analytic, purity, reduce_to_b, reduced_purity, CascadeAmplitude, DecayRates,
    TimeGrid,
};
use proptest::prelude::*;

fn amp(ga: f64, gb: f64, n: usize) -> CascadeAmplitude {
    let rates = DecayRates::new(ga, gb).unwrap();
    build_cascade_amplitude(&rates, &TimeGrid::default_for(&rates).with_points(n).unwrap()).unwrap()
}

fn shared_envelope() -> Arc<CascadeAmplitude> {
    Arc::new(amp(1.0, 1.0, 128))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn purity_is_a_probability_and_tracks_closed_form(ratio in 0.1f64..10.0) {
        let a = amp(ratio, 1.0, 512);
        let p = reduced_purity(&a).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!((1.0 - p - error_analytic(a.rates())).abs() < 3e-3);
    }

    #[test]
    fn purity_depends_on_rate_ratio_only(ga in 0.2f64..5.0, gb in 0.2f64..5.0, c in 0.1f64..10.0) {
        let p1 = reduced_purity(&amp(ga, gb, 256)).unwrap();
        let p2 = reduced_purity(&amp(ga * c, gb * c, 256)).unwrap();
        prop_assert!((p1 - p2).abs() < 1e-12, "{} {}", p1, p2);
    }

    #[test]
    fn purity_grows_with_first_rate(gb in 0.3f64..3.0, r in 0.2f64..4.0, step in 1.2f64..3.0) {
        let lo = reduced_purity(&amp(r * gb, gb, 256)).unwrap();
        let hi = reduced_purity(&amp(r * gb * step, gb, 256)).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn separated_windows_give_product_form(
        ga in 0.3f64..3.0,
        gb in 0.3f64..3.0,
        t1 in 0.05f64..1.5,
        gap in 0.0f64..1.0,
        width in 0.1f64..2.0,
    ) {
        let a = amp(ga, gb, 256);
        let g_min = ga.min(gb);
        let t2 = (t1 + gap) / g_min;
        let wa = DetectionWindow::new(0.0, t1 / g_min).unwrap();
        let wb = DetectionWindow::new(t2, t2 + width / g_min).unwrap();
        let g = apply_windows(&a, &wa, &wb).unwrap();
        if let Some(s) = g.schmidt_spectrum().unwrap() {
            prop_assert!(s[0] >= 1.0 - 1e-9, "{}", s[0]);
        }
        prop_assert!(g.probability >= 0.0 && g.probability <= 1.0);
    }

    #[test]
    fn widening_a_window_never_loses_probability(start in 0.0f64..3.0, w in 0.1f64..3.0, extra in 0.0f64..3.0) {
        let a = amp(1.0, 0.8, 256);
        let wa = DetectionWindow::new(0.0, 2.0).unwrap();
        let narrow = apply_windows(&a, &wa, &DetectionWindow::new(start, start + w).unwrap()).unwrap();
        let wide = apply_windows(&a, &wa, &DetectionWindow::new(start, start + w + extra).unwrap()).unwrap();
        prop_assert!(wide.probability >= narrow.probability);
    }

    #[test]
    fn gating_b_commutes_with_reduction(start in 0.0f64..4.0, w in 0.5f64..4.0) {
        let a = amp(1.3, 0.9, 128);
        let grid = a.grid().clone();
        let wb = DetectionWindow::new(start, start + w).unwrap();
        let g = apply_windows(&a, &DetectionWindow::full(&grid), &wb).unwrap();
        let cols = wb.cells(&grid, 1).unwrap();
        let rho = reduce_to_b(&a).unwrap();
        let block_trace: f64 = cols.clone().map(|j| rho.matrix()[(j, j)].re).sum();
        prop_assert!((block_trace - g.probability).abs() < 1e-10);
        let gated = reduce_to_b(g.amplitude.as_ref().unwrap()).unwrap();
        for j in cols.clone() {
            for k in cols.clone() {
                let expect = rho.matrix()[(j, k)] / block_trace;
                prop_assert!((gated.matrix()[(j, k)] - expect).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn emission_probability_ignores_pump_phase(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, phi in -10.0f64..10.0) {
        let s = make_pair_state(PumpConfig::new(p1, p2, 0.0, 30.0).unwrap(), shared_envelope()).unwrap();
        let t = s.with_pump_phase(phi).unwrap();
        prop_assert_eq!(s.emission_probability(), t.emission_probability());
        prop_assert!((s.emission_probability() - (p1 + (1.0 - p1) * p2)).abs() < 1e-15);
    }

    #[test]
    fn bin_balance_is_symmetric_in_the_moduli(p1 in 0.01f64..0.99, p2 in 0.01f64..1.0) {
        // |a_e|^2 = p1, |a_l|^2 = (1-p1) p2; swap them with another pump
        let pl = (1.0 - p1) * p2;
        prop_assume!(pl < 1.0 - 1e-9);
        let swapped_p2 = p1 / (1.0 - pl);
        prop_assume!(swapped_p2 <= 1.0);
        let env = shared_envelope();
        let a = make_pair_state(PumpConfig::new(p1, p2, 0.0, 30.0).unwrap(), env.clone()).unwrap();
        let b = make_pair_state(PumpConfig::new(pl, swapped_p2, 1.3, 30.0).unwrap(), env).unwrap();
        prop_assert!((bin_balance(&a).unwrap() - bin_balance(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fringes_depend_on_combined_phase_only(
        p1 in 0.05f64..0.95,
        p2 in 0.05f64..1.0,
        phi_p in -3.0f64..3.0,
        phi_a in -3.0f64..3.0,
        phi_b in -3.0f64..3.0,
        delta in -3.0f64..3.0,
    ) {
        let env = shared_envelope();
        let s1 = make_pair_state(PumpConfig::new(p1, p2, phi_p, 30.0).unwrap(), env.clone()).unwrap();
        let s2 = make_pair_state(PumpConfig::new(p1, p2, phi_p + delta, 30.0).unwrap(), env).unwrap();
        let a1 = AnalyzerConfig::new(phi_a, phi_b, 30.0).unwrap();
        let a2 = AnalyzerConfig::new(phi_a + delta, phi_b, 30.0).unwrap();
        let mut total = 0.0;
        for ports in PORT_PAIRS {
            let x = coincidence_probability(&s1, &a1, ports).unwrap().probability;
            let y = coincidence_probability(&s2, &a2, ports).unwrap().probability;
            prop_assert!((x - y).abs() < 1e-12);
            total += x;
        }
        prop_assert!((total - 0.25).abs() < 1e-12);
    }

    #[test]
    fn phase_scans_are_exact_sinusoids(
        p1 in 0.0f64..1.0,
        p2 in 0.0f64..1.0,
        eta in 0.05f64..0.95,
        which in 0usize..3,
    ) {
        prop_assume!(p1 + (1.0 - p1) * p2 > 1e-3);
        let s = make_pair_state(PumpConfig::new(p1, p2, 0.4, 30.0).unwrap(), shared_envelope()).unwrap();
        let an = AnalyzerConfig { splitting_ratio: eta, ..AnalyzerConfig::new(0.2, -0.7, 30.0).unwrap() };
        let which = [ScanPhase::A, ScanPhase::B, ScanPhase::P][which];
        let scan = phase_scan(&s, &an, which, 16).unwrap();
        for c in &scan.curves {
            let v = visibility(&s, &an, c.ports).unwrap();
            prop_assert!(v <= 1.0 + 1e-12);
            if c.fit.amplitude > 1e-10 {
                prop_assert!(c.fit.relative_residual < 1e-9);
                prop_assert!((c.fit.period - 2.0 * PI).abs() < 1e-9);
            }
            prop_assert!((c.fit.visibility() - v).abs() < 1e-8);
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(g1 in 0.3f64..3.0, g2 in 0.3f64..3.0, g3 in 0.3f64..3.0, g4 in 0.3f64..3.0) {
        let grid = TimeGrid::new(10.0 / g1.min(g2).min(g3).min(g4), 96).unwrap();
        let r1 = reduce_to_b(&build_cascade_amplitude(&DecayRates::new(g1, g2).unwrap(), &grid).unwrap()).unwrap();
        let r2 = reduce_to_b(&build_cascade_amplitude(&DecayRates::new(g3, g4).unwrap(), &grid).unwrap()).unwrap();
        let a = mixed_overlap(&r1, &r2).unwrap();
        let b = mixed_overlap(&r2, &r1).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!(a > 0.0 && a <= 1.0 + 1e-12);
        prop_assert_eq!(mixed_overlap(&r1, &r1).unwrap(), purity(&r1));
    }

    #[test]
    fn stronger_first_cavity_lowers_the_error(fa in 1.0f64..50.0, step in 1.01f64..3.0, fb in 0.5f64..4.0) {
        let base = DecayRates::from_lifetimes(0.6, 1.4).unwrap();
        let lo = purcell_adjust(&base, &PurcellFactors::new(fa, fb).unwrap()).unwrap();
        let hi = purcell_adjust(&base, &PurcellFactors::new(fa * step, fb).unwrap()).unwrap();
        prop_assert!(error_analytic(&hi) < error_analytic(&lo));
        let both = purcell_adjust(&base, &PurcellFactors::new(fa, fa).unwrap()).unwrap();
        prop_assert!((error_analytic(&both) - error_analytic(&base)).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bin_fractions_follow_pump_probabilities(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, seed in any::<u64>()) {
        let n = 40_000;
        let mut c = EmitterConfig::new(PumpConfig::new(p1, p2, 0.0, 30.0).unwrap(), DecayRates::new(1.0, 1.0).unwrap());
        c.prep_success = 1.0;
        c.n_trials = n;
        c.seed = seed;
        let b = simulate_batch(&c, &DetectorModel::ideal()).unwrap();
        prop_assert!(b.summary.early_fraction.sigmas_from(p1, n) <= 4.0);
        prop_assert!(b.summary.late_fraction.sigmas_from((1.0 - p1) * p2, n) <= 4.0);
        prop_assert!(b.summary.pair_probability.sigmas_from(p1 + (1.0 - p1) * p2, n) <= 4.0);
        prop_assert!(b.records.iter().all(|r| r.cascades() <= 1));
    }

    #[test]
    fn subranges_reproduce_the_serial_run(cut in 1u64..999, seed in any::<u64>()) {
        let mut c = EmitterConfig::new(PumpConfig::new(0.4, 0.9, 0.0, 30.0).unwrap(), DecayRates::new(1.0, 2.0).unwrap());
        c.n_trials = 1000;
        c.seed = seed;
        let det = DetectorModel { jitter_sigma: 0.1, efficiency: 0.7, dead_time: 0.0 };
        let whole = simulate_range(&c, &det, 0..1000);
        let mut parts = simulate_range(&c, &det, 0..cut);
        parts.extend(simulate_range(&c, &det, cut..1000));
        prop_assert_eq!(&whole, &parts);
        prop_assert_eq!(whole, simulate_batch(&c, &det).unwrap().records);
        prop_assert_ne!(derive_seed(seed, cut), derive_seed(seed, cut + 1));
    }
}
