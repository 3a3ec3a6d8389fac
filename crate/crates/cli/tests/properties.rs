//! Invariants of configuration parsing and sweep spacing.

use cascade_cli::config::{parse_config, Scale, SweepParam, SweepSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn written_values_parse_back(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, ga in 0.01f64..100.0, seed in any::<u64>()) {
        prop_assume!(p1 + (1.0 - p1) * p2 > 0.0);
        let text = format!("pump.p1 = {p1}\npump.p2 = {p2}\nrates.gamma_a = {ga}\nemitter.seed = {seed}\n");
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(c.pump.p1, p1);
        prop_assert_eq!(c.pump.p2, p2);
        prop_assert_eq!(c.rates.gamma_a(), ga);
        prop_assert_eq!(c.emitter.seed, seed);
    }

    #[test]
    fn out_of_range_probability_is_rejected(p in prop_oneof![-10.0f64..-1e-9, 1.0f64 + 1e-9..10.0]) {
        let e = parse_config(&format!("\n\npump.p2 = {p}\n")).unwrap_err();
        prop_assert_eq!(e.line, 3);
        prop_assert_eq!(e.key.as_deref(), Some("pump.p2"));
    }

    #[test]
    fn sweep_values_hit_endpoints_in_order(start in 0.01f64..10.0, span in 0.01f64..100.0, steps in 2usize..40, log in any::<bool>()) {
        let spec = SweepSpec {
            param: SweepParam::FA,
            start,
            stop: start + span,
            steps,
            scale: if log { Scale::Log } else { Scale::Linear },
        };
        let v = spec.values();
        prop_assert_eq!(v.len(), steps);
        prop_assert!((v[0] - start).abs() <= 1e-12 * start);
        prop_assert!((v[steps - 1] - (start + span)).abs() <= 1e-12 * (start + span));
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}
