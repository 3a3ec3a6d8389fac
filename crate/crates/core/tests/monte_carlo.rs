//! Statistical checks of the emitter and fringe Monte Carlo.

use cascade_core::emitter::{simulate_batch, Bin, DetectorModel, EmitterConfig};
use cascade_core::interferometry::{monte_carlo_fringe, AnalyzerConfig, FringeScan, ScanPhase};
use cascade_core::timebin::PumpConfig;
use cascade_core::DecayRates;

fn config(p1: f64, p2: f64, n: u64, seed: u64) -> EmitterConfig {
    let mut c = EmitterConfig::new(PumpConfig::new(p1, p2, 0.0, 20.0).unwrap(), DecayRates::new(1.0, 1.0).unwrap());
    c.prep_success = 1.0;
    c.n_trials = n;
    c.seed = seed;
    c
}

#[test]
fn balanced_pump_always_emits() {
    let b = simulate_batch(&config(0.5, 1.0, 100_000, 1), &DetectorModel::ideal()).unwrap();
    assert_eq!(b.summary.pair_probability.value, 1.0);
    assert!(b.summary.early_fraction.sigmas_from(0.5, 100_000) < 3.0);
}

#[test]
fn pair_probability_matches_two_pulse_formula() {
    let n = 1_000_000;
    let b = simulate_batch(&config(0.3, 0.8, n, 2), &DetectorModel::ideal()).unwrap();
    let est = b.summary.pair_probability;
    assert!(est.sigmas_from(0.86, n) < 3.0, "{est:?}");
    assert!((est.stderr - (0.86f64 * 0.14 / n as f64).sqrt()).abs() < 1e-5);
}

#[test]
fn mean_emission_gap_is_half_lifetime() {
    let mut c = config(1.0, 0.0, 200_000, 3);
    c.rates = DecayRates::new(1.0, 1.0).unwrap();
    let b = simulate_batch(&c, &DetectorModel::ideal()).unwrap();
    let gaps: Vec<f64> = b.records.iter().map(|r| r.t_b_true.unwrap() - r.t_a_true.unwrap()).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sd / n.sqrt(), "{mean}");
}

#[test]
fn jitter_has_configured_width() {
    let det = DetectorModel { jitter_sigma: 0.05, efficiency: 1.0, dead_time: 0.0 };
    let b = simulate_batch(&config(0.5, 1.0, 500_000, 4), &det).unwrap();
    let mut noise = Vec::with_capacity(1_000_000);
    for r in &b.records {
        let offset = if r.bin == Bin::Late { 20.0 } else { 0.0 };
        noise.push(r.t_a_det.unwrap() - offset - r.t_a_true.unwrap());
        noise.push(r.t_b_det.unwrap() - offset - r.t_b_true.unwrap());
    }
    let n = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / n;
    let sd = (noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((sd / 0.05 - 1.0).abs() < 0.02, "{sd}");
    assert!(mean.abs() < 4.0 * 0.05 / n.sqrt());
}

#[test]
fn dead_time_needs_a_cycle_period() {
    let det = DetectorModel { jitter_sigma: 0.0, efficiency: 1.0, dead_time: 30.0 };
    let mut c = config(1.0, 0.0, 1000, 5);
    let free = simulate_batch(&c, &det).unwrap();
    assert_eq!(free.summary.counts.dead_time_suppressed, 0);
    c.cycle_period = Some(25.0);
    let gated = simulate_batch(&c, &det).unwrap();
    // every cycle starts 25 after the previous one: each channel sees at most
    // every second detection
    let s = gated.summary.counts;
    assert!(s.dead_time_suppressed >= 900, "{s:?}");
    assert!(s.detected_a <= 501 && s.detected_b <= 501);
}

#[test]
fn partial_preparation_scales_emission() {
    let mut c = config(0.5, 1.0, 200_000, 6);
    c.prep_success = 0.5;
    let b = simulate_batch(&c, &DetectorModel::ideal()).unwrap();
    assert!(b.summary.pair_probability.sigmas_from(0.5, 200_000) < 4.0);
    assert!(b.records.iter().filter(|r| !r.prepared).all(|r| r.bin == Bin::Empty));
}

fn fringe(det: &DetectorModel, trials: u64) -> cascade_core::interferometry::MonteCarloFringe {
    let an = AnalyzerConfig::new(0.0, 0.0, 20.0).unwrap();
    let scan = FringeScan::uniform(ScanPhase::B, 8, trials, 20.0);
    monte_carlo_fringe(&config(0.5, 1.0, 1, 8), &an, det, &scan).unwrap()
}

#[test]
fn efficiency_thins_coincidences_quadratically() {
    let ideal = fringe(&DetectorModel::ideal(), 50_000);
    let lossy = fringe(&DetectorModel { efficiency: 0.4, ..DetectorModel::ideal() }, 50_000);
    let n_ideal: u64 = ideal.points.iter().map(|p| p.central()).sum();
    let n_lossy: u64 = lossy.points.iter().map(|p| p.central()).sum();
    let expected = 0.16 * n_ideal as f64;
    let sigma = (n_ideal as f64 * 0.16 * 0.84).sqrt();
    assert!((n_lossy as f64 - expected).abs() < 4.0 * sigma, "{n_lossy} vs {expected}");
    // a quarter of emitted pairs land in the central slot
    let trials = 8.0 * 50_000.0;
    assert!((n_ideal as f64 / trials - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / trials).sqrt());
}

#[test]
fn large_jitter_washes_out_the_fringe() {
    let ideal = fringe(&DetectorModel::ideal(), 20_000);
    let blurred = fringe(&DetectorModel { jitter_sigma: 40.0, ..DetectorModel::ideal() }, 20_000);
    println!("visibility ideal {:.3}, with jitter 2 tau {:.3}", ideal.visibility, blurred.visibility);
    assert!(blurred.visibility < ideal.visibility);
}
