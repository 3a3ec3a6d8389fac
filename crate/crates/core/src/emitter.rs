//! Monte Carlo of the two-pulse protocol on a four-level emitter.
//!
//! Each trial runs the level-scheme state machine
//!
//! ```text
//! prepare m (prob prep_success) --pulse 1 (p1)--> e -> cascade -> g
//!        \--not excited--> [optional m decay] --pulse 2 (p2)--> e -> cascade -> g
//! ```
//!
//! Once the cascade has run the emitter sits in `g`, where the pump is far off
//! resonance, so a trial emits at most one pair. Pulses are instantaneous
//! Bernoulli excitations. Emission times are drawn exactly from `|psi|^2`,
//! which factorizes into independent exponentials in `t_A` and `t_B - t_A`
//! with intensity rates `2 G_A` and `2 G_B`.
//!
//! Random draws of one trial, in order: preparation, pulse 1, metastable decay
//! (only if configured and pulse 1 failed), pulse 2 (if reached), the two
//! emission delays (if a pair is emitted), then per photon a detection draw
//! (only if efficiency < 1) and a Gaussian jitter draw (only if jitter > 0).

use std::io::Write;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::DecayRates;
use crate::error::{check_range, Error, Result};
use crate::rng::trial_rng;
use crate::timebin::PumpConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterConfig {
    pub pump: PumpConfig,
    pub rates: DecayRates,
    /// Probability that preparation reaches the metastable level.
    pub prep_success: f64,
    pub n_trials: u64,
    pub seed: u64,
    /// Decay rate out of `m` between the pulses; `None` keeps `m` stable.
    pub metastable_decay: Option<f64>,
    /// Repetition period of the protocol. When set, trial `k` starts at
    /// `k * period` and detector dead time acts across trials.
    pub cycle_period: Option<f64>,
}

impl EmitterConfig {
    /// Defaults: `prep_success = 0.5`, `10^5` trials, seed 0, stable `m`.
    pub fn new(pump: PumpConfig, rates: DecayRates) -> Self {
        Self {
            pump,
            rates,
            prep_success: 0.5,
            n_trials: 100_000,
            seed: 0,
            metastable_decay: None,
            cycle_period: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pump.validate()?;
        check_range("prep_success", self.prep_success, 0.0, 1.0, "0 <= prep_success <= 1")?;
        if self.n_trials == 0 {
            return Err(Error::OutOfRange { name: "n_trials", value: 0.0, expected: "n_trials >= 1" });
        }
        if let Some(r) = self.metastable_decay {
            check_range("metastable_decay", r, 0.0, f64::MAX, "finite rate >= 0")?;
        }
        if let Some(p) = self.cycle_period {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::OutOfRange { name: "cycle_period", value: p, expected: "period > 0" });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Standard deviation of Gaussian timestamp noise; 0 is ideal.
    pub jitter_sigma: f64,
    /// Probability that a photon is detected.
    pub efficiency: f64,
    /// Minimum separation of accepted detections on one channel.
    pub dead_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self { jitter_sigma: 0.0, efficiency: 1.0, dead_time: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("jitter_sigma", self.jitter_sigma, 0.0, f64::MAX, "jitter_sigma >= 0")?;
        check_range("efficiency", self.efficiency, 0.0, 1.0, "0 <= efficiency <= 1")?;
        check_range("dead_time", self.dead_time, 0.0, f64::MAX, "dead_time >= 0")?;
        Ok(())
    }

    /// Applies loss and jitter to a photon arriving at `t`.
    pub fn detect<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Option<f64> {
        if self.efficiency < 1.0 && !rng.random_bool(self.efficiency) {
            return None;
        }
        if self.jitter_sigma > 0.0 {
            let noise = Normal::new(0.0, self.jitter_sigma).expect("validated sigma");
            Some(t + noise.sample(rng))
        } else {
            Some(t)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bin {
    Early,
    Late,
    #[serde(rename = "none")]
    Empty,
}

/// Outcome of one protocol cycle.
///
/// True times are relative to the exciting pulse; detected times are relative
/// to the first pulse of the cycle and include the late-bin offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub trial: u64,
    pub prepared: bool,
    pub bin: Bin,
    pub t_a_true: Option<f64>,
    pub t_b_true: Option<f64>,
    pub t_a_det: Option<f64>,
    pub t_b_det: Option<f64>,
}

impl EmissionRecord {
    fn empty(trial: u64, prepared: bool) -> Self {
        Self {
            trial,
            prepared,
            bin: Bin::Empty,
            t_a_true: None,
            t_b_true: None,
            t_a_det: None,
            t_b_det: None,
        }
    }

    /// Number of cascades in this record (0 or 1 by construction).
    pub fn cascades(&self) -> usize {
        usize::from(self.bin != Bin::Empty)
    }
}

/// Draws `(t_A, t_B)` from `|psi(t_A, t_B)|^2`.
pub fn sample_cascade_times<R: Rng + ?Sized>(rates: &DecayRates, rng: &mut R) -> (f64, f64) {
    let first = Exp::new(2.0 * rates.gamma_a()).expect("positive rate");
    let second = Exp::new(2.0 * rates.gamma_b()).expect("positive rate");
    let t_a = first.sample(rng);
    let t_b = t_a + second.sample(rng);
    (t_a, t_b)
}

/// Runs one protocol cycle.
pub fn run_trial<R: Rng + ?Sized>(
    config: &EmitterConfig,
    detector: &DetectorModel,
    trial: u64,
    rng: &mut R,
) -> EmissionRecord {
    let prepared = rng.random_bool(config.prep_success);
    if !prepared {
        return EmissionRecord::empty(trial, false);
    }
    let pump = &config.pump;
    let bin = if rng.random_bool(pump.p1) {
        Bin::Early
    } else {
        let survived = match config.metastable_decay {
            Some(rate) if rate > 0.0 => rng.random_bool((-rate * pump.tau_bin).exp()),
            _ => true,
        };
        if survived && rng.random_bool(pump.p2) {
            Bin::Late
        } else {
            Bin::Empty
        }
    };
    if bin == Bin::Empty {
        return EmissionRecord::empty(trial, true);
    }
    let (t_a, t_b) = sample_cascade_times(&config.rates, rng);
    let offset = if bin == Bin::Late { pump.tau_bin } else { 0.0 };
    let t_a_det = detector.detect(offset + t_a, rng);
    let t_b_det = detector.detect(offset + t_b, rng);
    EmissionRecord {
        trial,
        prepared,
        bin,
        t_a_true: Some(t_a),
        t_b_true: Some(t_b),
        t_a_det,
        t_b_det,
    }
}

/// Binomial proportion with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn proportion(hits: u64, n: u64) -> Self {
        if n == 0 {
            return Self { value: f64::NAN, stderr: f64::NAN };
        }
        let p = hits as f64 / n as f64;
        Self { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// `|value - expected|` in units of the binomial standard error of
    /// `expected` over `n` samples.
    pub fn sigmas_from(&self, expected: f64, n: u64) -> f64 {
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        if se == 0.0 {
            if self.value == expected { 0.0 } else { f64::INFINITY }
        } else {
            (self.value - expected).abs() / se
        }
    }
}

/// Event counts of a batch; merging is plain addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub trials: u64,
    pub prepared: u64,
    pub early: u64,
    pub late: u64,
    pub empty: u64,
    pub detected_a: u64,
    pub detected_b: u64,
    pub detected_both: u64,
    pub dead_time_suppressed: u64,
}

impl BatchCounts {
    pub fn from_records(records: &[EmissionRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            c.trials += 1;
            c.prepared += u64::from(r.prepared);
            match r.bin {
                Bin::Early => c.early += 1,
                Bin::Late => c.late += 1,
                Bin::Empty => c.empty += 1,
            }
            c.detected_a += u64::from(r.t_a_det.is_some());
            c.detected_b += u64::from(r.t_b_det.is_some());
            c.detected_both += u64::from(r.t_a_det.is_some() && r.t_b_det.is_some());
        }
        c
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            prepared: self.prepared + other.prepared,
            early: self.early + other.early,
            late: self.late + other.late,
            empty: self.empty + other.empty,
            detected_a: self.detected_a + other.detected_a,
            detected_b: self.detected_b + other.detected_b,
            detected_both: self.detected_both + other.detected_both,
            dead_time_suppressed: self.dead_time_suppressed + other.dead_time_suppressed,
        }
    }

    pub fn summary(&self) -> BatchSummary {
        let n = self.trials;
        let pairs = self.early + self.late;
        let emitted_photons = 2 * pairs;
        BatchSummary {
            counts: *self,
            pair_probability: Estimate::proportion(pairs, n),
            early_fraction: Estimate::proportion(self.early, n),
            late_fraction: Estimate::proportion(self.late, n),
            prepared_fraction: Estimate::proportion(self.prepared, n),
            coincidence_fraction: Estimate::proportion(self.detected_both, n),
            photon_loss_fraction: Estimate::proportion(
                emitted_photons - self.detected_a - self.detected_b,
                emitted_photons,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub counts: BatchCounts,
    pub pair_probability: Estimate,
    pub early_fraction: Estimate,
    pub late_fraction: Estimate,
    pub prepared_fraction: Estimate,
    pub coincidence_fraction: Estimate,
    /// Fraction of emitted photons without a detection timestamp.
    pub photon_loss_fraction: Estimate,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub records: Vec<EmissionRecord>,
    pub summary: BatchSummary,
}

/// Runs trials `range` serially; trial `k` uses `trial_rng(seed, k)`.
pub fn simulate_range(config: &EmitterConfig, detector: &DetectorModel, range: Range<u64>) -> Vec<EmissionRecord> {
    range
        .map(|k| run_trial(config, detector, k, &mut trial_rng(config.seed, k)))
        .collect()
}

/// Runs the whole batch, splitting trials across the current rayon pool.
///
/// Records are in trial order and independent of the number of workers.
pub fn simulate_batch(config: &EmitterConfig, detector: &DetectorModel) -> Result<Batch> {
    config.validate()?;
    detector.validate()?;
    let mut records: Vec<EmissionRecord> = (0..config.n_trials)
        .into_par_iter()
        .map(|k| run_trial(config, detector, k, &mut trial_rng(config.seed, k)))
        .collect();
    Ok(finish(config, detector, &mut records).map(|summary| Batch { records, summary })?)
}

/// Serial reference implementation of [`simulate_batch`].
pub fn simulate_batch_serial(config: &EmitterConfig, detector: &DetectorModel) -> Result<Batch> {
    config.validate()?;
    detector.validate()?;
    let mut records = simulate_range(config, detector, 0..config.n_trials);
    Ok(finish(config, detector, &mut records).map(|summary| Batch { records, summary })?)
}

fn finish(config: &EmitterConfig, detector: &DetectorModel, records: &mut [EmissionRecord]) -> Result<BatchSummary> {
    let suppressed = match config.cycle_period {
        Some(period) if detector.dead_time > 0.0 => apply_dead_time(records, detector.dead_time, period),
        _ => 0,
    };
    let mut counts = BatchCounts::from_records(records);
    counts.dead_time_suppressed = suppressed;
    Ok(counts.summary())
}

/// Removes detections that follow an accepted detection on the same channel
/// by less than `dead_time`, with trial `k` starting at `k * period`.
/// Returns the number of suppressed detections.
pub fn apply_dead_time(records: &mut [EmissionRecord], dead_time: f64, period: f64) -> u64 {
    let mut last_a = f64::NEG_INFINITY;
    let mut last_b = f64::NEG_INFINITY;
    let mut suppressed = 0;
    for r in records.iter_mut() {
        let start = r.trial as f64 * period;
        for (slot, last) in [(&mut r.t_a_det, &mut last_a), (&mut r.t_b_det, &mut last_b)] {
            if let Some(t) = *slot {
                let abs = start + t;
                if abs - *last < dead_time {
                    *slot = None;
                    suppressed += 1;
                } else {
                    *last = abs;
                }
            }
        }
    }
    suppressed
}

/// Column order of the record CSV.
pub const RECORD_CSV_HEADER: [&str; 7] =
    ["trial", "prepared", "bin", "t_a_true", "t_b_true", "t_a_det", "t_b_det"];

/// Writes records as CSV with header
/// `trial,prepared,bin,t_a_true,t_b_true,t_a_det,t_b_det`; absent times are
/// empty fields, `bin` is `early`, `late` or `none`.
pub fn write_records_csv<W: Write>(records: &[EmissionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(RECORD_CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}
