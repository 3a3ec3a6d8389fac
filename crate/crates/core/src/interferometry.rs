//! Franson-type interference of time-bin pairs.
//!
//! Each photon passes an unbalanced Mach-Zehnder analyzer with a short and a
//! long arm; the long arm adds `path_delay` and the analyzer phase. With the
//! delay equal to the pump-pulse separation, the early branch taking both long
//! arms arrives together with the late branch taking both short arms. These
//! central-slot coincidences interfere as `cos(phi_P - phi_A - phi_B)`; the
//! other path combinations land in side slots and only add background, so
//! they are discarded by post-selection.
//!
//! # Conventions
//!
//! Probabilities are conditioned on one emitted pair. Amplitudes from the
//! analyzer input to an output port, for transmittance `eta`:
//!
//! | arm   | port `+`  | port `-`             |
//! |-------|-----------|----------------------|
//! | short | `eta`     | `sqrt(eta (1-eta))`  |
//! | long  | `1 - eta` | `-sqrt(eta (1-eta))` |
//!
//! For 50/50 analyzers the four central-slot port pairs sum to `1/4` for every
//! phase. The two branch envelopes enter through their overlap: with `M` the
//! squared overlap of the early envelope shifted by `path_delay - tau_bin`
//! against the late one, the interference term is scaled by `sqrt(M)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeAmplitude, DecayRates};
use crate::emitter::{run_trial, Bin, DetectorModel, EmitterConfig};
use crate::error::{check_range, Error, Result};
use crate::linalg;
use crate::rng::{derive_seed, trial_rng};
use crate::timebin::TimeBinPairState;

/// Overlaps below this count as no interference at all.
pub const COHERENCE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    fn sign(self) -> char {
        match self {
            Port::Plus => '+',
            Port::Minus => '-',
        }
    }
}

/// Port pairs `(A, B)` in output order.
pub const PORT_PAIRS: [(Port, Port); 4] = [
    (Port::Plus, Port::Plus),
    (Port::Plus, Port::Minus),
    (Port::Minus, Port::Plus),
    (Port::Minus, Port::Minus),
];

/// `"++"`, `"+-"`, `"-+"` or `"--"`.
pub fn port_label(ports: (Port, Port)) -> String {
    [ports.0.sign(), ports.1.sign()].iter().collect()
}

fn port_index(ports: (Port, Port)) -> usize {
    PORT_PAIRS.iter().position(|p| *p == ports).expect("all pairs listed")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    /// Phase of the long arm at station A, radians.
    pub phi_a: f64,
    /// Phase of the long arm at station B, radians.
    pub phi_b: f64,
    /// Long-arm delay; interference needs it equal to the pump `tau_bin`.
    pub path_delay: f64,
    /// Beam-splitter transmittance of both analyzers.
    pub splitting_ratio: f64,
}

impl AnalyzerConfig {
    /// 50/50 analyzers.
    pub fn new(phi_a: f64, phi_b: f64, path_delay: f64) -> Result<Self> {
        let a = Self { phi_a, phi_b, path_delay, splitting_ratio: 0.5 };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_a.is_finite() && self.phi_b.is_finite()) {
            return Err(Error::OutOfRange { name: "phi_a/phi_b", value: f64::NAN, expected: "finite phases" });
        }
        if !(self.path_delay.is_finite() && self.path_delay > 0.0) {
            return Err(Error::OutOfRange { name: "path_delay", value: self.path_delay, expected: "path_delay > 0" });
        }
        let r = self.splitting_ratio;
        if !(r.is_finite() && r > 0.0 && r < 1.0) {
            return Err(Error::OutOfRange { name: "splitting_ratio", value: r, expected: "0 < splitting_ratio < 1" });
        }
        Ok(())
    }

    fn short_amp(&self, port: Port) -> f64 {
        let eta = self.splitting_ratio;
        match port {
            Port::Plus => eta,
            Port::Minus => (eta * (1.0 - eta)).sqrt(),
        }
    }

    fn long_amp(&self, port: Port) -> f64 {
        let eta = self.splitting_ratio;
        match port {
            Port::Plus => 1.0 - eta,
            Port::Minus => -(eta * (1.0 - eta)).sqrt(),
        }
    }
}

/// Indistinguishability of the two interfering branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    /// `|<early shifted | late>|^2`.
    pub overlap_m: f64,
    /// False when the overlap vanishes and the result is the incoherent sum.
    pub coherent: bool,
}

impl Coherence {
    pub fn from_overlap(overlap_m: f64) -> Self {
        Self { overlap_m, coherent: overlap_m >= COHERENCE_THRESHOLD }
    }

    fn factor(&self) -> f64 {
        if self.coherent {
            self.overlap_m.sqrt()
        } else {
            0.0
        }
    }
}

/// `|sum psi[i][j] conj(psi[i+k][j+k]) dt^2|^2` with `k = round(shift / dt)`:
/// the squared overlap of the envelope with itself delayed by `shift` on both
/// photons. Shifts that are not a whole number of cells are rounded.
pub fn envelope_overlap(amp: &CascadeAmplitude, shift: f64) -> f64 {
    let grid = amp.grid();
    let dt = grid.dt();
    let n = grid.n_points();
    let k = (shift.abs() / dt).round();
    if k >= n as f64 {
        return 0.0;
    }
    let k = k as usize;
    if k > 0 && ((shift.abs() / dt) - k as f64).abs() > 1e-6 {
        log::debug!("envelope shift {shift} rounded to {k} cells");
    }
    let v = amp.values();
    let rows: Vec<C64> = (0..n - k)
        .into_par_iter()
        .map(|i| (0..n - k).map(|j| v[(i, j)].conj() * v[(i + k, j + k)]).sum())
        .collect();
    let s: C64 = rows.into_iter().sum();
    (s * dt * dt).norm_sqr()
}

/// Closed form of [`envelope_overlap`] for the continuous cascade,
/// `exp(-2 G_A |shift|)`.
pub fn envelope_overlap_analytic(rates: &DecayRates, shift: f64) -> f64 {
    (-2.0 * rates.gamma_a() * shift.abs()).exp()
}

/// Branch coherence for a state measured with `analyzers`.
pub fn coherence(state: &TimeBinPairState, analyzers: &AnalyzerConfig) -> Coherence {
    let shift = analyzers.path_delay - state.pump().tau_bin;
    Coherence::from_overlap(envelope_overlap(state.envelope(), shift))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    pub probability: f64,
    pub coherent: bool,
    pub overlap_m: f64,
}

/// Central-slot amplitudes `(early, long-long)` and `(late, short-short)`.
fn branch_amplitudes(
    (ae, al): (C64, C64),
    analyzers: &AnalyzerConfig,
    ports: (Port, Port),
) -> (C64, C64) {
    let e = ae
        * analyzers.long_amp(ports.0)
        * analyzers.long_amp(ports.1)
        * C64::from_polar(1.0, analyzers.phi_a + analyzers.phi_b);
    let l = al * analyzers.short_amp(ports.0) * analyzers.short_amp(ports.1);
    (e, l)
}

fn central_probability(e: C64, l: C64, coh: &Coherence) -> f64 {
    e.norm_sqr() + l.norm_sqr() + 2.0 * coh.factor() * (e * l.conj()).re
}

/// Probability of a central-slot coincidence in `ports`, given one emitted
/// pair, using a precomputed [`Coherence`].
pub fn coincidence_probability_with(
    state: &TimeBinPairState,
    analyzers: &AnalyzerConfig,
    ports: (Port, Port),
    coh: &Coherence,
) -> Result<Coincidence> {
    analyzers.validate()?;
    let (e, l) = branch_amplitudes(state.normalized_amplitudes()?, analyzers, ports);
    Ok(Coincidence {
        probability: central_probability(e, l, coh),
        coherent: coh.coherent,
        overlap_m: coh.overlap_m,
    })
}

/// Probability of a central-slot coincidence in `ports`, given one emitted
/// pair. A path delay that does not match the pump separation within the
/// envelope coherence yields the incoherent value with `coherent = false`.
pub fn coincidence_probability(
    state: &TimeBinPairState,
    analyzers: &AnalyzerConfig,
    ports: (Port, Port),
) -> Result<Coincidence> {
    analyzers.validate()?;
    coincidence_probability_with(state, analyzers, ports, &coherence(state, analyzers))
}

/// Fringe visibility of port pair `ports`, `(max - min) / (max + min)`.
pub fn visibility(state: &TimeBinPairState, analyzers: &AnalyzerConfig, ports: (Port, Port)) -> Result<f64> {
    analyzers.validate()?;
    let coh = coherence(state, analyzers);
    let (e, l) = branch_amplitudes(state.normalized_amplitudes()?, analyzers, ports);
    let c0 = e.norm_sqr() + l.norm_sqr();
    Ok(2.0 * coh.factor() * e.norm() * l.norm() / c0)
}

/// Where emitted pairs end up, as fractions of all pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotFractions {
    /// Both photons in the central slot (the interfering events).
    pub central: f64,
    /// Both photons in the same side slot.
    pub same_side: f64,
    /// Photons took different arms and arrive in different slots.
    pub mismatched: f64,
}

pub fn slot_fractions(state: &TimeBinPairState, analyzers: &AnalyzerConfig) -> Result<SlotFractions> {
    analyzers.validate()?;
    let (ae, al) = state.normalized_amplitudes()?;
    let eta = analyzers.splitting_ratio;
    let (pe, pl) = (ae.norm_sqr(), al.norm_sqr());
    Ok(SlotFractions {
        central: pe * (1.0 - eta).powi(2) + pl * eta * eta,
        same_side: pe * eta * eta + pl * (1.0 - eta).powi(2),
        mismatched: 2.0 * eta * (1.0 - eta),
    })
}

/// Phase varied by a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanPhase {
    A,
    B,
    P,
}

/// Least-squares fit `y = offset + amplitude cos(2 pi x / period + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub period: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    /// `rms_residual / amplitude`, or relative to the offset for flat data.
    pub relative_residual: f64,
}

impl SinusoidFit {
    /// `amplitude / offset`.
    pub fn visibility(&self) -> f64 {
        if self.offset == 0.0 {
            0.0
        } else {
            self.amplitude / self.offset.abs()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * x / self.period + self.phase).cos()
    }
}

fn linear_fit(x: &[f64], y: &[f64], omega: f64) -> (f64, f64, f64) {
    let design: Vec<f64> = x.iter().flat_map(|&t| [1.0, (omega * t).cos(), (omega * t).sin()]).collect();
    let p = linalg::real_lstsq(&design, 3, y);
    (p[0], p[1], p[2])
}

fn sum_sq(x: &[f64], y: &[f64], c: f64, a: f64, b: f64, w: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&t, &v)| {
            let r = v - c - a * (w * t).cos() - b * (w * t).sin();
            r * r
        })
        .sum()
}

/// Fits a sinusoid with free frequency.
///
/// The start frequency is the strongest DFT component of the samples
/// (assumed roughly uniform); a Gauss-Newton refinement over offset,
/// quadratures and frequency follows. Flat data give amplitude 0 and the
/// start period.
pub fn fit_sinusoid(x: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    let n = x.len();
    if n != y.len() || n < 4 {
        return Err(Error::OutOfRange { name: "n_points", value: n as f64, expected: "at least 4 matching samples" });
    }
    let span = (x[n - 1] - x[0]) * n as f64 / (n - 1) as f64;
    if !(span > 0.0) {
        return Err(Error::OutOfRange { name: "phase span", value: span, expected: "increasing sample points" });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let best_k = (1..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in y.iter().enumerate() {
                let a = 2.0 * PI * (k * i) as f64 / n as f64;
                re += (v - mean) * a.cos();
                im += (v - mean) * a.sin();
            }
            (k, re * re + im * im)
        })
        .fold((1, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    let mut w = 2.0 * PI * best_k as f64 / span;
    let (mut c, mut a, mut b) = linear_fit(x, y, w);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if a.hypot(b) > 1e-12 * scale {
        let mut ss = sum_sq(x, y, c, a, b, w);
        for _ in 0..100 {
            let mut design = Vec::with_capacity(4 * n);
            let mut resid = Vec::with_capacity(n);
            for (&t, &v) in x.iter().zip(y) {
                let (s, co) = (w * t).sin_cos();
                design.extend_from_slice(&[1.0, co, s, t * (b * co - a * s)]);
                resid.push(v - c - a * co - b * s);
            }
            let d = linalg::real_lstsq(&design, 4, &resid);
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-6 {
                let trial = (c + step * d[0], a + step * d[1], b + step * d[2], w + step * d[3]);
                let tss = sum_sq(x, y, trial.0, trial.1, trial.2, trial.3);
                if tss <= ss {
                    (c, a, b, w) = trial;
                    ss = tss;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || (d[3] * step).abs() <= 1e-15 * w.abs() {
                break;
            }
        }
        // pin the quadratures to the refined frequency
        (c, a, b) = linear_fit(x, y, w);
    } else {
        (a, b) = (0.0, 0.0);
    }
    let amplitude = a.hypot(b);
    let rms = (sum_sq(x, y, c, a, b, w) / n as f64).sqrt();
    let relative_residual = if amplitude > 1e-12 * scale {
        rms / amplitude
    } else if c != 0.0 {
        rms / c.abs()
    } else {
        rms
    };
    Ok(SinusoidFit {
        offset: c,
        amplitude,
        phase: (-b).atan2(a),
        period: 2.0 * PI / w,
        rms_residual: rms,
        relative_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub ports: (Port, Port),
    pub probabilities: Vec<f64>,
    pub fit: SinusoidFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub which: ScanPhase,
    pub phases: Vec<f64>,
    /// One curve per entry of [`PORT_PAIRS`].
    pub curves: Vec<ScanCurve>,
    pub coherent: bool,
    pub overlap_m: f64,
}

/// Scans one phase over `n_points` equally spaced values in `[0, 2 pi)`,
/// keeping the others at their values in `state` and `base`, and fits a
/// sinusoid to each port-pair curve.
pub fn phase_scan(
    state: &TimeBinPairState,
    base: &AnalyzerConfig,
    which: ScanPhase,
    n_points: usize,
) -> Result<PhaseScan> {
    if n_points < 8 {
        return Err(Error::OutOfRange { name: "n_points", value: n_points as f64, expected: "n_points >= 8" });
    }
    base.validate()?;
    let coh = coherence(state, base);
    let phases: Vec<f64> = (0..n_points).map(|k| 2.0 * PI * k as f64 / n_points as f64).collect();
    let mut table = vec![Vec::with_capacity(n_points); PORT_PAIRS.len()];
    for &phi in &phases {
        let mut an = base.clone();
        let st = match which {
            ScanPhase::A => {
                an.phi_a = phi;
                state.clone()
            }
            ScanPhase::B => {
                an.phi_b = phi;
                state.clone()
            }
            ScanPhase::P => state.with_pump_phase(phi)?,
        };
        for (k, &ports) in PORT_PAIRS.iter().enumerate() {
            table[k].push(coincidence_probability_with(&st, &an, ports, &coh)?.probability);
        }
    }
    let curves = PORT_PAIRS
        .iter()
        .zip(table)
        .map(|(&ports, probabilities)| {
            let fit = fit_sinusoid(&phases, &probabilities)?;
            Ok(ScanCurve { ports, probabilities, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseScan { which, phases, curves, coherent: coh.coherent, overlap_m: coh.overlap_m })
}

/// Settings of a Monte Carlo fringe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub which: ScanPhase,
    pub phases: Vec<f64>,
    pub trials_per_point: u64,
    /// Detections up to this long before a slot boundary count for the slot.
    pub slot_margin: f64,
    /// Optional coincidence window: detections later than this after their
    /// slot start are rejected.
    pub slot_width: Option<f64>,
}

impl FringeScan {
    /// `n_points` phases over `[0, 2 pi)`, margin of a tenth of `tau_bin`.
    pub fn uniform(which: ScanPhase, n_points: usize, trials_per_point: u64, tau_bin: f64) -> Self {
        Self {
            which,
            phases: (0..n_points).map(|k| 2.0 * PI * k as f64 / n_points as f64).collect(),
            trials_per_point,
            slot_margin: 0.1 * tau_bin,
            slot_width: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase: f64,
    pub trials: u64,
    /// Trials that emitted a pair.
    pub emitted: u64,
    /// Central-slot coincidences per entry of [`PORT_PAIRS`].
    pub counts: [u64; 4],
    /// `(N++ + N-- - N+- - N-+) / N`.
    pub correlator: f64,
    pub correlator_stderr: f64,
}

impl FringePoint {
    pub fn central(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloFringe {
    pub points: Vec<FringePoint>,
    /// Correlator amplitude fitted against `cos(phi_P - phi_A - phi_B)`.
    pub visibility: f64,
    pub visibility_stderr: f64,
    /// Model visibility of the `++` port pair for the same settings.
    pub analytic_visibility: f64,
}

/// Outcome of one emitted pair behind the analyzers.
#[derive(Clone, Copy, Debug)]
struct Outcome {
    slot_a: u8,
    slot_b: u8,
    ports: usize,
    probability: f64,
    /// Weight of the early branch for timing (1 or 0 outside the centre).
    early_weight: f64,
}

fn outcome_table(amps: (C64, C64), an: &AnalyzerConfig, coh: &Coherence) -> Vec<Outcome> {
    let mut out = Vec::new();
    for (pi, &ports) in PORT_PAIRS.iter().enumerate() {
        let arm = |long: bool, p: Port| if long { an.long_amp(p) } else { an.short_amp(p) };
        for bin in 0..2u8 {
            let a = if bin == 0 { amps.0 } else { amps.1 };
            for long_a in [false, true] {
                for long_b in [false, true] {
                    let slot_a = bin + u8::from(long_a);
                    let slot_b = bin + u8::from(long_b);
                    if slot_a == 1 && slot_b == 1 {
                        continue;
                    }
                    let phase = an.phi_a * f64::from(u8::from(long_a)) + an.phi_b * f64::from(u8::from(long_b));
                    let amp = a * arm(long_a, ports.0) * arm(long_b, ports.1) * C64::from_polar(1.0, phase);
                    out.push(Outcome {
                        slot_a,
                        slot_b,
                        ports: pi,
                        probability: amp.norm_sqr(),
                        early_weight: if bin == 0 { 1.0 } else { 0.0 },
                    });
                }
            }
        }
        let (e, l) = branch_amplitudes(amps, an, ports);
        let p = central_probability(e, l, coh);
        let w = e.norm_sqr() + l.norm_sqr();
        out.push(Outcome {
            slot_a: 1,
            slot_b: 1,
            ports: pi,
            probability: p.max(0.0),
            early_weight: if w > 0.0 { e.norm_sqr() / w } else { 0.0 },
        });
    }
    out
}

fn sample_outcome<'t, R: Rng + ?Sized>(table: &'t [Outcome], rng: &mut R) -> &'t Outcome {
    let total: f64 = table.iter().map(|o| o.probability).sum();
    let mut u = rng.random::<f64>() * total;
    for o in table {
        if u < o.probability {
            return o;
        }
        u -= o.probability;
    }
    table.iter().rev().find(|o| o.probability > 0.0).expect("non-empty distribution")
}

/// Monte Carlo of the Franson setup driven by the emitter state machine.
///
/// For every trial the emitter decides whether a pair is emitted and when
/// (relative to its exciting pulse); the path and port outcome is then drawn
/// from the quantum probabilities, the photons get their slot delays and pass
/// the detector (loss and jitter; dead time is not applied), and the pair
/// counts if both detections are identified as central-slot events. Slots
/// are `floor((t + slot_margin) / tau_bin)`. Point `k` uses seed
/// `derive_seed(config.seed, k)`. The branch overlap uses the continuous
/// closed form [`envelope_overlap_analytic`].
pub fn monte_carlo_fringe(
    config: &EmitterConfig,
    base: &AnalyzerConfig,
    detector: &DetectorModel,
    scan: &FringeScan,
) -> Result<MonteCarloFringe> {
    config.validate()?;
    base.validate()?;
    detector.validate()?;
    check_range("slot_margin", scan.slot_margin, 0.0, f64::MAX, "slot_margin >= 0")?;
    if scan.trials_per_point == 0 || scan.phases.is_empty() {
        return Err(Error::OutOfRange {
            name: "trials_per_point",
            value: scan.trials_per_point as f64,
            expected: "at least one trial and one phase",
        });
    }
    let tau = config.pump.tau_bin;
    let coh = Coherence::from_overlap(envelope_overlap_analytic(&config.rates, base.path_delay - tau));
    let ideal = DetectorModel::ideal();
    let survival = match config.metastable_decay {
        Some(r) if r > 0.0 => (-r * tau).exp(),
        _ => 1.0,
    };
    let mut points = Vec::with_capacity(scan.phases.len());
    let mut cos_terms = Vec::with_capacity(scan.phases.len());
    for (k, &phi) in scan.phases.iter().enumerate() {
        let mut an = base.clone();
        let mut pump = config.pump.clone();
        match scan.which {
            ScanPhase::A => an.phi_a = phi,
            ScanPhase::B => an.phi_b = phi,
            ScanPhase::P => pump.phi_p = phi,
        }
        let pe = pump.p1;
        let pl = (1.0 - pump.p1) * pump.p2 * survival;
        let norm = (pe + pl).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroEmission);
        }
        let amps = (C64::new(pe.sqrt() / norm, 0.0), C64::from_polar(pl.sqrt() / norm, pump.phi_p));
        let table = outcome_table(amps, &an, &coh);
        let mut cfg = config.clone();
        cfg.pump = pump.clone();
        cfg.seed = derive_seed(config.seed, k as u64);
        let cfg = &cfg;
        let (emitted, counts) = (0..scan.trials_per_point)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(cfg.seed, trial);
                let rec = run_trial(cfg, &ideal, trial, &mut rng);
                if rec.bin == Bin::Empty {
                    return (0u64, None);
                }
                let (ta, tb) = (rec.t_a_true.expect("emitted"), rec.t_b_true.expect("emitted"));
                let o = sample_outcome(&table, &mut rng);
                let early = if o.slot_a == 1 && o.slot_b == 1 {
                    rng.random::<f64>() < o.early_weight
                } else {
                    o.early_weight > 0.5
                };
                let bin = if early { 0.0 } else { 1.0 };
                let offset = |slot: u8| bin * tau + (f64::from(slot) - bin) * an.path_delay;
                let da = detector.detect(offset(o.slot_a) + ta, &mut rng);
                let db = detector.detect(offset(o.slot_b) + tb, &mut rng);
                let central = |t: Option<f64>| match t {
                    Some(t) => {
                        let slot = ((t + scan.slot_margin) / tau).floor();
                        slot == 1.0 && scan.slot_width.is_none_or(|w| t - tau < w)
                    }
                    None => false,
                };
                if central(da) && central(db) {
                    (1, Some(o.ports))
                } else {
                    (1, None)
                }
            })
            .fold(
                || (0u64, [0u64; 4]),
                |(e, mut c), (de, p)| {
                    if let Some(p) = p {
                        c[p] += 1;
                    }
                    (e + de, c)
                },
            )
            .reduce(
                || (0u64, [0u64; 4]),
                |(e1, c1), (e2, c2)| (e1 + e2, std::array::from_fn(|i| c1[i] + c2[i])),
            );
        let n: u64 = counts.iter().sum();
        let (corr, se) = if n > 0 {
            let e = (counts[port_index((Port::Plus, Port::Plus))] + counts[port_index((Port::Minus, Port::Minus))])
                as f64
                - (counts[port_index((Port::Plus, Port::Minus))] + counts[port_index((Port::Minus, Port::Plus))])
                    as f64;
            let e: f64 = e / n as f64;
            (e, ((1.0 - e * e).max(0.0) / n as f64).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        cos_terms.push((pump.phi_p - an.phi_a - an.phi_b).cos());
        points.push(FringePoint {
            phase: phi,
            trials: scan.trials_per_point,
            emitted,
            counts,
            correlator: corr,
            correlator_stderr: se,
        });
    }
    let (mut num, mut den, mut var) = (0.0, 0.0, 0.0);
    for (p, c) in points.iter().zip(&cos_terms) {
        if p.central() > 0 {
            num += p.correlator * c;
            den += c * c;
            var += c * c * p.correlator_stderr.powi(2);
        }
    }
    let (visibility, visibility_stderr) = if den > 0.0 { (num / den, var.sqrt() / den) } else { (f64::NAN, f64::NAN) };
    let pe = config.pump.p1;
    let pl = (1.0 - config.pump.p1) * config.pump.p2 * survival;
    let amps = (C64::new(pe.sqrt(), 0.0), C64::new(pl.sqrt(), 0.0));
    let (e, l) = branch_amplitudes(amps, base, (Port::Plus, Port::Plus));
    let analytic_visibility = 2.0 * coh.factor() * e.norm() * l.norm() / (e.norm_sqr() + l.norm_sqr());
    Ok(MonteCarloFringe { points, visibility, visibility_stderr, analytic_visibility })
}

/// One row of a curve table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub phase: f64,
    pub port_pair: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

pub fn scan_rows(scan: &PhaseScan) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for (i, &phase) in scan.phases.iter().enumerate() {
        for c in &scan.curves {
            rows.push(CurveRow { phase, port_pair: port_label(c.ports), value: c.probabilities[i], stderr: None });
        }
    }
    rows
}

/// Counts with binomial standard errors over the trials of each point.
pub fn fringe_rows(fringe: &MonteCarloFringe) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for p in &fringe.points {
        for (k, &ports) in PORT_PAIRS.iter().enumerate() {
            let c = p.counts[k] as f64;
            let q = c / p.trials as f64;
            rows.push(CurveRow {
                phase: p.phase,
                port_pair: port_label(ports),
                value: c,
                stderr: Some((p.trials as f64 * q * (1.0 - q)).sqrt()),
            });
        }
    }
    rows
}

/// Writes rows with header `phase,port_pair,value,stderr`; `value` is a
/// probability for analytic curves and a count for Monte Carlo ones.
pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["phase", "port_pair", "value", "stderr"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
