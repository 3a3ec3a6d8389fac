//! Pumped time-bin states.
//!
//! Pulse 1 excites the emitter with probability `p1`; if it does not, pulse 2
//! (delayed by `tau_bin`, relative phase `phi_p`) excites it with probability
//! `p2`. The emitted state is
//! `sqrt(p1) |early..> + exp(i phi_p) sqrt((1 - p1) p2) |late..>`,
//! whose squared norm is the probability that a pair (or n-tuple) is emitted.
//! Both branches carry the same internal envelope, shifted by `tau_bin`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeAmplitude;
use crate::error::{check_range, Error, Result};
use crate::multi::{NCascadeAmplitude, MAX_PHOTONS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub p1: f64,
    pub p2: f64,
    /// Relative phase of the two pump pulses, radians.
    pub phi_p: f64,
    /// Delay between the pulses.
    pub tau_bin: f64,
}

impl PumpConfig {
    pub fn new(p1: f64, p2: f64, phi_p: f64, tau_bin: f64) -> Result<Self> {
        let pump = Self { p1, p2, phi_p, tau_bin };
        pump.validate()?;
        Ok(pump)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("p1", self.p1, 0.0, 1.0, "0 <= p1 <= 1")?;
        check_range("p2", self.p2, 0.0, 1.0, "0 <= p2 <= 1")?;
        if !self.phi_p.is_finite() {
            return Err(Error::OutOfRange { name: "phi_p", value: self.phi_p, expected: "finite" });
        }
        if !(self.tau_bin.is_finite() && self.tau_bin > 0.0) {
            return Err(Error::OutOfRange {
                name: "tau_bin",
                value: self.tau_bin,
                expected: "tau_bin > 0",
            });
        }
        Ok(())
    }

    pub fn amp_early(&self) -> C64 {
        C64::new(self.p1.sqrt(), 0.0)
    }

    pub fn amp_late(&self) -> C64 {
        C64::from_polar(((1.0 - self.p1) * self.p2).sqrt(), self.phi_p)
    }

    /// `p1 + (1 - p1) p2`.
    pub fn emission_probability(&self) -> f64 {
        self.p1 + (1.0 - self.p1) * self.p2
    }
}

/// Envelopes that can be carried by the two branches of a time-bin state.
pub trait Envelope {
    fn photons(&self) -> usize;
    /// End of the simulated support of the envelope.
    fn support(&self) -> f64;
}

impl Envelope for CascadeAmplitude {
    fn photons(&self) -> usize {
        2
    }

    fn support(&self) -> f64 {
        self.grid().axis_end(1)
    }
}

impl Envelope for NCascadeAmplitude {
    fn photons(&self) -> usize {
        NCascadeAmplitude::photons(self)
    }

    fn support(&self) -> f64 {
        self.grid().axis_end(self.photons() - 1)
    }
}

/// Two-branch time-bin state with a shared internal envelope.
#[derive(Clone, Debug)]
pub struct TimeBinState<E> {
    amp_early: C64,
    amp_late: C64,
    envelope: Arc<E>,
    pump: PumpConfig,
}

/// Time-bin entangled photon pair.
pub type TimeBinPairState = TimeBinState<CascadeAmplitude>;
/// Time-bin entangled two- or three-photon state.
pub type NPhotonTimeBinState = TimeBinState<NCascadeAmplitude>;

impl<E: Envelope> TimeBinState<E> {
    fn build(pump: PumpConfig, envelope: Arc<E>) -> Result<Self> {
        pump.validate()?;
        let support = envelope.support();
        if pump.tau_bin < support {
            log::warn!(
                "time bins overlap: tau_bin = {} is shorter than the envelope support {}",
                pump.tau_bin,
                support
            );
        }
        Ok(Self {
            amp_early: pump.amp_early(),
            amp_late: pump.amp_late(),
            envelope,
            pump,
        })
    }

    pub fn amp_early(&self) -> C64 {
        self.amp_early
    }

    pub fn amp_late(&self) -> C64 {
        self.amp_late
    }

    pub fn envelope(&self) -> &E {
        &self.envelope
    }

    pub fn pump(&self) -> &PumpConfig {
        &self.pump
    }

    pub fn photons(&self) -> usize {
        self.envelope.photons()
    }

    /// Squared norm of the state, the probability that a cascade is emitted.
    ///
    /// Evaluated as `p1 + (1 - p1) p2` so that certain emission gives exactly 1.
    pub fn emission_probability(&self) -> f64 {
        self.pump.emission_probability()
    }

    /// Whether the late branch starts before the early envelope has decayed.
    pub fn bins_overlap(&self) -> bool {
        self.pump.tau_bin < self.envelope.support()
    }

    /// Same state with another pump phase.
    pub fn with_pump_phase(&self, phi_p: f64) -> Result<Self> {
        let mut pump = self.pump.clone();
        pump.phi_p = phi_p;
        Self::build(pump, self.envelope.clone())
    }

    /// Bin amplitudes normalized to a unit-norm bin qubit.
    pub fn normalized_amplitudes(&self) -> Result<(C64, C64)> {
        let p = self.emission_probability();
        if p <= 0.0 {
            return Err(Error::ZeroEmission);
        }
        let s = 1.0 / p.sqrt();
        Ok((self.amp_early * s, self.amp_late * s))
    }
}

/// Builds the pumped time-bin pair state.
///
/// Overlapping bins (`tau_bin` shorter than the envelope support) are
/// accepted with a warning.
pub fn make_pair_state(pump: PumpConfig, envelope: Arc<CascadeAmplitude>) -> Result<TimeBinPairState> {
    TimeBinState::build(pump, envelope)
}

/// Builds the pumped time-bin state of an `n`-photon cascade.
pub fn make_n_state(pump: PumpConfig, envelope: Arc<NCascadeAmplitude>) -> Result<NPhotonTimeBinState> {
    let n = envelope.photons();
    if !(2..=MAX_PHOTONS).contains(&n) {
        return Err(Error::PhotonNumber(n));
    }
    TimeBinState::build(pump, envelope)
}

/// `2 |a_e| |a_l| / (|a_e|^2 + |a_l|^2)`: 1 for balanced bins, 0 when one bin
/// is empty.
pub fn bin_balance<E: Envelope>(state: &TimeBinState<E>) -> Result<f64> {
    let p = state.emission_probability();
    if p <= 0.0 {
        return Err(Error::ZeroEmission);
    }
    let pump = state.pump();
    Ok(2.0 * (pump.p1 * (1.0 - pump.p1) * pump.p2).sqrt() / p)
}
