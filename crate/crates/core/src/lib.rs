//! Simulation and analysis of single-emitter time-bin entangled photon-pair
//! sources.
//!
//! A four-level emitter (`g`, `m`, `i`, `e`) is parked in the metastable level
//! `m` and driven by two phase-coherent pump pulses. Whichever pulse excites
//! `m -> e` triggers the cascade `e -> i -> g`, emitting one photon pair in an
//! early/late superposition; after the cascade the emitter is in `g`, so a
//! second pair is impossible. The crate covers:
//!
//! - [`cascade`]: the discretized two-photon cascade amplitude, reduced states,
//!   purity, Schmidt spectra and the closed-form error `G_B / (G_A + G_B)`.
//! - [`multi`]: three-photon cascades.
//! - [`timebin`]: pumped time-bin states and their bin balance.
//! - [`emitter`]: Monte Carlo of the pulse protocol with a detector model.
//! - [`gating`]: time-resolved detection windows that project onto product
//!   form.
//! - [`interferometry`]: Franson-type coincidence fringes.
//! - [`swapping`]: mixed-state overlap, Purcell engineering and swapping-error
//!   reports.
//!
//! Rates are amplitude decay rates; see [`cascade`] for the convention.

pub mod cascade;
pub mod emitter;
pub mod error;
pub mod gating;
pub mod interferometry;
pub mod linalg;
pub mod multi;
pub mod rng;
pub mod swapping;
pub mod timebin;

pub use cascade::{
    build_cascade_amplitude, error_analytic, purity, purity_analytic, reduce_to_a, reduce_to_b, reduced_purity,
    schmidt_spectrum, CascadeAmplitude, DecayRates, ReducedState, TimeGrid,
};
pub use error::{Error, Result};
pub use multi::{build_n_cascade_amplitude, NCascadeAmplitude};
