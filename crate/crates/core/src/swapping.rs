//! Overlap of photons from independent sources.
//!
//! Entanglement swapping interferes photon B of one source with photon B of
//! another. Traced over their partners, both are mixed states in time; the
//! average overlap of two such photons is `Tr(rho_1 rho_2)`, which for
//! identical sources is the purity `G_A / (G_A + G_B)`. The deficit
//! `1 - Tr(rho_1 rho_2)` is reported as the expected swapping error. It shrinks
//! when a cavity speeds up the first transition (Purcell effect) or when
//! detection windows project each pair onto product form.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    build_cascade_amplitude, error_analytic, reduce_to_b, reduced_purity, trace_product, DecayRates,
    ReducedState, TimeGrid,
};
use crate::error::{Error, Result};
use crate::gating::{apply_windows, DetectionWindow};

/// Rate multipliers of the two transitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurcellFactors {
    pub f_a: f64,
    pub f_b: f64,
}

impl PurcellFactors {
    pub fn new(f_a: f64, f_b: f64) -> Result<Self> {
        for (name, v) in [("f_a", f_a), ("f_b", f_b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::OutOfRange { name, value: v, expected: "factor > 0" });
            }
        }
        Ok(Self { f_a, f_b })
    }

    pub fn none() -> Self {
        Self { f_a: 1.0, f_b: 1.0 }
    }
}

/// `(G_A f_a, G_B f_b)`; further cascade rates are left unchanged.
pub fn purcell_adjust(rates: &DecayRates, factors: &PurcellFactors) -> Result<DecayRates> {
    let f = PurcellFactors::new(factors.f_a, factors.f_b)?;
    let mut all = rates.all();
    all[0] *= f.f_a;
    all[1] *= f.f_b;
    DecayRates::cascade(&all)
}

/// `Tr(rho_1 rho_2)`. For identical inputs this is exactly [`crate::purity`].
pub fn mixed_overlap(rho1: &ReducedState, rho2: &ReducedState) -> Result<f64> {
    if !rho1.grid().same_as(rho2.grid()) {
        return Err(Error::GridMismatch(format!(
            "states on grids ({}, {}) and ({}, {})",
            rho1.grid().t_max(),
            rho1.grid().n_points(),
            rho2.grid().t_max(),
            rho2.grid().n_points()
        )));
    }
    Ok(trace_product(rho1.matrix(), rho2.matrix()))
}

/// Grid covering both sources: `t_max = 10 / G_min` over all rates, with
/// `n_points` per axis.
pub fn common_grid(rates1: &DecayRates, rates2: &DecayRates, n_points: usize) -> Result<TimeGrid> {
    let g_min = rates1.min_rate().min(rates2.min_rate());
    TimeGrid::new(10.0 / g_min, n_points)
}

/// Gated part of a [`SwapReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatedSwap {
    pub window_a: DetectionWindow,
    pub window_b: DetectionWindow,
    /// Post-selection probability of each source.
    pub probability_1: f64,
    pub probability_2: f64,
    pub overlap: f64,
    pub error: f64,
    /// `probability_1 * probability_2`, the fraction of swap attempts kept.
    pub throughput: f64,
}

/// Swapping-error estimate for two sources.
///
/// JSON keys: `rates_1`, `rates_2` (`gamma_a`, `gamma_b`), `identical`,
/// `error_analytic_1`, `error_analytic_2`, `overlap`, `error_numeric`,
/// `gated` (absent or `window_a`, `window_b`, `probability_1`,
/// `probability_2`, `overlap`, `error`, `throughput`), `grid` (`t_max`,
/// `n_points`, `allow_truncation`), `note`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapReport {
    pub rates_1: DecayRates,
    pub rates_2: DecayRates,
    pub identical: bool,
    pub error_analytic_1: f64,
    pub error_analytic_2: f64,
    pub overlap: f64,
    pub error_numeric: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gated: Option<GatedSwap>,
    pub grid: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Compares photon B of two sources on `grid`, optionally after gating both
/// with the same windows.
///
/// Sources with different rates are handled, but the closed-form error only
/// describes identical sources; the report says so in `note`.
pub fn swap_error_report(
    rates1: &DecayRates,
    rates2: &DecayRates,
    grid: &TimeGrid,
    windows: Option<(DetectionWindow, DetectionWindow)>,
) -> Result<SwapReport> {
    let identical = rates1 == rates2;
    let amp1 = build_cascade_amplitude(rates1, grid)?;
    let rho1 = reduce_to_b(&amp1)?;
    let (amp2, rho2) = if identical {
        (amp1.clone(), rho1.clone())
    } else {
        let a = build_cascade_amplitude(rates2, grid)?;
        let r = reduce_to_b(&a)?;
        (a, r)
    };
    let overlap = mixed_overlap(&rho1, &rho2)?;
    let gated = match windows {
        None => None,
        Some((wa, wb)) => {
            let g1 = apply_windows(&amp1, &wa, &wb)?;
            let g2 = if identical { g1.clone() } else { apply_windows(&amp2, &wa, &wb)? };
            let overlap = match (&g1.amplitude, &g2.amplitude) {
                (Some(a1), Some(a2)) => {
                    let r1 = reduce_to_b(a1)?;
                    let r2 = if identical { r1.clone() } else { reduce_to_b(a2)? };
                    mixed_overlap(&r1, &r2)?
                }
                _ => return Err(Error::InvalidWindow("keeps no emission of at least one source".into())),
            };
            Some(GatedSwap {
                window_a: wa,
                window_b: wb,
                probability_1: g1.probability,
                probability_2: g2.probability,
                overlap,
                error: 1.0 - overlap,
                throughput: g1.probability * g2.probability,
            })
        }
    };
    Ok(SwapReport {
        rates_1: rates1.clone(),
        rates_2: rates2.clone(),
        identical,
        error_analytic_1: error_analytic(rates1),
        error_analytic_2: error_analytic(rates2),
        overlap,
        error_numeric: 1.0 - overlap,
        gated,
        grid: grid.clone(),
        note: (!identical).then(|| {
            "sources differ; the closed-form error describes each source with an identical partner".to_string()
        }),
    })
}

/// One row of a Purcell sweep over identical sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Rates after the Purcell factors.
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub error_analytic: f64,
    pub error_numeric: f64,
    pub gated_error: Option<f64>,
    pub throughput: Option<f64>,
}

/// Evaluates identical-source swapping errors for each set of factors, in
/// parallel; rows keep the order of `factors`. Each row uses the default grid
/// of its adjusted rates with `n_points` per axis.
pub fn purcell_sweep(
    base: &DecayRates,
    factors: &[PurcellFactors],
    n_points: usize,
    windows: Option<(DetectionWindow, DetectionWindow)>,
) -> Result<Vec<SweepRow>> {
    factors
        .par_iter()
        .map(|f| {
            let rates = purcell_adjust(base, f)?;
            let grid = TimeGrid::default_for(&rates).with_points(n_points)?;
            if rates.max_rate() * grid.dt() > 0.25 {
                log::warn!(
                    "coarse grid for {rates}: max rate x dt = {:.3}; numeric error may be inaccurate",
                    rates.max_rate() * grid.dt()
                );
            }
            let amp = build_cascade_amplitude(&rates, &grid)?;
            let error_numeric = 1.0 - reduced_purity(&amp)?;
            let (gated_error, throughput) = match &windows {
                None => (None, None),
                Some((wa, wb)) => {
                    let g = apply_windows(&amp, wa, wb)?;
                    match &g.amplitude {
                        Some(a) => (Some(1.0 - reduced_purity(a)?), Some(g.probability * g.probability)),
                        None => (None, Some(0.0)),
                    }
                }
            };
            Ok(SweepRow {
                gamma_a: rates.gamma_a(),
                gamma_b: rates.gamma_b(),
                f_a: f.f_a,
                f_b: f.f_b,
                error_analytic: error_analytic(&rates),
                error_numeric,
                gated_error,
                throughput,
            })
        })
        .collect()
}

/// Header of the sweep CSV.
pub const SWEEP_CSV_HEADER: [&str; 8] =
    ["gamma_a", "gamma_b", "f_a", "f_b", "error_analytic", "error_numeric", "gated_error", "throughput"];

/// Writes sweep rows with header
/// `gamma_a,gamma_b,f_a,f_b,error_analytic,error_numeric,gated_error,throughput`;
/// the last two are empty without gating.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(SWEEP_CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
