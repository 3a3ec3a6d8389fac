//! Time-resolved detection windows.
//!
//! Keeping only events with `t_A` in `[0, T1]` and `t_B` in `[T2, T2 + dT]`
//! removes the time-ordering step from the support of the amplitude when
//! `T2 >= T1`; what remains is a product of two exponentials, so the gated
//! pair is unentangled in time and the reduced state of B is pure. The price
//! is the post-selection probability.
//!
//! # Snapping
//!
//! A window keeps exactly the grid cells whose sample time lies in
//! `[start, end]`. On the staggered grid a B sample is never equal to an A
//! sample, and `T2 >= T1` implies every kept B sample is later than every kept
//! A sample, so the product form holds exactly on the grid as well. The
//! continuous region a window stands for is the union of its kept cells,
//! reported by [`DetectionWindow::snapped`]; oracles should integrate over
//! that region.

use std::io::Write;
use std::ops::Range;

use ndarray as nd;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{normalize2, row_sums, schmidt_spectrum, CascadeAmplitude, TimeGrid};
use crate::error::{Error, Result};

/// Closed detection interval `[start, end]` relative to the exciting pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    start: f64,
    end: f64,
}

impl DetectionWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::InvalidWindow(format!("[{start}, {end}] is not finite")));
        }
        if start < 0.0 {
            return Err(Error::InvalidWindow(format!("start {start} is negative")));
        }
        if end <= start {
            return Err(Error::InvalidWindow(format!("end {end} must exceed start {start}")));
        }
        Ok(Self { start, end })
    }

    /// `[0, t_max]`, which keeps every cell of either photon axis.
    pub fn full(grid: &TimeGrid) -> Self {
        Self { start: 0.0, end: grid.t_max() }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    /// Indices of the cells kept on `axis`; may be empty.
    ///
    /// Fails if the window reaches beyond the last cell of the axis (more
    /// than a hundredth of a cell, to absorb rounding in `t_max`).
    pub fn cells(&self, grid: &TimeGrid, axis: usize) -> Result<Range<usize>> {
        let dt = grid.dt();
        let limit = grid.axis_end(axis).max(grid.t_max());
        if self.end > limit + 1e-2 * dt {
            return Err(Error::InvalidWindow(format!(
                "[{}, {}] extends beyond the grid (axis ends at {limit})",
                self.start, self.end
            )));
        }
        let offset = 0.5 * (axis as f64 + 1.0);
        let tol = 1e-9;
        // sample time (i + offset) dt within [start, end]
        let lo = (self.start / dt - offset - tol).ceil().max(0.0) as usize;
        let hi = ((self.end / dt - offset + tol).floor() + 1.0).max(0.0) as usize;
        let hi = hi.min(grid.n_points());
        Ok(lo.min(hi)..hi)
    }

    /// Continuous interval covered by the kept cells, `None` if none are kept.
    pub fn snapped(&self, grid: &TimeGrid, axis: usize) -> Result<Option<(f64, f64)>> {
        let r = self.cells(grid, axis)?;
        if r.is_empty() {
            return Ok(None);
        }
        Ok(Some((grid.cell(axis, r.start).0, grid.cell(axis, r.end - 1).1)))
    }
}

/// Result of gating an amplitude.
#[derive(Clone, Debug)]
pub struct Gated {
    /// Renormalized gated amplitude; `None` when nothing survives.
    pub amplitude: Option<CascadeAmplitude>,
    /// Probability that both photons fall into their windows.
    pub probability: f64,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl Gated {
    pub fn is_empty(&self) -> bool {
        self.amplitude.is_none()
    }

    /// Schmidt spectrum of the gated amplitude.
    pub fn schmidt_spectrum(&self) -> Result<Option<Vec<f64>>> {
        self.amplitude.as_ref().map(schmidt_spectrum).transpose()
    }

    /// `sum lambda_i^2` of the gated Schmidt spectrum.
    pub fn purity(&self) -> Result<Option<f64>> {
        Ok(self.schmidt_spectrum()?.map(|s| s.iter().map(|l| l * l).sum()))
    }
}

/// Zeroes the amplitude outside `win_a x win_b` and renormalizes.
///
/// The post-selection probability is `sum |psi|^2 dt^2` over the kept cells
/// of the input amplitude. An empty intersection is not an error: it gives
/// probability 0 and no amplitude.
pub fn apply_windows(amp: &CascadeAmplitude, win_a: &DetectionWindow, win_b: &DetectionWindow) -> Result<Gated> {
    amp.check_normalized()?;
    let grid = amp.grid();
    let rows = win_a.cells(grid, 0)?;
    let cols = win_b.cells(grid, 1)?;
    let n = grid.n_points();
    let dt = grid.dt();
    let mut values = nd::Array2::<C64>::zeros((n, n));
    if !rows.is_empty() && !cols.is_empty() {
        let src = amp.values().slice(nd::s![rows.clone(), cols.clone()]);
        values.slice_mut(nd::s![rows.clone(), cols.clone()]).assign(&src);
    }
    let probability = row_sums(&values).iter().sum::<f64>() * dt * dt;
    if probability <= 0.0 {
        return Ok(Gated { amplitude: None, probability: 0.0, rows, cols });
    }
    normalize2(&mut values, dt);
    let amplitude = CascadeAmplitude::from_parts(grid.clone(), values, amp.rates().clone())?;
    Ok(Gated { amplitude: Some(amplitude), probability, rows, cols })
}

/// Windows `A in [0, T1]`, `B in [T2, T2 + dT]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub t1: f64,
    pub t2: f64,
    pub delta_t: f64,
}

impl WindowParams {
    pub fn windows(&self) -> Result<(DetectionWindow, DetectionWindow)> {
        Ok((DetectionWindow::new(0.0, self.t1)?, DetectionWindow::new(self.t2, self.t2 + self.delta_t)?))
    }

    /// Whether the windows are separated, `T2 >= T1`.
    pub fn separated(&self) -> bool {
        self.t2 >= self.t1
    }
}

/// All combinations of the given values, `T1` varying slowest.
pub fn window_family(t1: &[f64], t2: &[f64], delta_t: &[f64]) -> Vec<WindowParams> {
    let mut out = Vec::with_capacity(t1.len() * t2.len() * delta_t.len());
    for &a in t1 {
        for &b in t2 {
            for &d in delta_t {
                out.push(WindowParams { t1: a, t2: b, delta_t: d });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub t1: f64,
    pub t2: f64,
    pub delta_t: f64,
    pub probability: f64,
    /// Gated purity; absent when nothing survives the windows.
    pub purity: Option<f64>,
}

/// Gates `amp` with each member of `family`, in parallel; rows keep the
/// order of `family`.
pub fn gating_tradeoff_scan(amp: &CascadeAmplitude, family: &[WindowParams]) -> Result<Vec<TradeoffRow>> {
    family
        .par_iter()
        .map(|p| {
            let (wa, wb) = p.windows()?;
            let g = apply_windows(amp, &wa, &wb)?;
            Ok(TradeoffRow {
                t1: p.t1,
                t2: p.t2,
                delta_t: p.delta_t,
                probability: g.probability,
                purity: g.purity()?,
            })
        })
        .collect()
}

/// Writes a trade-off table with header `t1,t2,delta_t,probability,purity`.
pub fn write_tradeoff_csv<W: Write>(rows: &[TradeoffRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["t1", "t2", "delta_t", "probability", "purity"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
