//! Cascades of more than two photons.
//!
//! The amplitude generalizes the pair case to
//! `prod_k sqrt(2 G_k) exp(-G_k (t_k - t_{k-1})) θ(t_k - t_{k-1})` with
//! `t_0 = 0`, sampled on the staggered grid described in [`crate::cascade`].
//! Dense storage grows as `n_points^n`, so only two- and three-photon cascades
//! are accepted.

use ndarray as nd;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::cascade::{
    build_cascade_amplitude, cascade_value, CascadeAmplitude, DecayRates, ReducedState, TimeGrid,
    NORM_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::linalg;

pub const MAX_PHOTONS: usize = 3;

/// Dense `n`-photon amplitude; axis `k` is photon `k` in emission order.
#[derive(Clone, Debug)]
pub struct NCascadeAmplitude {
    grid: TimeGrid,
    values: nd::ArrayD<C64>,
    rates: DecayRates,
}

impl NCascadeAmplitude {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &nd::ArrayD<C64> {
        &self.values
    }

    pub fn rates(&self) -> &DecayRates {
        &self.rates
    }

    pub fn photons(&self) -> usize {
        self.values.ndim()
    }

    /// `sum |psi|^2 dt^n`.
    pub fn norm(&self) -> f64 {
        let w = self.grid.dt().powi(self.photons() as i32);
        outer_sums(&self.values).iter().sum::<f64>() * w
    }

    /// Reduced state of photon `axis` after tracing out all others.
    pub fn reduced_state(&self, axis: usize) -> Result<ReducedState> {
        let n = self.photons();
        if axis >= n {
            return Err(Error::PhotonNumber(axis + 1));
        }
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        let np = self.grid.n_points();
        // move `axis` last and flatten the rest into rows
        let mut order: Vec<usize> = (0..n).filter(|&k| k != axis).collect();
        order.push(axis);
        let unfolded = self
            .values
            .view()
            .permuted_axes(order)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((np.pow(n as u32 - 1), np))
            .expect("contiguous reshape");
        let w = self.grid.dt().powi(n as i32);
        let rho = linalg::column_gram(&unfolded) * C64::new(w, 0.0);
        ReducedState::from_matrix(self.grid.clone(), rho)
    }

    /// Two-photon view, only for `n = 2`.
    pub fn as_pair(&self) -> Option<CascadeAmplitude> {
        if self.photons() != 2 {
            return None;
        }
        let v = self
            .values
            .clone()
            .into_dimensionality::<nd::Ix2>()
            .expect("two axes");
        CascadeAmplitude::from_parts(self.grid.clone(), v, self.rates.clone()).ok()
    }
}

fn outer_sums(values: &nd::ArrayD<C64>) -> Vec<f64> {
    values
        .axis_iter(nd::Axis(0))
        .into_par_iter()
        .map(|sub| sub.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect()
}

/// Builds the amplitude of an `n`-photon cascade, `n` in `{2, 3}`.
///
/// For `n = 2` the values are those of [`build_cascade_amplitude`].
pub fn build_n_cascade_amplitude(rates: &DecayRates, grid: &TimeGrid) -> Result<NCascadeAmplitude> {
    let n = rates.photons();
    if n > MAX_PHOTONS {
        return Err(Error::PhotonNumber(n));
    }
    if n == 2 {
        let pair = build_cascade_amplitude(rates, grid)?;
        return Ok(NCascadeAmplitude {
            grid: grid.clone(),
            values: pair.into_values().into_dyn(),
            rates: rates.clone(),
        });
    }
    grid.check(rates)?;
    let np = grid.n_points();
    let g = rates.all();
    let mut values = nd::Array3::<C64>::zeros((np, np, np));
    values
        .axis_iter_mut(nd::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut plane)| {
            let t_a = grid.sample_time(0, i);
            for j in i..np {
                let t_b = grid.sample_time(1, j);
                for k in j..np {
                    let t_c = grid.sample_time(2, k);
                    plane[(j, k)] = C64::new(cascade_value(&g, &[t_a, t_b, t_c]), 0.0);
                }
            }
        });
    let mut values = values.into_dyn();
    let norm = outer_sums(&values).iter().sum::<f64>() * grid.dt().powi(3);
    let s = 1.0 / norm.sqrt();
    values.par_mapv_inplace(|z| z * s);
    Ok(NCascadeAmplitude { grid: grid.clone(), values, rates: rates.clone() })
}
