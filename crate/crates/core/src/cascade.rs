//! Two-photon cascade amplitudes on a discrete time grid.
//!
//! A three-level cascade `e -> i -> g` prepared in `e` at `t = 0` emits photon
//! A on the first transition and photon B on the second. The joint emission
//! amplitude is
//!
//! ```text
//! psi(t_A, t_B) = 2 sqrt(G_A G_B) exp(-G_A t_A) exp(-G_B (t_B - t_A)) θ(t_A) θ(t_B - t_A)
//! ```
//!
//! with *amplitude* decay rates `G_A`, `G_B`: the emission probability density
//! `|psi|^2` decays as `exp(-2 G t)`, so the intensity lifetime of a transition
//! is `1 / (2 G)`. Lifetimes quoted for real emitters are read as `1 / G`
//! by [`DecayRates::from_lifetimes`]; the purity of the reduced state depends on
//! the ratio `G_A / G_B` only, so either reading gives the same error estimate.
//!
//! # Discretization
//!
//! Axis `k` of the grid (A is axis 0, B is axis 1, a third photon is axis 2) is
//! sampled at cell centres `t = (i + (k + 1) / 2) dt`, i.e. each axis is offset
//! by half a cell from the previous one. The time-ordering step then never cuts
//! through a sample point: `psi[i][j]` is non-zero iff `j >= i`, and the mass
//! the step removes from straddling cells is balanced to first order by the mass
//! it keeps in their neighbours. Purities and window probabilities both
//! converge as `O(dt^2)`. Sampled values are renormalized so that
//! `sum |psi|^2 dt^2 = 1` on the grid.

use std::fmt;

use ndarray as nd;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Upper bound on the probability mass allowed beyond the end of the grid.
pub const TRUNCATION_LIMIT: f64 = 1e-6;
/// Tolerance on `sum |psi|^2 dt^n = 1` accepted by consumers of an amplitude.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Eigenvalues below this are treated as a defect rather than round-off.
pub const NEGATIVE_EIGENVALUE_THRESHOLD: f64 = -1e-8;
/// Elementwise tolerance for Hermiticity of a reduced state.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Amplitude decay rates of a radiative cascade, in inverse time units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRates")]
pub struct DecayRates {
    gamma_a: f64,
    gamma_b: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    extra: Vec<f64>,
}

#[derive(Deserialize)]
struct RawRates {
    gamma_a: f64,
    gamma_b: f64,
    #[serde(default)]
    extra: Vec<f64>,
}

impl TryFrom<RawRates> for DecayRates {
    type Error = Error;

    fn try_from(raw: RawRates) -> Result<Self> {
        let mut all = vec![raw.gamma_a, raw.gamma_b];
        all.extend(raw.extra);
        DecayRates::cascade(&all)
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidRate { name, value })
    }
}

impl DecayRates {
    pub fn new(gamma_a: f64, gamma_b: f64) -> Result<Self> {
        Ok(Self {
            gamma_a: check_rate("gamma_a", gamma_a)?,
            gamma_b: check_rate("gamma_b", gamma_b)?,
            extra: Vec::new(),
        })
    }

    /// Rates `G_1 .. G_n` of an `n`-photon cascade, `n >= 2`.
    pub fn cascade(rates: &[f64]) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::PhotonNumber(rates.len()));
        }
        let mut out = Self::new(rates[0], rates[1])?;
        for &r in &rates[2..] {
            out.extra.push(check_rate("extra", r)?);
        }
        Ok(out)
    }

    /// Rates from lifetimes, `G = 1 / tau`.
    pub fn from_lifetimes(tau_a: f64, tau_b: f64) -> Result<Self> {
        Self::new(1.0 / tau_a, 1.0 / tau_b)
    }

    pub fn gamma_a(&self) -> f64 {
        self.gamma_a
    }

    pub fn gamma_b(&self) -> f64 {
        self.gamma_b
    }

    pub fn extra(&self) -> &[f64] {
        &self.extra
    }

    /// All rates in emission order.
    pub fn all(&self) -> Vec<f64> {
        let mut v = vec![self.gamma_a, self.gamma_b];
        v.extend_from_slice(&self.extra);
        v
    }

    /// Number of photons in the cascade.
    pub fn photons(&self) -> usize {
        2 + self.extra.len()
    }

    pub fn min_rate(&self) -> f64 {
        self.all().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        self.all().into_iter().fold(0.0, f64::max)
    }

    /// Intensity lifetimes `1 / (2 G)` of each transition.
    pub fn intensity_lifetimes(&self) -> Vec<f64> {
        self.all().into_iter().map(|g| 0.5 / g).collect()
    }

    /// All rates multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let v: Vec<f64> = self.all().into_iter().map(|g| g * c).collect();
        Self::cascade(&v)
    }
}

impl fmt::Display for DecayRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G_A = {}, G_B = {}", self.gamma_a, self.gamma_b)?;
        for (k, g) in self.extra.iter().enumerate() {
            write!(f, ", G_{} = {}", k + 3, g)?;
        }
        Ok(())
    }
}

/// Uniform time grid shared by every axis of an amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    n_points: usize,
    #[serde(default)]
    allow_truncation: bool,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("n_points must be >= 2, got {n_points}")));
        }
        Ok(Self { t_max, n_points, allow_truncation: false })
    }

    /// Default grid for a cascade: `t_max = 10 / G_min`, 1024 points per axis
    /// for pairs and 256 for three-photon cascades.
    pub fn default_for(rates: &DecayRates) -> Self {
        let n_points = if rates.photons() >= 3 { 256 } else { 1024 };
        Self {
            t_max: 10.0 / rates.min_rate(),
            n_points,
            allow_truncation: false,
        }
    }

    /// Accept grids that fail the truncation check.
    pub fn with_override(mut self, allow: bool) -> Self {
        self.allow_truncation = allow;
        self
    }

    pub fn with_points(mut self, n_points: usize) -> Result<Self> {
        let g = Self::new(self.t_max, n_points)?;
        self.n_points = g.n_points;
        Ok(self)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_points as f64
    }

    pub fn allows_truncation(&self) -> bool {
        self.allow_truncation
    }

    /// Sample time of index `i` on axis `axis`.
    pub fn sample_time(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5 * (axis as f64 + 1.0)) * self.dt()
    }

    /// Edges `[lo, hi)` of cell `i` on axis `axis`.
    pub fn cell(&self, axis: usize, i: usize) -> (f64, f64) {
        let lo = (i as f64 + 0.5 * axis as f64) * self.dt();
        (lo, lo + self.dt())
    }

    /// Upper edge of the last cell of `axis`.
    pub fn axis_end(&self, axis: usize) -> f64 {
        self.cell(axis, self.n_points - 1).1
    }

    /// Upper bound on the probability that the last photon of the cascade is
    /// emitted after `t_max`.
    ///
    /// The last emission time is a sum of independent exponentials with
    /// intensity rates `2 G_k`; replacing every rate by the smallest one gives
    /// an Erlang tail that dominates the true tail.
    pub fn truncation_bound(&self, rates: &DecayRates) -> f64 {
        let x = 2.0 * rates.min_rate() * self.t_max;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..rates.photons() {
            term *= x / k as f64;
            sum += term;
        }
        ((-x).exp() * sum).min(1.0)
    }

    /// Fails when the truncated mass exceeds [`TRUNCATION_LIMIT`] unless the
    /// override is set.
    pub fn check(&self, rates: &DecayRates) -> Result<()> {
        let mass = self.truncation_bound(rates);
        if mass <= TRUNCATION_LIMIT {
            return Ok(());
        }
        if self.allow_truncation {
            log::warn!("grid truncates {mass:.3e} of the emission probability (override set)");
            return Ok(());
        }
        Err(Error::GridTruncation { mass, limit: TRUNCATION_LIMIT })
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.t_max == other.t_max && self.n_points == other.n_points
    }
}

/// Discretized two-photon cascade amplitude `psi[i][j] ~ psi(t_A(i), t_B(j))`.
#[derive(Clone, Debug)]
pub struct CascadeAmplitude {
    grid: TimeGrid,
    values: nd::Array2<C64>,
    rates: DecayRates,
}

impl CascadeAmplitude {
    /// Wraps an existing matrix, checking shape and normalization.
    pub fn from_parts(grid: TimeGrid, values: nd::Array2<C64>, rates: DecayRates) -> Result<Self> {
        let n = grid.n_points();
        if values.dim() != (n, n) {
            return Err(Error::GridMismatch(format!(
                "amplitude shape {:?} does not match grid of {n} points",
                values.dim()
            )));
        }
        let amp = Self { grid, values, rates };
        amp.check_normalized()?;
        Ok(amp)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &nd::Array2<C64> {
        &self.values
    }

    pub fn rates(&self) -> &DecayRates {
        &self.rates
    }

    /// `sum |psi|^2 dt^2`.
    pub fn norm(&self) -> f64 {
        let dt = self.grid.dt();
        row_sums(&self.values).iter().sum::<f64>() * dt * dt
    }

    pub fn check_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() <= NORM_TOLERANCE {
            Ok(())
        } else {
            Err(Error::NotNormalized { norm })
        }
    }

    /// Marginal emission density of photon A, `sum_j |psi[i][j]|^2 dt`.
    pub fn marginal_a(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        row_sums(&self.values).into_iter().map(|s| s * dt).collect()
    }

    /// Marginal emission density of photon B.
    pub fn marginal_b(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt)
            .collect()
    }

    pub(crate) fn into_values(self) -> nd::Array2<C64> {
        self.values
    }
}

/// Per-row `sum |z|^2`, computed in parallel and returned in row order.
pub(crate) fn row_sums(values: &nd::Array2<C64>) -> Vec<f64> {
    values
        .axis_iter(nd::Axis(0))
        .into_par_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect()
}

/// Unnormalized cascade amplitude at ordered sample times `t[0] <= t[1] <= ..`.
pub(crate) fn cascade_value(rates: &[f64], times: &[f64]) -> f64 {
    let mut exponent = 0.0;
    let mut prefactor = 1.0;
    let mut prev = 0.0;
    for (g, t) in rates.iter().zip(times) {
        exponent -= g * (t - prev);
        prefactor *= (2.0 * g).sqrt();
        prev = *t;
    }
    prefactor * exponent.exp()
}

/// Builds the discretized cascade amplitude of a photon pair.
pub fn build_cascade_amplitude(rates: &DecayRates, grid: &TimeGrid) -> Result<CascadeAmplitude> {
    grid.check(rates)?;
    let n = grid.n_points();
    let g = [rates.gamma_a(), rates.gamma_b()];
    let mut values = nd::Array2::<C64>::zeros((n, n));
    values
        .axis_iter_mut(nd::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let t_a = grid.sample_time(0, i);
            for j in i..n {
                let t_b = grid.sample_time(1, j);
                row[j] = C64::new(cascade_value(&g, &[t_a, t_b]), 0.0);
            }
        });
    normalize2(&mut values, grid.dt());
    Ok(CascadeAmplitude { grid: grid.clone(), values, rates: rates.clone() })
}

pub(crate) fn normalize2(values: &mut nd::Array2<C64>, dt: f64) {
    let norm: f64 = row_sums(values).iter().sum::<f64>() * dt * dt;
    if norm > 0.0 {
        let s = 1.0 / norm.sqrt();
        values.par_mapv_inplace(|z| z * s);
    }
}

/// Reduced density matrix of one photon on the grid, weighted so that its
/// trace is one, with its eigenvalue spectrum in descending order.
#[derive(Clone, Debug)]
pub struct ReducedState {
    grid: TimeGrid,
    matrix: nd::Array2<C64>,
    spectrum: Vec<f64>,
}

impl ReducedState {
    /// Validates a density matrix and computes its spectrum.
    ///
    /// Eigenvalues in `[NEGATIVE_EIGENVALUE_THRESHOLD, 0)` are clipped to zero
    /// and the spectrum renormalized; anything more negative is an error.
    pub fn from_matrix(grid: TimeGrid, matrix: nd::Array2<C64>) -> Result<Self> {
        let n = grid.n_points();
        if matrix.dim() != (n, n) {
            return Err(Error::GridMismatch(format!(
                "matrix shape {:?} does not match grid of {n} points",
                matrix.dim()
            )));
        }
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((matrix[(j, k)] - matrix[(k, j)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {worst:.3e})")));
        }
        let trace: f64 = matrix.diag().iter().map(|z| z.re).sum();
        if (trace - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let raw = linalg::hermitian_eigenvalues(&matrix)?;
        let spectrum = clip_spectrum(raw)?;
        Ok(Self { grid, matrix, spectrum })
    }

    /// Diagonal state with the given populations, padded with zeros to the
    /// grid size.
    pub fn diagonal(grid: TimeGrid, populations: &[f64]) -> Result<Self> {
        let n = grid.n_points();
        if populations.len() > n {
            return Err(Error::GridMismatch(format!(
                "{} populations for a grid of {n} points",
                populations.len()
            )));
        }
        let mut m = nd::Array2::<C64>::zeros((n, n));
        for (k, &p) in populations.iter().enumerate() {
            m[(k, k)] = C64::new(p, 0.0);
        }
        Self::from_matrix(grid, m)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &nd::Array2<C64> {
        &self.matrix
    }

    /// Eigenvalues `p_i`, descending, summing to one.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Eigenvalues with eigenvectors `chi_i` as columns.
    pub fn eigenvectors(&self) -> Result<(Vec<f64>, nd::Array2<C64>)> {
        linalg::hermitian_eigen(&self.matrix)
    }
}

fn clip_spectrum(mut vals: Vec<f64>) -> Result<Vec<f64>> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_EIGENVALUE_THRESHOLD {
        return Err(Error::NegativeEigenvalue {
            value: min,
            threshold: NEGATIVE_EIGENVALUE_THRESHOLD,
        });
    }
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidState("spectrum sums to zero".into()));
    }
    for v in vals.iter_mut() {
        *v /= total;
    }
    Ok(vals)
}

/// Traces out photon A: `rho_B[j][k] = sum_i psi[i][j] conj(psi[i][k]) dt^2`.
pub fn reduce_to_b(amp: &CascadeAmplitude) -> Result<ReducedState> {
    amp.check_normalized()?;
    let dt = amp.grid.dt();
    let rho = linalg::column_gram(&amp.values) * C64::new(dt * dt, 0.0);
    ReducedState::from_matrix(amp.grid.clone(), rho)
}

/// Traces out photon B.
pub fn reduce_to_a(amp: &CascadeAmplitude) -> Result<ReducedState> {
    amp.check_normalized()?;
    let dt = amp.grid.dt();
    let t = amp.values.t().as_standard_layout().into_owned();
    let rho = linalg::column_gram(&t) * C64::new(dt * dt, 0.0);
    ReducedState::from_matrix(amp.grid.clone(), rho)
}

/// `Re sum_jk a[j][k] conj(b[j][k])`, equal to `Tr(a b)` for Hermitian `b`.
///
/// Uses compensated (Neumaier) summation: a plain sum over `n^2` terms loses
/// about `1e-12` at `n = 1024`, which is visible next to the spectrum.
pub fn trace_product(a: &nd::Array2<C64>, b: &nd::Array2<C64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let v = x.re * y.re + x.im * y.im;
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Tr(rho^2) = sum_i p_i^2`.
pub fn purity(state: &ReducedState) -> f64 {
    trace_product(&state.matrix, &state.matrix)
}

/// `Tr(rho_B^2)` straight from the amplitude, skipping the eigendecomposition
/// that [`reduce_to_b`] performs. Same value as `purity(&reduce_to_b(amp)?)`
/// up to the spectrum validation.
pub fn reduced_purity(amp: &CascadeAmplitude) -> Result<f64> {
    amp.check_normalized()?;
    let dt = amp.grid.dt();
    let rho = linalg::column_gram(&amp.values) * C64::new(dt * dt, 0.0);
    Ok(trace_product(&rho, &rho))
}

/// `Tr(rho_B^2) = G_A / (G_A + G_B)` for the continuous pair amplitude.
pub fn purity_analytic(rates: &DecayRates) -> f64 {
    rates.gamma_a() / (rates.gamma_a() + rates.gamma_b())
}

/// `1 - Tr(rho_B^2) = G_B / (G_A + G_B)`, the expected swapping error.
pub fn error_analytic(rates: &DecayRates) -> f64 {
    rates.gamma_b() / (rates.gamma_a() + rates.gamma_b())
}

/// Squared singular values of `psi dt`, descending.
///
/// All-zero rows and columns are dropped before the decomposition, which
/// leaves the non-zero singular values unchanged; the result is padded with
/// zeros back to the grid size.
pub fn schmidt_spectrum(amp: &CascadeAmplitude) -> Result<Vec<f64>> {
    amp.check_normalized()?;
    let n = amp.grid.n_points();
    let dt = amp.grid.dt();
    let block = nonzero_block(&amp.values);
    let mut out = match block {
        Some(b) => linalg::singular_values(&(b * C64::new(dt, 0.0)))?
            .into_iter()
            .map(|s| s * s)
            .collect(),
        None => Vec::new(),
    };
    out.resize(n, 0.0);
    Ok(out)
}

fn nonzero_block(values: &nd::Array2<C64>) -> Option<nd::Array2<C64>> {
    let zero = C64::new(0.0, 0.0);
    let rows: Vec<usize> = values
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|z| *z != zero))
        .map(|(i, _)| i)
        .collect();
    let cols: Vec<usize> = values
        .columns()
        .into_iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|z| *z != zero))
        .map(|(j, _)| j)
        .collect();
    if rows.is_empty() || cols.is_empty() {
        return None;
    }
    Some(values.select(nd::Axis(0), &rows).select(nd::Axis(1), &cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym() -> CascadeAmplitude {
        let rates = DecayRates::new(1.0, 1.0).unwrap();
        build_cascade_amplitude(&rates, &TimeGrid::new(20.0, 1024).unwrap()).unwrap()
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(matches!(DecayRates::new(0.0, 1.0), Err(Error::InvalidRate { .. })));
        assert!(DecayRates::new(1.0, f64::NAN).is_err());
        assert!(DecayRates::new(-1.0, 1.0).is_err());
        assert!(DecayRates::cascade(&[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let rates = DecayRates::new(1.0, 1.0).unwrap();
        let short = TimeGrid::new(2.0, 64).unwrap();
        assert!(matches!(
            build_cascade_amplitude(&rates, &short),
            Err(Error::GridTruncation { .. })
        ));
        let forced = short.with_override(true);
        let amp = build_cascade_amplitude(&rates, &forced).unwrap();
        assert!((amp.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_grid_passes_truncation_check() {
        for rates in [
            DecayRates::new(1.0, 1.0).unwrap(),
            DecayRates::new(0.1, 1.0).unwrap(),
            DecayRates::cascade(&[1.0, 1.0, 1.0]).unwrap(),
        ] {
            let g = TimeGrid::default_for(&rates);
            assert!(g.truncation_bound(&rates) < TRUNCATION_LIMIT, "{rates}");
        }
    }

    #[test]
    fn normalized_and_time_ordered() {
        let amp = sym();
        assert!((amp.norm() - 1.0).abs() < 1e-6);
        let v = amp.values();
        for i in 0..1024 {
            for j in 0..i {
                assert_eq!(v[(i, j)], C64::new(0.0, 0.0));
            }
            assert!(v[(i, i)].re > 0.0);
        }
    }

    #[test]
    fn lifetimes_of_quantum_dot_build() {
        let rates = DecayRates::from_lifetimes(0.6, 1.4).unwrap();
        let amp = build_cascade_amplitude(&rates, &TimeGrid::default_for(&rates)).unwrap();
        assert!((amp.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_purity_and_trace() {
        let rho = reduce_to_b(&sym()).unwrap();
        let tr: f64 = rho.matrix().diag().iter().map(|z| z.re).sum();
        assert!((tr - 1.0).abs() < 1e-6);
        assert!((purity(&rho) - 0.5).abs() < 2e-3);
        let s: f64 = rho.spectrum().iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_purity() {
        let rates = DecayRates::new(2.0, 1.0).unwrap();
        let amp = build_cascade_amplitude(&rates, &TimeGrid::default_for(&rates)).unwrap();
        let p = purity(&reduce_to_b(&amp).unwrap());
        assert!((p - 2.0 / 3.0).abs() < 2e-3, "{p}");
    }

    #[test]
    fn purity_of_diagonal_states() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        assert_eq!(purity(&ReducedState::diagonal(g.clone(), &[1.0]).unwrap()), 1.0);
        assert_eq!(purity(&ReducedState::diagonal(g, &[0.5, 0.5]).unwrap()), 0.5);
    }

    #[test]
    fn purcell_scenario_purity() {
        let rates = DecayRates::new(20.0 / 0.6, 2.0 / 1.4).unwrap();
        let amp = build_cascade_amplitude(&rates, &TimeGrid::default_for(&rates)).unwrap();
        let err = 1.0 - purity(&reduce_to_b(&amp).unwrap());
        assert!((err - 1.2 / 29.2).abs() < 2e-3, "{err}");
    }

    #[test]
    fn analytic_values() {
        let r = DecayRates::new(1.0, 1.0).unwrap();
        assert_eq!(purity_analytic(&r), 0.5);
        let r = DecayRates::new(1e6, 1.0).unwrap();
        assert!((error_analytic(&r) - 1e-6).abs() < 1e-11);
        assert!((purity_analytic(&r) - 1.0).abs() < 1e-5);
        let r = DecayRates::from_lifetimes(0.6, 1.4).unwrap();
        assert!((error_analytic(&r) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn reduce_rejects_unnormalized() {
        let amp = sym();
        let mut v = amp.values().clone();
        v *= C64::new(2.0, 0.0);
        let bad = CascadeAmplitude { grid: amp.grid().clone(), values: v, rates: amp.rates().clone() };
        assert!(matches!(reduce_to_b(&bad), Err(Error::NotNormalized { .. })));
        assert!(schmidt_spectrum(&bad).is_err());
    }

    #[test]
    fn reduced_state_validation() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let m = nd::array![[C64::new(0.5, 0.0), C64::new(0.0, 0.1)], [C64::new(0.0, 0.1), C64::new(0.5, 0.0)]];
        assert!(ReducedState::from_matrix(g.clone(), m).is_err());
        let m = nd::array![[C64::new(1.5, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]];
        assert!(matches!(
            ReducedState::from_matrix(g.clone(), m),
            Err(Error::NegativeEigenvalue { .. })
        ));
        let m = nd::array![[C64::new(1.0 + 5e-9, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-5e-9, 0.0)]];
        let s = ReducedState::from_matrix(g, m).unwrap();
        assert_eq!(s.spectrum()[1], 0.0);
        assert!((s.spectrum()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduced_states_of_both_photons_share_purity() {
        let rates = DecayRates::new(3.0, 1.0).unwrap();
        let grid = TimeGrid::new(10.0, 256).unwrap();
        let amp = build_cascade_amplitude(&rates, &grid).unwrap();
        let pa = purity(&reduce_to_a(&amp).unwrap());
        let pb = purity(&reduce_to_b(&amp).unwrap());
        assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn schmidt_spectrum_matches_eigenvalues() {
        let rates = DecayRates::new(4.0, 1.0).unwrap();
        let grid = TimeGrid::new(10.0, 384).unwrap();
        let amp = build_cascade_amplitude(&rates, &grid).unwrap();
        let s = schmidt_spectrum(&amp).unwrap();
        let rho = reduce_to_b(&amp).unwrap();
        assert_eq!(s.len(), rho.spectrum().len());
        for (a, b) in s.iter().zip(rho.spectrum()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sample_times_are_staggered() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!((g.sample_time(0, 0) - 0.05).abs() < 1e-15);
        assert!((g.sample_time(1, 0) - 0.1).abs() < 1e-15);
        assert!((g.sample_time(2, 0) - 0.15).abs() < 1e-15);
        let (lo, hi) = g.cell(1, 3);
        assert!((lo - 0.35).abs() < 1e-15 && (hi - 0.45).abs() < 1e-15);
    }
}
