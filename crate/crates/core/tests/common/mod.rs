//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the grid pipeline of the library.
#![allow(dead_code)]

use num_complex::Complex64 as C64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre integral of `f` over `[lo, hi]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (x, w) = gauss_legendre(16);
    let h = (hi - lo) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(a + 0.5 * h * (xi + 1.0));
        }
    }
    0.5 * h * s
}

/// `|psi(a, b)|^2` of the continuous cascade.
pub fn density(ga: f64, gb: f64, a: f64, b: f64) -> f64 {
    if a < 0.0 || b < a {
        0.0
    } else {
        4.0 * ga * gb * (-2.0 * ga * a - 2.0 * gb * (b - a)).exp()
    }
}

/// Probability that `t_A` falls in `[a0, a1]` and `t_B` in `[b0, b1]`, by
/// nested quadrature. The outer range is split where the inner lower limit
/// `max(b0, a)` changes form, so every piece is smooth.
pub fn window_probability(ga: f64, gb: f64, (a0, a1): (f64, f64), (b0, b1): (f64, f64)) -> f64 {
    let inner = |a: f64| {
        let lo = b0.max(a);
        integrate(&|b| density(ga, gb, a, b), lo, b1, 8)
    };
    let mut cuts = vec![a0, a1];
    for c in [b0, b1] {
        if c > a0 && c < a1 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| integrate(&inner, w[0], w[1].min(b1), 8)).sum()
}

/// Kolmogorov-Smirnov distance between samples and `Exp(rate)`.
pub fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Central-slot coincidence probability by brute-force enumeration.
///
/// Every (bin, arm A, arm B) path is followed through a 50/50-style analyzer
/// with transmittance `eta` (short arm `+`: `eta`, `-`: `sqrt(eta(1-eta))`;
/// long arm `+`: `1-eta`, `-`: `-sqrt(eta(1-eta))`); amplitudes that end in the
/// same (slot A, slot B, port A, port B) are added coherently.
pub fn franson_enumeration(
    amp_early: C64,
    amp_late: C64,
    eta: f64,
    phi_a: f64,
    phi_b: f64,
    port_a: bool,
    port_b: bool,
) -> f64 {
    let arm = |long: bool, plus: bool| -> f64 {
        let m = (eta * (1.0 - eta)).sqrt();
        match (long, plus) {
            (false, true) => eta,
            (false, false) => m,
            (true, true) => 1.0 - eta,
            (true, false) => -m,
        }
    };
    let norm = (amp_early.norm_sqr() + amp_late.norm_sqr()).sqrt();
    let mut slots = std::collections::BTreeMap::<(u8, u8), C64>::new();
    for (bin, a) in [(0u8, amp_early / norm), (1u8, amp_late / norm)] {
        for long_a in [false, true] {
            for long_b in [false, true] {
                let mut amp = a * arm(long_a, port_a) * arm(long_b, port_b);
                if long_a {
                    amp *= C64::from_polar(1.0, phi_a);
                }
                if long_b {
                    amp *= C64::from_polar(1.0, phi_b);
                }
                *slots.entry((bin + u8::from(long_a), bin + u8::from(long_b))).or_default() += amp;
            }
        }
    }
    slots.get(&(1, 1)).map_or(0.0, |z| z.norm_sqr())
}

/// `Re sum_jk a[j][k] b[k][j]` with explicit loops.
pub fn dense_trace_product(a: &ndarray::Array2<C64>, b: &ndarray::Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            s += a[(j, k)] * b[(k, j)];
        }
    }
    s.re
}

/// Seeded source of random test configurations.
pub struct Picker(rand_chacha::ChaCha8Rng);

impl Picker {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Self(rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        use rand::Rng;
        self.0.random_range(lo..hi)
    }

    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.uniform(lo.ln(), hi.ln()).exp()
    }
}
