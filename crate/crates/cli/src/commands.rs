//! One function per subcommand. Each returns the report bytes; the caller
//! decides where they go. Human-readable summaries go to stderr.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cascade_core::emitter::{simulate_batch, write_records_csv, BatchSummary, EmissionRecord, EmitterConfig};
use cascade_core::gating::{gating_tradeoff_scan, window_family, write_tradeoff_csv, DetectionWindow, TradeoffRow};
use cascade_core::interferometry::{
    fringe_rows, monte_carlo_fringe, phase_scan, scan_rows, write_curve_csv, FringeScan, MonteCarloFringe, PhaseScan,
};
use cascade_core::swapping::{purcell_sweep, swap_error_report, write_sweep_csv, PurcellFactors, SwapReport, SweepRow};
use cascade_core::timebin::make_pair_state;
use cascade_core::{
    build_cascade_amplitude, error_analytic, purity_analytic, reduced_purity, DecayRates, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig, SweepParam};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Purity,
    Gate,
    Fringe { monte_carlo: bool },
    Swap,
    MonteCarlo,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Purity => "purity",
            Command::Gate => "gate",
            Command::Fringe { .. } => "fringe",
            Command::Swap => "swap",
            Command::MonteCarlo => "montecarlo",
            Command::Sweep => "sweep",
        }
    }

    /// Single reports default to JSON, tables to CSV.
    pub fn default_format(self) -> Format {
        match self {
            Command::Purity | Command::Swap => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Output of `purity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    /// Rates after the Purcell factors.
    pub rates: DecayRates,
    pub grid: TimeGrid,
    pub purity_analytic: f64,
    pub purity_numeric: f64,
    pub difference: f64,
    pub error_analytic: f64,
}

/// JSON form of `montecarlo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub summary: BatchSummary,
    pub records: Vec<EmissionRecord>,
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn windows(config: &RunConfig) -> Result<Option<(DetectionWindow, DetectionWindow)>> {
    let g = &config.gate;
    if !g.configured {
        return Ok(None);
    }
    let (t1, t2, dt) = (g.t1[0], g.t2[0], g.delta_t[0]);
    if g.t1.len() > 1 || g.t2.len() > 1 || g.delta_t.len() > 1 {
        log::warn!("gate lists given; using the first window t1 = {t1}, t2 = {t2}, delta_t = {dt}");
    }
    Ok(Some((DetectionWindow::new(0.0, t1)?, DetectionWindow::new(t2, t2 + dt)?)))
}

fn emitter_config(config: &RunConfig) -> EmitterConfig {
    let mut c = EmitterConfig::new(config.pump.clone(), config.effective_rates());
    c.prep_success = config.emitter.prep_success;
    c.n_trials = config.emitter.n_trials;
    c.seed = config.emitter.seed;
    c.metastable_decay = config.emitter.metastable_decay;
    c.cycle_period = config.emitter.cycle_period;
    c
}

pub fn purity_report(config: &RunConfig) -> Result<PurityReport> {
    let rates = config.effective_rates();
    let amp = build_cascade_amplitude(&rates, &config.grid)?;
    let numeric = reduced_purity(&amp)?;
    let analytic = purity_analytic(&rates);
    Ok(PurityReport {
        rates: rates.clone(),
        grid: config.grid.clone(),
        purity_analytic: analytic,
        purity_numeric: numeric,
        difference: numeric - analytic,
        error_analytic: error_analytic(&rates),
    })
}

pub fn gate_rows(config: &RunConfig) -> Result<Vec<TradeoffRow>> {
    let amp = build_cascade_amplitude(&config.effective_rates(), &config.grid)?;
    let family = window_family(&config.gate.t1, &config.gate.t2, &config.gate.delta_t);
    Ok(gating_tradeoff_scan(&amp, &family)?)
}

pub fn phase_scan_report(config: &RunConfig) -> Result<PhaseScan> {
    let amp = build_cascade_amplitude(&config.effective_rates(), &config.grid)?;
    let state = make_pair_state(config.pump.clone(), Arc::new(amp))?;
    Ok(phase_scan(&state, &config.analyzer, config.scan.which, config.scan.points)?)
}

pub fn fringe_report(config: &RunConfig) -> Result<MonteCarloFringe> {
    let mut scan = FringeScan::uniform(
        config.scan.which,
        config.scan.points,
        config.emitter.n_trials,
        config.pump.tau_bin,
    );
    scan.slot_margin = config.scan.slot_margin;
    scan.slot_width = config.scan.slot_width;
    Ok(monte_carlo_fringe(&emitter_config(config), &config.analyzer, &config.detector, &scan)?)
}

pub fn swap_report(config: &RunConfig) -> Result<SwapReport> {
    let rates = config.effective_rates();
    Ok(swap_error_report(&rates, &rates, &config.grid, windows(config)?)?)
}

pub fn montecarlo_report(config: &RunConfig) -> Result<MonteCarloReport> {
    let batch = simulate_batch(&emitter_config(config), &config.detector)?;
    Ok(MonteCarloReport { seed: config.emitter.seed, summary: batch.summary, records: batch.records })
}

pub fn sweep_rows(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let spec = &config.sweep;
    let values = spec.values();
    let win = windows(config)?;
    let n = config.grid.n_points();
    let base = &config.rates;
    let f = config.purcell;
    let rows = match spec.param {
        SweepParam::FA | SweepParam::FB => {
            let factors = values
                .iter()
                .map(|&v| match spec.param {
                    SweepParam::FA => PurcellFactors::new(v, f.f_b),
                    _ => PurcellFactors::new(f.f_a, v),
                })
                .collect::<cascade_core::Result<Vec<_>>>()?;
            purcell_sweep(base, &factors, n, win)?
        }
        SweepParam::GammaA | SweepParam::GammaB => {
            let mut rows = Vec::with_capacity(values.len());
            for &v in &values {
                let rates = match spec.param {
                    SweepParam::GammaA => DecayRates::new(v, base.gamma_b())?,
                    _ => DecayRates::new(base.gamma_a(), v)?,
                };
                rows.extend(purcell_sweep(&rates, &[f], n, win)?);
            }
            rows
        }
    };
    Ok(rows)
}

/// Runs `command` and renders its report in `format`.
pub fn run(command: Command, config: &RunConfig, format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match command {
        Command::Purity => {
            let r = purity_report(config)?;
            eprintln!(
                "[purity] analytic {:.6} numeric {:.6} difference {:.3e}",
                r.purity_analytic, r.purity_numeric, r.difference
            );
            match format {
                Format::Json => out = json(&r)?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["gamma_a", "gamma_b", "purity_analytic", "purity_numeric", "difference", "error_analytic"])?;
                    w.serialize((
                        r.rates.gamma_a(),
                        r.rates.gamma_b(),
                        r.purity_analytic,
                        r.purity_numeric,
                        r.difference,
                        r.error_analytic,
                    ))?;
                    w.flush()?;
                }
            }
        }
        Command::Gate => {
            let rows = gate_rows(config)?;
            eprintln!("[gate] {} windows", rows.len());
            match format {
                Format::Json => out = json(&rows)?,
                Format::Csv => write_tradeoff_csv(&rows, &mut out)?,
            }
        }
        Command::Fringe { monte_carlo: false } => {
            let scan = phase_scan_report(config)?;
            if let Some(c) = scan.curves.first() {
                eprintln!("[fringe] visibility {:.6} (M = {:.6})", c.fit.visibility(), scan.overlap_m);
            }
            match format {
                Format::Json => out = json(&scan)?,
                Format::Csv => write_curve_csv(&scan_rows(&scan), &mut out)?,
            }
        }
        Command::Fringe { monte_carlo: true } => {
            let fringe = fringe_report(config)?;
            eprintln!(
                "[fringe] monte carlo visibility {:.4} +- {:.4}, analytic {:.4}",
                fringe.visibility, fringe.visibility_stderr, fringe.analytic_visibility
            );
            match format {
                Format::Json => out = json(&fringe)?,
                Format::Csv => write_curve_csv(&fringe_rows(&fringe), &mut out)?,
            }
        }
        Command::Swap => {
            let r = swap_report(config)?;
            eprintln!("[swap] error analytic {:.6} numeric {:.6}", r.error_analytic_1, r.error_numeric);
            match format {
                Format::Json => out = json(&r)?,
                Format::Csv => {
                    let gated = r.gated.as_ref();
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["gamma_a", "gamma_b", "error_analytic", "error_numeric", "gated_error", "throughput"])?;
                    w.serialize((
                        r.rates_1.gamma_a(),
                        r.rates_1.gamma_b(),
                        r.error_analytic_1,
                        r.error_numeric,
                        gated.map(|g| g.error),
                        gated.map(|g| g.throughput),
                    ))?;
                    w.flush()?;
                }
            }
        }
        Command::MonteCarlo => {
            let r = montecarlo_report(config)?;
            let s = &r.summary;
            eprintln!(
                "[montecarlo] {} trials, pair probability {:.5} +- {:.5}",
                s.counts.trials, s.pair_probability.value, s.pair_probability.stderr
            );
            match format {
                Format::Json => out = json(&r)?,
                Format::Csv => write_records_csv(&r.records, &mut out)?,
            }
        }
        Command::Sweep => {
            let rows = sweep_rows(config)?;
            eprintln!("[sweep] {} points", rows.len());
            match format {
                Format::Json => out = json(&rows)?,
                Format::Csv => write_sweep_csv(&rows, &mut out)?,
            }
        }
    }
    if out.is_empty() {
        bail!("{} produced no output", command.name());
    }
    Ok(out)
}

/// Reads and parses a config file; `None` gives all defaults.
pub fn load_config(path: Option<&std::path::Path>) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let src = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
    crate::config::parse_config(&text).with_context(|| format!("invalid config {src}"))
}
