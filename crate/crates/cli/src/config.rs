//! Flat `section.key = value` configuration files.
//!
//! ```text
//! # comments start with '#', also after a value
//! rates.lifetime_a = 0.6
//! rates.lifetime_b = 1.4
//! purcell.f_a = 20
//! gate.delta_t = 0.5, 1.0, 2.0   # lists are comma separated
//! ```
//!
//! Times are in nanoseconds and rates in 1/ns. Every key is listed in
//! [`KEYS`]; anything else is rejected, as are repeated keys. Values are
//! validated while parsing and errors name the line and key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use cascade_core::emitter::DetectorModel;
use cascade_core::interferometry::{AnalyzerConfig, ScanPhase};
use cascade_core::swapping::{purcell_adjust, PurcellFactors};
use cascade_core::timebin::PumpConfig;
use cascade_core::{DecayRates, TimeGrid};
use serde::{Deserialize, Serialize};

/// A configuration key with its unit, default and meaning.
pub struct KeySpec {
    pub key: &'static str,
    pub unit: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(key: &'static str, unit: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, unit, default, help }
}

pub const KEYS: &[KeySpec] = &[
    k("rates.gamma_a", "1/ns", "1/lifetime_a", "amplitude decay rate of the first transition (e -> i)"),
    k("rates.gamma_b", "1/ns", "1/lifetime_b", "amplitude decay rate of the second transition (i -> g)"),
    k("rates.lifetime_a", "ns", "0.6", "lifetime of the first transition, used when gamma_a is unset"),
    k("rates.lifetime_b", "ns", "1.4", "lifetime of the second transition, used when gamma_b is unset"),
    k("pump.p1", "-", "0.5", "excitation probability of the first pump pulse"),
    k("pump.p2", "-", "1", "excitation probability of the second pump pulse"),
    k("pump.phi_p", "rad", "0", "relative phase of the pump pulses"),
    k("pump.tau_bin", "ns", "grid.t_max", "delay between the pump pulses"),
    k("emitter.prep_success", "-", "0.5", "probability that preparation reaches the metastable level"),
    k("emitter.n_trials", "count", "100000", "Monte Carlo trials (per phase point for fringes)"),
    k("emitter.seed", "-", "0", "random seed, overridden by --seed"),
    k("emitter.metastable_decay", "1/ns", "off", "decay rate of the metastable level between pulses"),
    k("emitter.cycle_period", "ns", "off", "protocol repetition period; enables dead time across cycles"),
    k("detector.jitter_sigma", "ns", "0", "standard deviation of Gaussian timing jitter"),
    k("detector.efficiency", "-", "1", "detection probability per photon"),
    k("detector.dead_time", "ns", "0", "minimum separation of detections on one channel"),
    k("grid.t_max", "ns", "10/min(rate)", "extent of the time grid"),
    k("grid.n_points", "count", "1024", "grid points per photon axis"),
    k("grid.override", "bool", "false", "accept grids that truncate the emission (also --grid-override)"),
    k("purcell.f_a", "-", "1", "Purcell factor of the first transition"),
    k("purcell.f_b", "-", "1", "Purcell factor of the second transition"),
    k("gate.t1", "ns", "0.5", "photon A window [0, t1]; list allowed"),
    k("gate.t2", "ns", "0.5", "photon B window start; list allowed"),
    k("gate.delta_t", "ns", "2", "photon B window length; list allowed"),
    k("analyzer.phi_a", "rad", "0", "analyzer phase at station A"),
    k("analyzer.phi_b", "rad", "0", "analyzer phase at station B"),
    k("analyzer.path_delay", "ns", "pump.tau_bin", "analyzer arm delay"),
    k("analyzer.splitting_ratio", "-", "0.5", "analyzer beam-splitter transmittance"),
    k("analyzer.scan", "a|b|p", "a", "phase varied by the fringe command"),
    k("analyzer.points", "count", "32", "phase points of a fringe scan"),
    k("analyzer.slot_margin", "ns", "0.1 tau_bin", "early tolerance of Monte Carlo slot assignment"),
    k("analyzer.slot_width", "ns", "off", "Monte Carlo coincidence window after the slot start"),
    k("sweep.param", "f_a|f_b|gamma_a|gamma_b", "f_a", "parameter varied by the sweep command"),
    k("sweep.start", "param", "1", "first sweep value"),
    k("sweep.stop", "param", "50", "last sweep value"),
    k("sweep.steps", "count", "20", "number of sweep values"),
    k("sweep.scale", "linear|log", "log", "spacing of sweep values"),
    k("output.dir", "path", "$CASCADE_OUT_DIR", "directory for output files named after the command"),
    k("output.format", "csv|json", "per command", "output format, overridden by --format"),
];

/// One line per key, for `--help`.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (section.key = value; times in ns, rates in 1/ns):\n");
    for spec in KEYS {
        s.push_str(&format!("  {:<26} [{}] default {}: {}\n", spec.key, spec.unit, spec.default, spec.help));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), 0) => write!(f, "{k}: {}", self.message),
            (Some(k), l) => write!(f, "line {l}: {k}: {}", self.message),
            (None, l) => write!(f, "line {l}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("expected csv or json, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    FA,
    FB,
    GammaA,
    GammaB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub scale: Scale,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                let u = k as f64 / last;
                match self.scale {
                    Scale::Linear => self.start + (self.stop - self.start) * u,
                    Scale::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * u).exp(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSettings {
    pub prep_success: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub metastable_decay: Option<f64>,
    pub cycle_period: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSettings {
    /// Whether any gate key was given; swap and sweep only gate when set.
    pub configured: bool,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub delta_t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub which: ScanPhase,
    pub points: usize,
    pub slot_margin: f64,
    pub slot_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Fully validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Rates of the bare emitter.
    pub rates: DecayRates,
    pub purcell: PurcellFactors,
    pub pump: PumpConfig,
    pub emitter: EmitterSettings,
    pub detector: DetectorModel,
    pub grid: TimeGrid,
    pub gate: GateSettings,
    pub analyzer: AnalyzerConfig,
    pub scan: ScanSettings,
    pub sweep: SweepSpec,
    pub output: OutputSettings,
}

impl RunConfig {
    /// Rates after the Purcell factors; every command works with these.
    pub fn effective_rates(&self) -> DecayRates {
        purcell_adjust(&self.rates, &self.purcell).expect("validated at parse time")
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.map.get(key).map_or(0, |e| e.line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.value.as_str())
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(key, format!("expected a finite number, got `{v}`")))
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn int(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|_| self.err(key, format!("expected a non-negative integer, got `{v}`"))))
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(self.err(key, format!("expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    fn list(&self, key: &str, default: f64) -> Result<Vec<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(vec![default]),
            Some(v) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| self.err(key, format!("expected a number, got `{s}`")))
                })
                .collect(),
        }
    }

    /// Maps a library validation error to the key it came from.
    fn core(&self, section: &str, e: cascade_core::Error) -> ConfigError {
        let name = match &e {
            cascade_core::Error::OutOfRange { name, .. } | cascade_core::Error::InvalidRate { name, .. } => *name,
            _ => "",
        };
        let key = format!("{section}.{name}");
        if self.map.contains_key(&key) {
            self.err(&key, e.to_string())
        } else {
            ConfigError { line: 0, key: Some(section.to_string()), message: e.to_string() }
        }
    }
}

fn split_lines(text: &str) -> Result<Entries, ConfigError> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError { line, key: None, message: format!("expected `section.key = value`, got `{content}`") });
        };
        let key = key.trim();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if value.is_empty() {
            return Err(ConfigError { line, key: Some(key.into()), message: "missing value".into() });
        }
        if !KEYS.iter().any(|s| s.key == key) {
            let hint = if key.contains('.') { "" } else { " (keys have the form section.key)" };
            return Err(ConfigError { line, key: Some(key.into()), message: format!("unknown key{hint}") });
        }
        if let Some(prev) = map.get(key) {
            return Err(ConfigError {
                line,
                key: Some(key.into()),
                message: format!("duplicate key, first set on line {}", prev.line),
            });
        }
        map.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(Entries { map })
}

fn positive(e: &Entries, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(e.err(key, format!("must be positive, got {v}")))
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = split_lines(text)?;

    let rate = |g: &str, tau: &str, default_tau: f64| -> Result<f64, ConfigError> {
        match (e.f64(g)?, e.f64(tau)?) {
            (Some(_), Some(_)) => Err(e.err(tau, format!("set either {g} or {tau}, not both"))),
            (Some(v), None) => positive(&e, g, v),
            (None, t) => Ok(1.0 / positive(&e, tau, t.unwrap_or(default_tau))?),
        }
    };
    let ga = rate("rates.gamma_a", "rates.lifetime_a", 0.6)?;
    let gb = rate("rates.gamma_b", "rates.lifetime_b", 1.4)?;
    let rates = DecayRates::new(ga, gb).map_err(|err| e.core("rates", err))?;
    let purcell = PurcellFactors::new(e.f64_or("purcell.f_a", 1.0)?, e.f64_or("purcell.f_b", 1.0)?)
        .map_err(|err| e.core("purcell", err))?;
    let effective = purcell_adjust(&rates, &purcell).map_err(|err| e.core("purcell", err))?;

    let default_grid = TimeGrid::default_for(&effective);
    let t_max = positive(&e, "grid.t_max", e.f64_or("grid.t_max", default_grid.t_max())?)?;
    let n_points = e.int("grid.n_points")?.unwrap_or(default_grid.n_points() as u64) as usize;
    let grid = TimeGrid::new(t_max, n_points)
        .map_err(|err| e.err(if n_points < 2 { "grid.n_points" } else { "grid.t_max" }, err.to_string()))?
        .with_override(e.bool("grid.override")?.unwrap_or(false));

    let tau_bin = e.f64_or("pump.tau_bin", grid.t_max())?;
    let pump = PumpConfig::new(
        e.f64_or("pump.p1", 0.5)?,
        e.f64_or("pump.p2", 1.0)?,
        e.f64_or("pump.phi_p", 0.0)?,
        tau_bin,
    )
    .map_err(|err| e.core("pump", err))?;

    let emitter = EmitterSettings {
        prep_success: e.f64_or("emitter.prep_success", 0.5)?,
        n_trials: e.int("emitter.n_trials")?.unwrap_or(100_000),
        seed: e.int("emitter.seed")?.unwrap_or(0),
        metastable_decay: e.f64("emitter.metastable_decay")?,
        cycle_period: e.f64("emitter.cycle_period")?,
    };
    let mut probe = cascade_core::emitter::EmitterConfig::new(pump.clone(), effective.clone());
    probe.prep_success = emitter.prep_success;
    probe.n_trials = emitter.n_trials;
    probe.metastable_decay = emitter.metastable_decay;
    probe.cycle_period = emitter.cycle_period;
    probe.validate().map_err(|err| e.core("emitter", err))?;

    let detector = DetectorModel {
        jitter_sigma: e.f64_or("detector.jitter_sigma", 0.0)?,
        efficiency: e.f64_or("detector.efficiency", 1.0)?,
        dead_time: e.f64_or("detector.dead_time", 0.0)?,
    };
    detector.validate().map_err(|err| e.core("detector", err))?;

    let gate = GateSettings {
        configured: e.map.keys().any(|k| k.starts_with("gate.")),
        t1: e.list("gate.t1", 0.5)?,
        t2: e.list("gate.t2", 0.5)?,
        delta_t: e.list("gate.delta_t", 2.0)?,
    };
    for (key, vals) in [("gate.t1", &gate.t1), ("gate.delta_t", &gate.delta_t)] {
        for &v in vals.iter() {
            positive(&e, key, v)?;
        }
    }
    if let Some(v) = gate.t2.iter().find(|v| **v < 0.0) {
        return Err(e.err("gate.t2", format!("must be >= 0, got {v}")));
    }

    let analyzer = AnalyzerConfig {
        phi_a: e.f64_or("analyzer.phi_a", 0.0)?,
        phi_b: e.f64_or("analyzer.phi_b", 0.0)?,
        path_delay: e.f64_or("analyzer.path_delay", tau_bin)?,
        splitting_ratio: e.f64_or("analyzer.splitting_ratio", 0.5)?,
    };
    analyzer.validate().map_err(|err| e.core("analyzer", err))?;
    let which = match e.raw("analyzer.scan").unwrap_or("a") {
        "a" => ScanPhase::A,
        "b" => ScanPhase::B,
        "p" => ScanPhase::P,
        other => return Err(e.err("analyzer.scan", format!("expected a, b or p, got `{other}`"))),
    };
    let points = e.int("analyzer.points")?.unwrap_or(32) as usize;
    if points < 8 {
        return Err(e.err("analyzer.points", format!("need at least 8 points, got {points}")));
    }
    let slot_margin = e.f64_or("analyzer.slot_margin", 0.1 * tau_bin)?;
    if slot_margin < 0.0 {
        return Err(e.err("analyzer.slot_margin", "must be >= 0"));
    }
    let slot_width = e.f64("analyzer.slot_width")?.map(|w| positive(&e, "analyzer.slot_width", w)).transpose()?;
    let scan = ScanSettings { which, points, slot_margin, slot_width };

    let param = match e.raw("sweep.param").unwrap_or("f_a") {
        "f_a" => SweepParam::FA,
        "f_b" => SweepParam::FB,
        "gamma_a" => SweepParam::GammaA,
        "gamma_b" => SweepParam::GammaB,
        other => return Err(e.err("sweep.param", format!("expected f_a, f_b, gamma_a or gamma_b, got `{other}`"))),
    };
    let scale = match e.raw("sweep.scale").unwrap_or("log") {
        "linear" => Scale::Linear,
        "log" => Scale::Log,
        other => return Err(e.err("sweep.scale", format!("expected linear or log, got `{other}`"))),
    };
    let start = positive(&e, "sweep.start", e.f64_or("sweep.start", 1.0)?)?;
    let stop = positive(&e, "sweep.stop", e.f64_or("sweep.stop", 50.0)?)?;
    let steps = e.int("sweep.steps")?.unwrap_or(20) as usize;
    if steps == 0 {
        return Err(e.err("sweep.steps", "need at least one step"));
    }
    let sweep = SweepSpec { param, start, stop, steps, scale };

    let format = e
        .raw("output.format")
        .map(|v| v.parse::<Format>().map_err(|m| e.err("output.format", m)))
        .transpose()?;
    let output = OutputSettings { dir: e.raw("output.dir").map(PathBuf::from), format };

    Ok(RunConfig { rates, purcell, pump, emitter, detector, grid, gate, analyzer, scan, sweep, output })
}
