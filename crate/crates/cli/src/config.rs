//! Flat `key = value [unit]` scenario files.
//!
//! Every key has a default, so an empty file describes the reference
//! scenario. Values may carry a unit suffix (`W`, `mW`, `dBm`, `dB`, `MHz`,
//! ...); decibel quantities are converted to linear units at load time.
//! Environment variables named `SWIPT_<KEY>` override file values.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swipt::fading::RicianConfig;
use swipt::region::{Scheme, TraceOptions};
use swipt::siso::LinkParams;
use swipt::{Error, Result};

pub const ENV_PREFIX: &str = "SWIPT_";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub link: LinkParams,
    pub channel: RicianConfig,
    pub num_states: usize,
    pub seed: u64,
    pub n_points: usize,
    /// Empty means the default set for the antenna count.
    pub schemes: Vec<Scheme>,
    pub trace: TraceOptions,
    /// Only used to label plots in bits/s.
    pub bandwidth_hz: f64,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            link: LinkParams::default(),
            channel: RicianConfig::default(),
            num_states: 100_000,
            seed: 1,
            n_points: 25,
            schemes: Vec::new(),
            trace: TraceOptions::default(),
            bandwidth_hz: 10e6,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Power,
    Gain,
    Frequency,
    Angle,
    Real,
    Count,
    Text,
}

const KEYS: &[(&str, Kind)] = &[
    ("tx_power_avg", Kind::Power),
    ("tx_power_peak", Kind::Power),
    ("noise_power", Kind::Power),
    ("harvest_efficiency", Kind::Real),
    ("rician_k", Kind::Gain),
    ("mean_power_gain", Kind::Gain),
    ("num_antennas", Kind::Count),
    ("ula_phase", Kind::Angle),
    ("bandwidth", Kind::Frequency),
    ("num_states", Kind::Count),
    ("seed", Kind::Count),
    ("n_points", Kind::Count),
    ("schemes", Kind::Text),
    ("bisection_tol", Kind::Real),
    ("ellipsoid_tol", Kind::Real),
    ("max_iterations", Kind::Count),
    ("residual_tol", Kind::Real),
    ("epsilon", Kind::Real),
    ("eta", Kind::Real),
    ("out_dir", Kind::Text),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Real(f64),
    Count(u64),
    Text(String),
}

/// Converts `"<number> [unit]"` to the linear base unit of `kind`.
fn parse_value(kind: Kind, raw: &str) -> std::result::Result<Value, String> {
    let raw = raw.trim();
    match kind {
        Kind::Text => return Ok(Value::Text(raw.to_string())),
        Kind::Count => {
            return raw
                .replace('_', "")
                .parse::<u64>()
                .map(Value::Count)
                .or_else(|_| {
                    // Accept 1e5-style counts when they are whole numbers.
                    match raw.parse::<f64>() {
                        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 9.007e15 => Ok(Value::Count(x as u64)),
                        _ => Err(format!("'{raw}' is not a non-negative integer")),
                    }
                });
        }
        _ => {}
    }
    let (num, unit) = match raw.find(|c: char| c.is_whitespace()) {
        Some(i) => (&raw[..i], raw[i..].trim()),
        None => {
            let split = raw
                .char_indices()
                .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(raw, i))
                .map_or(raw.len(), |(i, _)| i);
            (&raw[..split], &raw[split..])
        }
    };
    let x: f64 = num
        .parse()
        .map_err(|_| format!("'{num}' is not a number"))?;
    let db = |x: f64| 10f64.powf(x / 10.0);
    let value = match (kind, unit) {
        (Kind::Power, "" | "W") => x,
        (Kind::Power, "mW") => x * 1e-3,
        (Kind::Power, "uW") => x * 1e-6,
        (Kind::Power, "dBW") => db(x),
        (Kind::Power, "dBm") => db(x) * 1e-3,
        (Kind::Gain, "") => x,
        (Kind::Gain, "dB") => db(x),
        (Kind::Frequency, "" | "Hz") => x,
        (Kind::Frequency, "kHz") => x * 1e3,
        (Kind::Frequency, "MHz") => x * 1e6,
        (Kind::Frequency, "GHz") => x * 1e9,
        (Kind::Angle, "" | "rad") => x,
        (Kind::Angle, "deg") => x.to_radians(),
        (Kind::Real, "") => x,
        (_, unit) => return Err(format!("unit '{unit}' does not apply here")),
    };
    Ok(Value::Real(value))
}

/// True when the letter at `i` is the `e` of a floating-point exponent.
fn is_exponent(s: &str, i: usize) -> bool {
    let b = s.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && (b[i - 1].is_ascii_digit() || b[i - 1] == b'.')
        && b.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

impl ScenarioConfig {
    fn apply(&mut self, key: &str, value: Value) -> std::result::Result<(), String> {
        let real = |v: &Value| match v {
            Value::Real(x) => *x,
            Value::Count(n) => *n as f64,
            Value::Text(_) => unreachable!(),
        };
        let count = |v: &Value| match v {
            Value::Count(n) => *n,
            _ => unreachable!(),
        };
        let size = |v: &Value| usize::try_from(count(v)).map_err(|_| "count out of range".to_string());
        match key {
            "tx_power_avg" => self.link.tx_power_avg = real(&value),
            "tx_power_peak" => self.link.tx_power_peak = real(&value),
            "noise_power" => self.link.noise_power = real(&value),
            "harvest_efficiency" => self.link.harvest_efficiency = real(&value),
            "rician_k" => self.channel.rician_k = real(&value),
            "mean_power_gain" => self.channel.mean_power_gain = real(&value),
            "num_antennas" => self.channel.num_antennas = size(&value)?,
            "ula_phase" => self.channel.ula_phase = real(&value),
            "bandwidth" => self.bandwidth_hz = real(&value),
            "num_states" => self.num_states = size(&value)?,
            "seed" => self.seed = count(&value),
            "n_points" => self.n_points = size(&value)?,
            "bisection_tol" => self.trace.solver.bisection_tol = real(&value),
            "ellipsoid_tol" => self.trace.solver.ellipsoid_tol = real(&value),
            "max_iterations" => self.trace.solver.max_iterations = size(&value)?,
            "residual_tol" => self.trace.solver.residual_tol = real(&value),
            "epsilon" => self.trace.epsilon = real(&value),
            "eta" => self.trace.eta = real(&value),
            "schemes" => {
                let Value::Text(s) = value else { unreachable!() };
                self.schemes = parse_schemes(&s).map_err(|e| e.to_string())?;
            }
            "out_dir" => {
                let Value::Text(s) = value else { unreachable!() };
                self.out_dir = PathBuf::from(s);
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    fn set(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let kind = kind_of(key).ok_or_else(|| format!("unknown key '{key}'"))?;
        let value = parse_value(kind, raw).map_err(|e| format!("{key}: {e}"))?;
        self.apply(key, value)
    }

    /// Parses file text, then applies `SWIPT_<KEY>` pairs from `env`, then
    /// validates. `origin` labels diagnostics.
    pub fn parse<I>(text: &str, origin: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                message,
            };
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected 'key = value', found '{line}'")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(parse_err(format!("duplicate key '{key}'")));
            }
            cfg.set(key, raw).map_err(parse_err)?;
        }
        for (name, raw) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            cfg.set(&key, &raw)
                .map_err(|message| Error::Config(format!("environment variable {name}: {message}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Collects every violated invariant into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for check in [self.link.validate(), self.channel.validate(), self.trace.solver.validate()] {
            if let Err(e) = check {
                problems.push(e.to_string());
            }
        }
        if self.num_states == 0 {
            problems.push("num_states must be >= 1".into());
        }
        if self.n_points < 2 {
            problems.push(format!("n_points must be >= 2 (got {})", self.n_points));
        }
        if !(self.trace.epsilon >= 0.0 && self.trace.epsilon.is_finite()) {
            problems.push(format!("epsilon must be finite and >= 0 (got {})", self.trace.epsilon));
        }
        if !(self.trace.eta >= 0.0 && self.trace.eta.is_finite()) {
            problems.push(format!("eta must be finite and >= 0 (got {})", self.trace.eta));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            problems.push(format!("bandwidth must be finite and > 0 (got {})", self.bandwidth_hz));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// The configured schemes, or all schemes that apply to the antenna
    /// count when none are listed.
    pub fn effective_schemes(&self) -> Vec<Scheme> {
        if !self.schemes.is_empty() {
            self.schemes.clone()
        } else if self.channel.num_antennas == 1 {
            Scheme::siso_all()
        } else {
            Scheme::simo_all()
        }
    }
}

pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    let mut out: Vec<Scheme> = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s: Scheme = name.parse()?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Reads `path` (or nothing, for the defaults) and applies the process
/// environment.
pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let (text, origin) = match path {
        Some(p) => (std::fs::read_to_string(p)?, p.display().to_string()),
        None => (String::new(), "<defaults>".to_string()),
    };
    ScenarioConfig::parse(&text, &origin, std::env::vars())
}
