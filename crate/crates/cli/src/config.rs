//! Flat `key = value` scenario files.

use std::fmt;
use std::str::FromStr;

use singlet_core::{figure3_preset, BellState, InitialState, ParamName, SystemParams};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Steady,
    Rates,
    Benchmarks,
    Spectrum,
    Optimize,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Evolve,
        Command::Steady,
        Command::Rates,
        Command::Benchmarks,
        Command::Spectrum,
        Command::Optimize,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::Rates => "rates",
            Command::Benchmarks => "benchmarks",
            Command::Spectrum => "spectrum",
            Command::Optimize => "optimize",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// One or two swept parameters.
    pub params: Vec<ParamName>,
    /// One grid per swept parameter.
    pub grids: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub params: SystemParams,
    pub initial_state: InitialState,
    pub t_end: f64,
    pub sample_interval: f64,
    pub sweep: Option<SweepSpec>,
    /// Objective / scan time; defaults to `t_end`.
    pub t_target: f64,
    pub budget: usize,
    pub free: Vec<ParamName>,
    pub seed: u64,
    /// Random samples before the simplex runs.
    pub prescan: usize,
    pub ghz: Option<f64>,
    pub threshold: f64,
    /// Use the loose objective tolerances for evolve/steady.
    pub fast: bool,
    pub sector: usize,
    /// Anharmonicity grid of the spectrum command.
    pub spectrum_grid: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            command: Command::Evolve,
            params: figure3_preset(1.0),
            initial_state: InitialState::Mixture4,
            t_end: 1000.0,
            sample_interval: 1.0,
            sweep: None,
            t_target: 1000.0,
            budget: 400,
            free: vec![ParamName::OmegaBar, ParamName::Epsilon, ParamName::DeltaC],
            seed: 0,
            prescan: 0,
            ghz: None,
            threshold: 0.9,
            fast: false,
            sector: 2,
            spectrum_grid: linspace(0.0, 5.0, 51),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `a, b, c` or `lo:hi:n`.
fn parse_grid(value: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let lo = parse_f64(parts[0])?;
        let hi = parse_f64(parts[1])?;
        let n: usize = parts[2].parse().map_err(|_| format!("bad point count `{}`", parts[2]))?;
        return Ok(linspace(lo, hi, n));
    }
    if parts.len() != 1 {
        return Err(format!("grid `{value}` must be a list or lo:hi:n"));
    }
    value.split(',').map(|v| parse_f64(v.trim())).collect()
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if v.is_finite() { Ok(v) } else { Err(format!("`{s}` is not finite")) }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("cannot parse `{s}` as a boolean")),
    }
}

fn parse_initial(s: &str) -> Result<InitialState, String> {
    match s {
        "mixture4" => Ok(InitialState::Mixture4),
        "ground" => Ok(InitialState::Ground),
        _ => BellState::from_name(s)
            .map(InitialState::Named)
            .ok_or_else(|| format!("unknown initial state `{s}` (mixture4, ground, 00, 11, T, S, T0, S0, T1, S1)")),
    }
}

fn parse_params(s: &str) -> Result<Vec<ParamName>, String> {
    s.split(',').map(|p| p.trim().parse::<ParamName>().map_err(|e| e.to_string())).collect()
}

/// Parses a scenario; unspecified values come from the A = g preset, and the
/// resonance-condition frequencies follow any overridden ω, A or g unless
/// `omega_bar` / `delta_c` are given explicitly.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut overrides: Vec<(usize, ParamName, f64)> = Vec::new();
    let mut t_target = None;
    let mut sweep_params: Option<(usize, Vec<ParamName>)> = None;
    let mut grids: [Option<(usize, Vec<f64>)>; 2] = [None, None];
    let mut seen: Vec<String> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::at(n, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::at(n, format!("duplicate key `{key}`")));
        }
        seen.push(key.to_string());
        let err = |m: String| ConfigError::at(n, format!("{key}: {m}"));
        match key {
            "command" => cfg.command = value.parse().map_err(err)?,
            "initial_state" => cfg.initial_state = parse_initial(value).map_err(err)?,
            "t_end" => cfg.t_end = parse_f64(value).map_err(err)?,
            "sample_interval" => cfg.sample_interval = parse_f64(value).map_err(err)?,
            "t_target" => t_target = Some(parse_f64(value).map_err(err)?),
            "budget" => cfg.budget = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a count")))?,
            "free" => cfg.free = parse_params(value).map_err(err)?,
            "seed" => cfg.seed = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a seed")))?,
            "prescan" => cfg.prescan = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a count")))?,
            "ghz" => cfg.ghz = Some(parse_f64(value).map_err(err)?),
            "threshold" => cfg.threshold = parse_f64(value).map_err(err)?,
            "fast" => cfg.fast = parse_bool(value).map_err(err)?,
            "sector" => cfg.sector = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a sector")))?,
            "spectrum_A" => cfg.spectrum_grid = parse_grid(value).map_err(err)?,
            "sweep" => sweep_params = Some((n, parse_params(value).map_err(err)?)),
            "grid" => grids[0] = Some((n, parse_grid(value).map_err(err)?)),
            "grid2" => grids[1] = Some((n, parse_grid(value).map_err(err)?)),
            "d_t" => cfg.params.d_t = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a level count")))?,
            "d_c" => cfg.params.d_c = value.parse().map_err(|_| err(format!("cannot parse `{value}` as a level count")))?,
            _ => {
                let name: ParamName = key.parse().map_err(|_| ConfigError::at(n, format!("unknown key `{key}`")))?;
                let v = parse_f64(value).map_err(err)?;
                if name.is_non_negative() && v < 0.0 {
                    return Err(ConfigError::at(n, format!("{key} must be non-negative, got {v}")));
                }
                overrides.push((n, name, v));
            }
        }
    }

    for &(_, name, v) in &overrides {
        cfg.params.set(name, v);
    }
    let explicit = |p: ParamName| overrides.iter().any(|(_, q, _)| *q == p);
    let mut resonant = cfg.params.with_resonance_conditions();
    if explicit(ParamName::OmegaBar) {
        resonant.omega_bar = cfg.params.omega_bar;
        resonant.delta_c = resonant.delta2() - resonant.delta1();
    }
    if explicit(ParamName::DeltaC) {
        resonant.delta_c = cfg.params.delta_c;
    }
    cfg.params = resonant;
    cfg.params.validate().map_err(|e| ConfigError::global(e.to_string()))?;

    cfg.t_target = t_target.unwrap_or(cfg.t_end);
    for (name, v) in [("t_end", cfg.t_end), ("sample_interval", cfg.sample_interval), ("t_target", cfg.t_target)] {
        if !(v > 0.0) {
            return Err(ConfigError::global(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(ConfigError::global(format!("threshold must lie in [0, 1], got {}", cfg.threshold)));
    }

    match sweep_params {
        Some((n, params)) => {
            if params.is_empty() || params.len() > 2 {
                return Err(ConfigError::at(n, "sweep takes one or two parameters"));
            }
            let mut out = Vec::new();
            for (k, g) in grids.iter().enumerate().take(params.len()) {
                let key = if k == 0 { "grid" } else { "grid2" };
                match g {
                    Some((gn, values)) if values.is_empty() => return Err(ConfigError::at(*gn, format!("{key} is empty"))),
                    Some((_, values)) => out.push(values.clone()),
                    None => return Err(ConfigError::at(n, format!("sweep over {} needs `{key}`", params[k]))),
                }
            }
            if params.len() == 1 {
                if let Some((gn, _)) = &grids[1] {
                    return Err(ConfigError::at(*gn, "grid2 given for a one-parameter sweep"));
                }
            }
            cfg.sweep = Some(SweepSpec { params, grids: out });
        }
        None => {
            if let Some((gn, _)) = grids.iter().flatten().next() {
                return Err(ConfigError::at(*gn, "grid given without `sweep`"));
            }
        }
    }
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks the invariants tied to the chosen command.
    pub fn validate_command(&self) -> Result<(), ConfigError> {
        match self.command {
            Command::Sweep if self.sweep.is_none() => Err(ConfigError::global("command sweep needs `sweep` and `grid`")),
            Command::Spectrum if self.spectrum_grid.is_empty() => Err(ConfigError::global("spectrum_A grid is empty")),
            Command::Benchmarks if !(self.params.gamma > 0.0) => {
                Err(ConfigError::global("benchmarks need gamma > 0"))
            }
            _ => Ok(()),
        }
    }
}
