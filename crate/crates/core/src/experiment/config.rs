//! Run configuration: defaults, a flat key=value file, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::parallel::default_workers;
use crate::protocols::{Decoherence, ProtocolKind};
use crate::qpd::TimeGrid;
use crate::spin_chain::{InitialState, SpinChainParams, PAPER_G_OVER_J, PAPER_J, PAPER_N_QUBITS, PAPER_T2_STAR_US};
use crate::tolerance::TOLERANCES;
use crate::{Error, Result};

/// Environment variable consulted when no output directory is configured.
pub const OUTPUT_DIR_ENV: &str = "OTOC_LAB_OUTPUT_DIR";

pub const DEFAULT_OUTPUT_DIR: &str = "otoc-lab-output";
pub const DEFAULT_T_MAX_US: f64 = 60.0;
pub const DEFAULT_SWEEP_T_MAX_US: f64 = 200.0;
pub const DEFAULT_DT_GRID_US: f64 = 0.1;
pub const DEFAULT_DT_INTEGRATION_US: f64 = 0.1;
pub const DEFAULT_SWEEP_POINTS: usize = 15;
pub const SWEEP_H_MAX: f64 = 0.5;
/// Upper limit of the time-integrated nonclassicality reported by sweeps, in us.
pub const CUMULATIVE_WINDOW_US: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Otoc,
    Qpd,
    Nonclassicality,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Otoc => "otoc",
            Experiment::Qpd => "qpd",
            Experiment::Nonclassicality => "nonclassicality",
            Experiment::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "otoc" => Ok(Experiment::Otoc),
            "qpd" => Ok(Experiment::Qpd),
            "nonclassicality" => Ok(Experiment::Nonclassicality),
            "sweep" => Ok(Experiment::Sweep),
            other => Err(Error::config("experiment", format!("unknown experiment `{other}`"))),
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n_qubits: usize,
    pub h_over_j: f64,
    pub g_over_j: f64,
    /// Coupling J in rad/us; not configurable, recorded for the manifest.
    pub j_coupling: f64,
    /// `None` runs the closed system.
    pub t2_star_us: Option<f64>,
    /// `None` is the infinite-temperature state.
    pub temperature_over_j: Option<f64>,
    pub t_max_us: f64,
    pub dt_grid_us: f64,
    pub dt_integration_us: f64,
    /// Nonclassicality threshold for the timescales; Δt_grid² unless set.
    pub threshold: f64,
    pub protocols: Vec<ProtocolKind>,
    pub sweep_points: usize,
    pub output_dir: PathBuf,
    pub worker_count: usize,
    /// Also write an SVG next to each CSV.
    pub plot: bool,
}

/// Unresolved settings; every field is optional until [`ConfigBuilder::resolve`].
#[derive(Clone, Debug, Default)]
pub struct ConfigBuilder {
    experiment: Option<Experiment>,
    n_qubits: Option<usize>,
    h_over_j: Option<f64>,
    g_over_j: Option<f64>,
    t2_star_us: Option<Option<f64>>,
    temperature_over_j: Option<Option<f64>>,
    t_max_us: Option<f64>,
    dt_grid_us: Option<f64>,
    dt_integration_us: Option<f64>,
    threshold: Option<f64>,
    protocols: Option<Vec<ProtocolKind>>,
    sweep_points: Option<usize>,
    output_dir: Option<PathBuf>,
    worker_count: Option<usize>,
    plot: Option<bool>,
}

pub const CONFIG_KEYS: [&str; 15] = [
    "experiment",
    "n_qubits",
    "h_over_j",
    "g_over_j",
    "t2_star_us",
    "temperature_over_j",
    "t_max_us",
    "dt_grid_us",
    "dt_integration_us",
    "threshold",
    "protocols",
    "sweep_points",
    "output_dir",
    "worker_count",
    "plot",
];

fn parse_f64(field: &str, value: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| Error::config(field, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::config(field, format!("`{value}` is not finite")));
    }
    Ok(v)
}

fn parse_usize(field: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| Error::config(field, format!("`{value}` is not a non-negative integer")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::config(field, format!("`{value}` is not a boolean"))),
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets one key; keys use snake_case or kebab-case.
    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "experiment" => self.experiment = Some(v.parse()?),
            "n_qubits" => self.n_qubits = Some(parse_usize(&key, v)?),
            "h_over_j" => self.h_over_j = Some(parse_f64(&key, v)?),
            "g_over_j" => self.g_over_j = Some(parse_f64(&key, v)?),
            "t2_star_us" => {
                self.t2_star_us = Some(match v.to_ascii_lowercase().as_str() {
                    "none" | "inf" | "infinite" => None,
                    _ => Some(parse_f64(&key, v)?),
                })
            }
            "temperature_over_j" => {
                self.temperature_over_j = Some(match v.to_ascii_lowercase().as_str() {
                    "infinite" | "inf" => None,
                    _ => Some(parse_f64(&key, v)?),
                })
            }
            "t_max_us" => self.t_max_us = Some(parse_f64(&key, v)?),
            "dt_grid_us" => self.dt_grid_us = Some(parse_f64(&key, v)?),
            "dt_integration_us" => self.dt_integration_us = Some(parse_f64(&key, v)?),
            "threshold" => self.threshold = Some(parse_f64(&key, v)?),
            "protocols" => {
                let list = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(ProtocolKind::from_str)
                    .collect::<Result<Vec<_>>>()?;
                self.protocols = Some(list);
            }
            "sweep_points" => self.sweep_points = Some(parse_usize(&key, v)?),
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "worker_count" => self.worker_count = Some(parse_usize(&key, v)?),
            "plot" => self.plot = Some(parse_bool(&key, v)?),
            _ => return Err(Error::config(key.clone(), "unknown configuration key")),
        }
        Ok(self)
    }

    /// Applies every `key = value` line of a config file. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<&mut Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config("config", format!("line {}: expected key = value", lineno + 1)));
            };
            self.set(k, v)?;
        }
        Ok(self)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<&mut Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Fills defaults, consults `env_output_dir` when no output directory was set, and validates.
    pub fn resolve(&self, env_output_dir: Option<&str>) -> Result<RunConfig> {
        let experiment = self.experiment.unwrap_or(Experiment::Otoc);
        let dt_grid_us = self.dt_grid_us.unwrap_or(DEFAULT_DT_GRID_US);
        let default_t_max = if experiment == Experiment::Sweep { DEFAULT_SWEEP_T_MAX_US } else { DEFAULT_T_MAX_US };
        let output_dir = match (&self.output_dir, env_output_dir.filter(|s| !s.trim().is_empty())) {
            (Some(p), _) => p.clone(),
            (None, Some(env)) => PathBuf::from(env),
            (None, None) => PathBuf::from(DEFAULT_OUTPUT_DIR),
        };
        let cfg = RunConfig {
            experiment,
            n_qubits: self.n_qubits.unwrap_or(PAPER_N_QUBITS),
            h_over_j: self.h_over_j.unwrap_or(0.0),
            g_over_j: self.g_over_j.unwrap_or(PAPER_G_OVER_J),
            j_coupling: PAPER_J,
            t2_star_us: self.t2_star_us.unwrap_or(Some(PAPER_T2_STAR_US)),
            temperature_over_j: self.temperature_over_j.unwrap_or(Some(1.0)),
            t_max_us: self.t_max_us.unwrap_or(default_t_max),
            dt_grid_us,
            dt_integration_us: self.dt_integration_us.unwrap_or(DEFAULT_DT_INTEGRATION_US),
            threshold: self.threshold.unwrap_or(dt_grid_us * dt_grid_us),
            protocols: self.protocols.clone().unwrap_or_else(|| ProtocolKind::ALL.to_vec()),
            sweep_points: self.sweep_points.unwrap_or(DEFAULT_SWEEP_POINTS),
            output_dir,
            worker_count: self.worker_count.unwrap_or_else(default_workers),
            plot: self.plot.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits > 10 {
            return Err(Error::config("n_qubits", format!("must be in 2..=10, got {}", self.n_qubits)));
        }
        if let Some(t2) = self.t2_star_us {
            if !(t2 > 0.0) {
                return Err(Error::config("t2_star_us", format!("must be positive or `none`, got {t2}")));
            }
        }
        if let Some(t) = self.temperature_over_j {
            if !(t > 0.0) {
                return Err(Error::config("temperature_over_j", format!("must be positive or `infinite`, got {t}")));
            }
        }
        if !(self.t_max_us > 0.0) {
            return Err(Error::config("t_max_us", format!("must be positive, got {}", self.t_max_us)));
        }
        if !(self.dt_grid_us > 0.0) {
            return Err(Error::config("dt_grid_us", format!("must be positive, got {}", self.dt_grid_us)));
        }
        if !(self.dt_integration_us > 0.0) {
            return Err(Error::config(
                "dt_integration_us",
                format!("must be positive, got {}", self.dt_integration_us),
            ));
        }
        let ratio = self.dt_grid_us / self.dt_integration_us;
        if (ratio.round() * self.dt_integration_us - self.dt_grid_us).abs() > TOLERANCES.grid || ratio.round() < 1.0 {
            return Err(Error::config(
                "dt_integration_us",
                format!("{} does not divide dt_grid_us = {}", self.dt_integration_us, self.dt_grid_us),
            ));
        }
        let steps = (self.t_max_us / self.dt_grid_us).round();
        if (steps * self.dt_grid_us - self.t_max_us).abs() > TOLERANCES.grid {
            return Err(Error::config(
                "t_max_us",
                format!("{} is not a multiple of dt_grid_us = {}", self.t_max_us, self.dt_grid_us),
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::config("threshold", format!("must be non-negative, got {}", self.threshold)));
        }
        if self.protocols.is_empty() {
            return Err(Error::config("protocols", "select at least one protocol"));
        }
        if self.experiment == Experiment::Sweep && self.sweep_points < 2 {
            return Err(Error::config("sweep_points", format!("must be at least 2, got {}", self.sweep_points)));
        }
        if self.worker_count == 0 {
            return Err(Error::config("worker_count", "must be at least 1"));
        }
        if let Some(t2) = self.t2_star_us {
            let total_rate = (self.n_qubits + 1) as f64 / (2.0 * t2);
            if self.dt_integration_us * total_rate >= 1.0 {
                return Err(Error::config(
                    "dt_integration_us",
                    "too large for the dephasing rate (no-jump weight would be negative)",
                ));
            }
        }
        Ok(())
    }

    pub fn chain(&self, h_over_j: f64) -> SpinChainParams {
        SpinChainParams { n_qubits: self.n_qubits, j_coupling: self.j_coupling, h_over_j, g_over_j: self.g_over_j }
    }

    pub fn decoherence(&self) -> Option<Decoherence> {
        self.t2_star_us.map(|t2| Decoherence { t2_star: t2, dt: self.dt_integration_us })
    }

    pub fn initial_state(&self) -> InitialState {
        match self.temperature_over_j {
            Some(t) => InitialState::Gibbs { temperature_over_j: t },
            None => InitialState::InfiniteTemperature,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_max_us, self.dt_grid_us)
    }
}
