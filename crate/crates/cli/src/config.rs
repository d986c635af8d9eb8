//! Flat `key = value` configuration with one level of sections.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bgk_core::scenario::Scenario;
use bgk_core::solver::{Interpolation, SolverMode};
use bgk_core::{BgkError, DomainMode, Exponent, ModelParams};
use thiserror::Error;

pub const SECTIONS: [&str; 5] = ["model", "grid", "solver", "scenario", "output"];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{0}' is set more than once")]
    DuplicateKey(String),
    #[error("key '{key}' expects {expected}, got '{value}'")]
    TypeError { key: String, expected: String, value: String },
    #[error("missing required key '{0}'")]
    MissingRequired(String),
    #[error("key '{key}': {source}")]
    Invalid { key: String, source: BgkError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nv: usize,
    /// Half-width of the velocity box; sized from the initial data when absent.
    pub v_half_width: Option<f64>,
    pub domain_mode: DomainMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub dt: f64,
    pub t_end: f64,
    pub interpolation: Interpolation,
    pub mode: SolverMode,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub checkpoint_every: usize,
    pub store_every: usize,
    pub ledger_constant: f64,
    pub weak_constant: f64,
    pub hydro_taus: Vec<f64>,
    pub hydro_horizon: f64,
    pub hydro_nx_ref: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seed: u64,
    pub verify_cases: usize,
    pub verify_nv_1d: usize,
    pub verify_nv_2d: usize,
    pub sweep_cases: usize,
    pub sweep_nv: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: GridConfig,
    pub solver: SolverSettings,
    pub scenario: Scenario,
    pub counterexample_a: f64,
    pub counterexample_r: f64,
    pub output: OutputConfig,
    /// Every key with its resolved value, in a fixed order.
    pub resolved: Vec<(String, String)>,
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw entries plus bookkeeping of which keys were read.
struct Table {
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

fn parse_table(text: &str) -> Result<Table, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line: line_no, reason: "unterminated section header".into() })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownKey(format!("[{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            reason: format!("expected 'key = value', got '{line}'"),
        })?;
        let sec = section
            .as_deref()
            .ok_or_else(|| ConfigError::Syntax { line: line_no, reason: "key outside of any section".into() })?;
        let key = format!("{sec}.{}", k.trim());
        if entries.contains_key(&key) {
            return Err(ConfigError::DuplicateKey(key));
        }
        entries.insert(key, Entry { value: v.trim().to_string(), line: line_no });
    }
    Ok(Table { entries, used: BTreeSet::new(), resolved: Vec::new() })
}

impl Table {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.get(key).map(|e| e.value.clone())
    }

    fn typed<T: FromStr>(&mut self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::TypeError {
                key: key.to_string(),
                expected: expected.into(),
                value: v,
            }),
        }
    }

    fn record(&mut self, key: &str, shown: String) {
        self.resolved.push((key.to_string(), shown));
    }

    fn required<T: FromStr + ToString>(&mut self, key: &str, expected: &'static str) -> Result<T, ConfigError> {
        let v = self.typed::<T>(key, expected)?.ok_or_else(|| ConfigError::MissingRequired(key.to_string()))?;
        self.record(key, v.to_string());
        Ok(v)
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.typed::<f64>(key, "a real number")?.unwrap_or(default);
        if !v.is_finite() {
            return Err(ConfigError::TypeError {
                key: key.into(),
                expected: "a finite real number".into(),
                value: v.to_string(),
            });
        }
        self.record(key, format!("{v:e}"));
        Ok(v)
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = self.typed::<usize>(key, "a nonnegative integer")?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let v = match self.raw(key) {
            None => default.to_vec(),
            Some(s) => s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| {
                ConfigError::TypeError { key: key.into(), expected: "a comma-separated list of reals".into(), value: s }
            })?,
        };
        let shown: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        self.record(key, shown.join(","));
        Ok(v)
    }

    fn choice<T: Copy>(&mut self, key: &str, default: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        let found = options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t);
        let expected = format!("one of {}", options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "));
        let t = found.ok_or(ConfigError::TypeError { key: key.into(), expected, value: v.clone() })?;
        self.record(key, v);
        Ok(t)
    }

    fn finish(&self) -> Result<(), ConfigError> {
        match self.entries.iter().filter(|(k, _)| !self.used.contains(*k)).min_by_key(|(_, e)| e.line) {
            Some((k, _)) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }
}

fn invalid(key: &str) -> impl Fn(BgkError) -> ConfigError + '_ {
    move |source| ConfigError::Invalid { key: key.to_string(), source }
}

fn velocity(t: &mut Table, key: &str, n: usize) -> Result<[f64; 2], ConfigError> {
    let v = t.list(key, &[0.0])?;
    if v.len() > n {
        return Err(ConfigError::TypeError {
            key: key.into(),
            expected: "at most n components".into(),
            value: format!("{v:?}"),
        });
    }
    let mut u = [0.0; 2];
    u[..v.len()].copy_from_slice(&v);
    Ok(u)
}

fn scenario(t: &mut Table, n: usize) -> Result<Scenario, ConfigError> {
    let name: String = t.required("scenario.name", "a scenario name")?;
    let s = match name.as_str() {
        "equilibrium" => Scenario::Equilibrium { rho: t.float("scenario.rho", 1.0)?, u: velocity(t, "scenario.u", n)? },
        "sine_wave" => Scenario::SineWave {
            rho_mean: t.float("scenario.rho_mean", 1.0)?,
            amplitude: t.float("scenario.amplitude", 0.1)?,
            velocity_amplitude: t.float("scenario.velocity_amplitude", 0.0)?,
        },
        "smoothed_step" => Scenario::SmoothedStep {
            rho_high: t.float("scenario.rho_high", 1.0)?,
            rho_low: t.float("scenario.rho_low", 0.125)?,
            width: t.float("scenario.width", 0.02)?,
        },
        "bump" => Scenario::Bump {
            rho_peak: t.float("scenario.rho_peak", 1.0)?,
            radius: t.float("scenario.radius", 0.5)?,
            u: velocity(t, "scenario.u", n)?,
        },
        "box_counterexample" => Scenario::BoxCounterexample {
            scale: t.float("scenario.scale", 1.0)?,
            v_radius: t.float("scenario.v_radius", 1.0)?,
            x_radius: t.float("scenario.x_radius", 0.2)?,
        },
        "custom" => {
            let path: String = t.required("scenario.path", "a checkpoint path")?;
            Scenario::Custom(PathBuf::from(path))
        }
        other => {
            return Err(ConfigError::TypeError {
                key: "scenario.name".into(),
                expected: "one of equilibrium, sine_wave, smoothed_step, bump, box_counterexample, custom".into(),
                value: other.into(),
            })
        }
    };
    Ok(s)
}

/// Parses configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut t = parse_table(text)?;

    let n: usize = t.required("model.n", "an integer")?;
    let gamma: Exponent = {
        let raw = t.raw("model.gamma").ok_or_else(|| ConfigError::MissingRequired("model.gamma".into()))?;
        raw.parse().map_err(|_| ConfigError::TypeError {
            key: "model.gamma".into(),
            expected: "a real number or a fraction p/q".into(),
            value: raw.clone(),
        })?
    };
    t.record("model.gamma", gamma.to_string());
    let kappa: f64 =
        t.typed("model.kappa", "a real number")?.ok_or_else(|| ConfigError::MissingRequired("model.kappa".into()))?;
    t.record("model.kappa", format!("{kappa:e}"));
    let tau: f64 =
        t.typed("model.tau", "a real number")?.ok_or_else(|| ConfigError::MissingRequired("model.tau".into()))?;
    t.record("model.tau", format!("{tau:e}"));
    let epsilon = t.float("model.epsilon", 0.0)?;
    let params = ModelParams::new(n, gamma, kappa, tau, epsilon).map_err(|e| {
        let key = match e {
            BgkError::GammaOutOfRange { .. } => "model.gamma",
            BgkError::UnsupportedDimension(_) => "model.n",
            BgkError::NonPositiveParameter { name: "kappa", .. } => "model.kappa",
            BgkError::NonPositiveParameter { name: "tau", .. } => "model.tau",
            _ => "model.epsilon",
        };
        invalid(key)(e)
    })?;
    if n > 2 {
        return Err(invalid("model.n")(BgkError::UnsupportedDimension(n)));
    }

    let grid = GridConfig {
        x_min: t.float("grid.x_min", 0.0)?,
        x_max: t.float("grid.x_max", 1.0)?,
        nx: t.count("grid.nx", 64)?,
        nv: t.count("grid.nv", 64)?,
        v_half_width: {
            let v = t.typed::<f64>("grid.v_half_width", "a real number")?;
            t.record("grid.v_half_width", v.map(|x| format!("{x:e}")).unwrap_or_else(|| "auto".into()));
            v
        },
        domain_mode: t.choice(
            "grid.domain_mode",
            "periodic",
            &[("periodic", DomainMode::Periodic), ("free_truncated", DomainMode::FreeTruncated)],
        )?,
    };

    let solver = SolverSettings {
        dt: t.float("solver.dt", 1e-3)?,
        t_end: t.float("solver.t_end", 0.1)?,
        interpolation: t.choice(
            "solver.interpolation",
            "linear",
            &[("linear", Interpolation::Linear), ("cubic_clamped", Interpolation::CubicClamped)],
        )?,
        mode: t.choice(
            "solver.mode",
            "direct_relaxation",
            &[("direct_relaxation", SolverMode::DirectRelaxation), ("picard_linearized", SolverMode::PicardLinearized)],
        )?,
        picard_tol: t.float("solver.picard_tol", 1e-10)?,
        picard_max_iters: t.count("solver.picard_max_iters", 50)?,
        checkpoint_every: t.count("solver.checkpoint_every", 0)?,
        store_every: t.count("solver.store_every", 1)?,
        ledger_constant: t.float("solver.ledger_constant", bgk_core::diagnostics::DEFAULT_LEDGER_CONSTANT)?,
        weak_constant: t.float("solver.weak_constant", 1.0)?,
        hydro_taus: t.list("solver.hydro_taus", &[0.1, 0.05, 0.025, 0.0125])?,
        hydro_horizon: t.float("solver.hydro_horizon", 0.1)?,
        hydro_nx_ref: t.count("solver.hydro_nx_ref", 0)?,
    };

    let scenario = scenario(&mut t, n)?;
    let counterexample_a = t.float("scenario.counterexample_a", 0.5)?;
    let counterexample_r = t.float("scenario.counterexample_r", 1.0)?;

    let output = OutputConfig {
        dir: {
            let d = t.raw("output.dir").unwrap_or_else(|| "bgk_out".into());
            t.record("output.dir", d.clone());
            PathBuf::from(d)
        },
        seed: {
            let s = t.typed::<u64>("output.seed", "a 64-bit unsigned integer")?.unwrap_or(0);
            t.record("output.seed", s.to_string());
            s
        },
        verify_cases: t.count("output.verify_cases", 50)?,
        verify_nv_1d: t.count("output.verify_nv_1d", 1024)?,
        verify_nv_2d: t.count("output.verify_nv_2d", 128)?,
        sweep_cases: t.count("output.sweep_cases", 100)?,
        sweep_nv: t.count("output.sweep_nv", if n == 1 { 2048 } else { 160 })?,
    };

    t.finish()?;
    Ok(RunConfig { params, grid, solver, scenario, counterexample_a, counterexample_r, output, resolved: t.resolved })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_config_str(&text)
}

impl RunConfig {
    /// `key = value` lines of the resolved configuration.
    pub fn resolved_text(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
