//! Python bindings for the BGK solver and its checks.

use std::path::PathBuf;
use std::sync::Arc;

use bgk_core::checkpoint::read_checkpoint;
use bgk_core::maxwellian::{counterexample_report, eval_maxwellian};
use bgk_core::scenario::Scenario;
use bgk_core::solver::{run_simulation, SolverConfig};
use bgk_core::stability::{ball_l1_distance as ball_distance, ball_stability_bound as ball_bound, BallMethod};
use bgk_core::verify::{run_suite, SuiteSettings};
use bgk_core::{
    lambda_constant, moments, DistributionField, DomainMode, Exponent, MaxwellianSpec, ModelParams, PhaseGrid,
};
use pyo3::conversion::FromPyObjectOwned;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(bgk, BgkError, PyValueError);

fn to_py(e: bgk_core::BgkError) -> PyErr {
    BgkError::new_err(e.to_string())
}

fn pair(v: &[f64], what: &str) -> PyResult<[f64; 2]> {
    match v {
        [a] => Ok([*a, 0.0]),
        [a, b] => Ok([*a, *b]),
        _ => Err(PyValueError::new_err(format!("{what} needs one or two components"))),
    }
}

#[derive(FromPyObject)]
enum GammaArg {
    Value(f64),
    Text(String),
}

/// Model constants for dimension `n`, adiabatic exponent `gamma`, pressure
/// coefficient `kappa`, relaxation time `tau` and regularization `epsilon`.
#[pyclass(name = "ModelParams", frozen)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (n, gamma, kappa, tau, epsilon = 0.0))]
    fn new(n: usize, gamma: GammaArg, kappa: f64, tau: f64, epsilon: f64) -> PyResult<Self> {
        let gamma: Exponent = match gamma {
            GammaArg::Value(g) => g.into(),
            GammaArg::Text(s) => s.parse().map_err(to_py)?,
        };
        Ok(Self { inner: ModelParams::new(n, gamma, kappa, tau, epsilon).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }
    #[getter]
    fn c1(&self) -> f64 {
        self.inner.c1()
    }
    #[getter]
    fn c2(&self) -> f64 {
        self.inner.c2()
    }
    #[getter]
    fn c3(&self) -> f64 {
        self.inner.c3()
    }
    /// `None` at the endpoint exponent.
    #[getter]
    fn c0(&self) -> Option<f64> {
        self.inner.c0()
    }
    #[getter]
    fn is_endpoint(&self) -> bool {
        self.inner.is_endpoint()
    }

    fn support_radius(&self, rho: f64) -> f64 {
        self.inner.support_radius(rho)
    }

    fn pressure(&self, rho: f64) -> f64 {
        self.inner.pressure(rho)
    }

    fn lambda_constant(&self) -> PyResult<f64> {
        lambda_constant(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n={}, gamma={}, kappa={}, tau={}, epsilon={})",
            p.n(),
            p.exponent(),
            p.kappa(),
            p.tau(),
            p.epsilon()
        )
    }
}

/// Local equilibrium with density `rho` and velocity `u`, evaluated at `v`.
#[pyfunction]
fn maxwellian(params: &PyParams, rho: f64, u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    let spec = MaxwellianSpec::new(rho, pair(&u, "u")?, &params.inner);
    Ok(eval_maxwellian(&spec, pair(&v, "v")?))
}

/// Measure of the symmetric difference of two balls of radius `r`.
#[pyfunction]
fn ball_l1_distance(r: f64, c_a: Vec<f64>, c_b: Vec<f64>, n: usize) -> PyResult<f64> {
    let d = ball_distance(r, pair(&c_a, "c_a")?, pair(&c_b, "c_b")?, n, BallMethod::Grid).map_err(to_py)?;
    Ok(d.value)
}

/// Upper bound for `ball_l1_distance`.
#[pyfunction]
fn ball_stability_bound(r: f64, c_a: Vec<f64>, c_b: Vec<f64>, n: usize) -> PyResult<f64> {
    Ok(ball_bound(r, pair(&c_a, "c_a")?, pair(&c_b, "c_b")?, n))
}

/// Closed-form moments of the box `a 1_{|v| <= r}` at the endpoint exponent.
#[pyfunction]
#[pyo3(signature = (params, a, r = 1.0))]
fn counterexample<'py>(py: Python<'py>, params: &PyParams, a: f64, r: f64) -> PyResult<Bound<'py, PyDict>> {
    let rep = counterexample_report(a, r, &params.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("rho", rep.rho)?;
    d.set_item("lhs", rep.lhs)?;
    d.set_item("rhs", rep.rhs)?;
    d.set_item("violated", rep.violated)?;
    Ok(d)
}

fn option<'py, T: FromPyObjectOwned<'py>>(opts: Option<&Bound<'py, PyDict>>, key: &str, default: T) -> PyResult<T> {
    match opts.map(|d| d.get_item(key)).transpose()?.flatten() {
        Some(v) => v.extract().map_err(Into::into),
        None => Ok(default),
    }
}

fn build_scenario(name: &str, opts: Option<&Bound<'_, PyDict>>) -> PyResult<Scenario> {
    let vel = |key: &str| -> PyResult<[f64; 2]> { pair(&option(opts, key, vec![0.0])?, key) };
    Ok(match name {
        "equilibrium" => Scenario::Equilibrium { rho: option(opts, "rho", 1.0)?, u: vel("u")? },
        "sine_wave" => Scenario::SineWave {
            rho_mean: option(opts, "rho_mean", 1.0)?,
            amplitude: option(opts, "amplitude", 0.1)?,
            velocity_amplitude: option(opts, "velocity_amplitude", 0.0)?,
        },
        "smoothed_step" => Scenario::SmoothedStep {
            rho_high: option(opts, "rho_high", 1.0)?,
            rho_low: option(opts, "rho_low", 0.125)?,
            width: option(opts, "width", 0.02)?,
        },
        "bump" => Scenario::Bump {
            rho_peak: option(opts, "rho_peak", 1.0)?,
            radius: option(opts, "radius", 0.5)?,
            u: vel("u")?,
        },
        "box_counterexample" => Scenario::BoxCounterexample {
            scale: option(opts, "scale", 1.0)?,
            v_radius: option(opts, "v_radius", 1.0)?,
            x_radius: option(opts, "x_radius", 0.2)?,
        },
        "custom" => Scenario::Custom(PathBuf::from(option::<String>(opts, "path", String::new())?)),
        other => return Err(PyValueError::new_err(format!("unknown scenario '{other}'"))),
    })
}

/// Runs a simulation from a named scenario and returns the ledger and the
/// final density. Scenario parameters are passed as keyword arguments; a
/// `custom` scenario reads `path` and keeps the grid stored there.
#[pyfunction]
#[pyo3(signature = (params, scenario, nx, nv, dt, t_end, x_min = 0.0, x_max = 1.0, v_half_width = None, periodic = true, **options))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyParams,
    scenario: &str,
    nx: usize,
    nv: usize,
    dt: f64,
    t_end: f64,
    x_min: f64,
    x_max: f64,
    v_half_width: Option<f64>,
    periodic: bool,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let sc = build_scenario(scenario, options)?;
    let mode = if periodic { DomainMode::Periodic } else { DomainMode::FreeTruncated };
    if let Scenario::Custom(path) = &sc {
        let (f0, _) = read_checkpoint(path).map_err(to_py)?;
        return run(py, &f0, dt, t_end, p);
    }
    let n = p.n();
    let half = match v_half_width {
        Some(w) => w,
        None => {
            let probe = PhaseGrid::uniform(n, (x_min, x_max), nx, (-1.0, 1.0), nv, mode).map_err(to_py)?;
            let reach = sc
                .velocity_reach(&probe, p)
                .ok_or_else(|| PyValueError::new_err("v_half_width is required for this scenario"))?;
            let shrink = 1.0 - 12.0 / nv as f64;
            if shrink <= 0.0 {
                return Err(PyValueError::new_err("nv is too small for the automatic velocity box"));
            }
            reach / shrink
        }
    };
    let grid = Arc::new(PhaseGrid::uniform(n, (x_min, x_max), nx, (-half, half), nv, mode).map_err(to_py)?);
    let f0 = sc.build(&grid, p).map_err(to_py)?;
    run(py, &f0, dt, t_end, p)
}

fn run<'py>(
    py: Python<'py>,
    f0: &DistributionField,
    dt: f64,
    t_end: f64,
    p: &ModelParams,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SolverConfig::new(dt, t_end);
    cfg.store_every = usize::MAX;
    let out = py.detach(|| run_simulation(f0, &cfg, p)).map_err(to_py)?;
    let rows = out.ledger.rows();
    let d = PyDict::new(py);
    d.set_item("t", rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
    d.set_item("mass", rows.iter().map(|r| r.mass).collect::<Vec<_>>())?;
    d.set_item("entropy", rows.iter().map(|r| r.entropy.to_f64()).collect::<Vec<_>>())?;
    d.set_item("dissipation", rows.iter().map(|r| r.base.cumulative).collect::<Vec<_>>())?;
    if let Some(last) = out.trajectory.last() {
        d.set_item("rho", moments(last).rho)?;
        d.set_item("min_value", last.min_value())?;
        d.set_item("max_value", last.max_value())?;
    }
    d.set_item("steps", out.steps)?;
    Ok(d)
}

type CheckTuple = (String, usize, String, f64, f64, bool);

/// Randomized verification suite; one `(family, case, quantity, measured,
/// bound, pass)` tuple per check.
#[pyfunction]
#[pyo3(signature = (params, seed = 0, cases = 10, nv_1d = 512, nv_2d = 48))]
fn verify(
    py: Python<'_>,
    params: &PyParams,
    seed: u64,
    cases: usize,
    nv_1d: usize,
    nv_2d: usize,
) -> PyResult<Vec<CheckTuple>> {
    let s = SuiteSettings { seed, cases, nv_1d, nv_2d };
    let rows = py.detach(|| run_suite(&params.inner, &s)).map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.family.to_string(), r.case_id, r.quantity.to_string(), r.measured, r.bound, r.pass))
        .collect())
}

#[pymodule]
fn bgk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BgkError", m.py().get_type::<BgkError>())?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(maxwellian, m)?)?;
    m.add_function(wrap_pyfunction!(ball_l1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(ball_stability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
