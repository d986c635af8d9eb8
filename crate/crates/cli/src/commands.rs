//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use bgk_core::checkpoint::read_checkpoint;
use bgk_core::diagnostics::{tol_ledger, weak_form_residual, TestFunction};
use bgk_core::hydro::{convergence_order_fit, tau_sweep, SweepSettings};
use bgk_core::maxwellian::{counterexample_quadrature, counterexample_report, CounterexampleReport};
use bgk_core::params::fmt_f64;
use bgk_core::scenario::Scenario;
use bgk_core::solver::{manifest_csv, run_simulation, validate_initial_data, SimulationOutput, SolverConfig};
use bgk_core::verify::{ball_sweep, checks_csv, family_summary, maxwellian_sweep, run_suite, sweep_csv, SuiteSettings};
use bgk_core::{BgkError, DistributionField, DomainMode, PhaseGrid};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{failures_csv, table, Failure, OutputDir};

/// Velocity cells kept empty on each side of the automatic box.
pub const MARGIN_CELLS: f64 = 6.0;
/// Smallest fitted order of the fluid-limit functional accepted by `hydro-limit`.
pub const HYDRO_MIN_ORDER: f64 = 0.4;
/// Relative agreement required between closed form and quadrature.
pub const COUNTEREXAMPLE_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] BgkError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) | CommandError::Config(_) => 2,
            CommandError::Model(_) | CommandError::Io(_) => 1,
        }
    }
}

/// Checks that failed; empty on success.
pub type Failures = Vec<Failure>;

fn grid_for(cfg: &RunConfig) -> Result<Arc<PhaseGrid>, CommandError> {
    let g = &cfg.grid;
    let n = cfg.params.n();
    let half = match g.v_half_width {
        Some(w) => w,
        None => {
            let probe = PhaseGrid::uniform(n, (g.x_min, g.x_max), g.nx, (-1.0, 1.0), g.nv, g.domain_mode)?;
            let reach = cfg
                .scenario
                .velocity_reach(&probe, &cfg.params)
                .ok_or_else(|| CommandError::Usage("grid.v_half_width is required for this scenario".into()))?;
            let shrink = 1.0 - 2.0 * MARGIN_CELLS / g.nv as f64;
            if shrink <= 0.0 {
                return Err(CommandError::Usage(format!("grid.nv = {} leaves no room inside the margin", g.nv)));
            }
            reach / shrink
        }
    };
    Ok(Arc::new(PhaseGrid::uniform(n, (g.x_min, g.x_max), g.nx, (-half, half), g.nv, g.domain_mode)?))
}

fn initial_field(cfg: &RunConfig) -> Result<DistributionField, CommandError> {
    if let Scenario::Custom(path) = &cfg.scenario {
        let (f, _) = read_checkpoint(path)?;
        return Ok(f);
    }
    let grid = grid_for(cfg)?;
    Ok(cfg.scenario.build(&grid, &cfg.params)?)
}

fn solver_config(cfg: &RunConfig, checkpoint_dir: Option<&Path>) -> SolverConfig {
    let s = &cfg.solver;
    let mut sc = SolverConfig::new(s.dt, s.t_end);
    sc.interpolation = s.interpolation;
    sc.mode = s.mode;
    sc.picard_tol = s.picard_tol;
    sc.picard_max_iters = s.picard_max_iters;
    sc.checkpoint_every = s.checkpoint_every;
    sc.store_every = s.store_every.max(1);
    if s.checkpoint_every > 0 {
        sc.checkpoint_dir = checkpoint_dir.map(|d| d.join("checkpoints"));
    }
    sc
}

fn simulate_core(cfg: &RunConfig, out: &OutputDir) -> Result<(DistributionField, SimulationOutput), CommandError> {
    let f0 = initial_field(cfg)?;
    validate_initial_data(&f0, &cfg.params)?;
    let sc = solver_config(cfg, Some(&out.dir));
    let result = run_simulation(&f0, &sc, &cfg.params)?;
    Ok((f0, result))
}

pub fn simulate(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    let (f0, sim) = simulate_core(cfg, out)?;
    let columns = sim.ledger.csv_columns();
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    out.write_csv("ledger.csv", &table(&cols, &sim.ledger.csv_rows()))?;
    if !sim.manifest.is_empty() {
        out.write_csv("manifest.csv", &manifest_csv(&sim.manifest))?;
    }
    let tol = tol_ledger(cfg.solver.ledger_constant, sim.dt, f0.grid(), cfg.solver.t_end);
    let violations = sim.ledger.violations(tol);
    let (dm, dp) = sim.ledger.conservation_drift();
    let min = sim.trajectory.frames().iter().map(|f| f.min_value()).fold(f64::INFINITY, f64::min);
    let max = sim.trajectory.frames().iter().map(|f| f.max_value()).fold(0.0, f64::max);
    let summary = [
        ("steps", sim.steps.to_string()),
        ("dt", fmt_f64(sim.dt)),
        ("mass_drift", fmt_f64(dm)),
        ("momentum_drift", fmt_f64(dp)),
        ("max_budget_residual", sim.ledger.max_residual().to_string()),
        ("tol_ledger", fmt_f64(tol)),
        ("ledger_violations", violations.len().to_string()),
        ("clipped_mass", fmt_f64(sim.clipped_mass)),
        ("min_value", fmt_f64(min)),
        ("max_value", fmt_f64(max)),
        ("max_inner_iterations", sim.max_inner_iterations.to_string()),
    ];
    let rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    out.write_csv("summary.csv", &table(&["quantity", "value"], &rows))?;
    println!("simulate: {} steps, mass drift {dm:e}, max budget residual {}", sim.steps, sim.ledger.max_residual());

    let mut failures = Vec::new();
    for &i in &violations {
        let r = &sim.ledger.rows()[i];
        failures.push(Failure::new(
            "ledger",
            format!("t={} residual {} > {}", fmt_f64(r.t), r.base.residual, fmt_f64(tol)),
        ));
    }
    if min < 0.0 {
        failures.push(Failure::new("positivity", format!("min value {}", fmt_f64(min))));
    }
    if cfg.params.is_endpoint() && max > cfg.params.c2() {
        failures.push(Failure::new(
            "endpoint_bound",
            format!("max value {} > c2 {}", fmt_f64(max), fmt_f64(cfg.params.c2())),
        ));
    }
    Ok(failures)
}

pub fn verify(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    let o = &cfg.output;
    let settings = SuiteSettings { seed: o.seed, cases: o.verify_cases, nv_1d: o.verify_nv_1d, nv_2d: o.verify_nv_2d };
    let rows = run_suite(&cfg.params, &settings)?;
    out.write_csv("verify.csv", &checks_csv(&rows))?;
    for (family, ok, total) in family_summary(&rows) {
        println!("{family:<16} {ok:>6}/{total:<6} {}", if ok == total { "pass" } else { "FAIL" });
    }
    Ok(rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| {
            Failure::new(
                format!("{}.{}", r.family, r.quantity),
                format!("case {}: measured {} bound {}", r.case_id, fmt_f64(r.measured), fmt_f64(r.bound)),
            )
        })
        .collect())
}

pub fn stability_sweep(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    let o = &cfg.output;
    let mut rows = ball_sweep(cfg.params.n(), o.seed, o.sweep_cases)?;
    rows.extend(maxwellian_sweep(&cfg.params, o.seed, o.sweep_cases, o.sweep_nv)?);
    out.write_csv("stability.csv", &sweep_csv(&rows))?;
    let mut failures = Vec::new();
    for sweep in ["ball", "maxwellian_theta", "maxwellian_weighted"] {
        let part: Vec<_> = rows.iter().filter(|r| r.sweep == sweep).collect();
        let worst = part.iter().map(|r| r.report.ratio).fold(0.0, f64::max);
        let ok = part.iter().filter(|r| r.report.satisfied).count();
        println!("{sweep:<20} {ok:>5}/{:<5} max ratio {worst:.4}", part.len());
        for r in part.iter().filter(|r| !r.report.satisfied) {
            failures.push(Failure::new(
                sweep,
                format!("case {}: lhs {} rhs {}", r.case_id, fmt_f64(r.report.lhs), fmt_f64(r.report.rhs)),
            ));
        }
    }
    Ok(failures)
}

fn report_row(method: &str, r: &CounterexampleReport) -> Vec<String> {
    vec![method.to_string(), fmt_f64(r.rho), fmt_f64(r.lhs), fmt_f64(r.rhs), r.violated.to_string()]
}

pub fn counterexample(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    let p = &cfg.params;
    let (a, r) = (cfg.counterexample_a, cfg.counterexample_r);
    if !p.is_endpoint() {
        return Err(CommandError::Usage(format!(
            "counterexample needs the endpoint exponent gamma = (n+2)/n, got gamma = {}",
            p.gamma()
        )));
    }
    let exact = counterexample_report(a, r, p).map_err(|e| match e {
        BgkError::NotAboveC2 { .. } | BgkError::NonPositiveParameter { .. } => {
            CommandError::Usage(format!("scenario.counterexample_a: {e}; the counterexample requires a > c2"))
        }
        other => other.into(),
    })?;
    let nv = if p.n() == 1 { 30001 } else { 1501 };
    let grid = PhaseGrid::velocity_only(p.n(), (-1.5 * r, 1.5 * r), nv)?;
    let quad = counterexample_quadrature(a, r, p, &grid)?;
    let rows = vec![report_row("closed_form", &exact), report_row("quadrature", &quad)];
    out.write_csv("counterexample.csv", &table(&["method", "rho", "lhs", "rhs", "violated"], &rows))?;
    println!("{:<12} {:>14} {:>14} {:>14} {:>9}", "method", "rho", "lhs", "rhs", "violated");
    for (m, rep) in [("closed_form", &exact), ("quadrature", &quad)] {
        println!("{m:<12} {:>14.8} {:>14.8} {:>14.8} {:>9}", rep.rho, rep.lhs, rep.rhs, rep.violated);
    }
    let mut failures = Vec::new();
    for (what, e, q) in [("lhs", exact.lhs, quad.lhs), ("rhs", exact.rhs, quad.rhs)] {
        if (e - q).abs() > COUNTEREXAMPLE_TOL * e.abs().max(1.0) {
            failures.push(Failure::new(
                format!("quadrature_{what}"),
                format!("closed {} quadrature {}", fmt_f64(e), fmt_f64(q)),
            ));
        }
    }
    if exact.violated != quad.violated {
        failures.push(Failure::new("violated", "closed form and quadrature disagree"));
    }
    Ok(failures)
}

pub fn hydro_limit(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    if cfg.params.n() != 1 || cfg.grid.domain_mode != DomainMode::Periodic {
        return Err(CommandError::Usage("hydro-limit needs n = 1 on a periodic grid".into()));
    }
    let grid = grid_for(cfg)?;
    let scenario = &cfg.scenario;
    if scenario.state_at([grid.x_min()[0], 0.0], &grid).is_none() {
        return Err(CommandError::Usage(format!("hydro-limit needs a profile scenario, got {}", scenario.name())));
    }
    let state = |x: f64| scenario.state_at([x, 0.0], &grid).expect("profile scenario");
    let s = &cfg.solver;
    let mut taus = s.hydro_taus.clone();
    taus.sort_by(|a, b| b.total_cmp(a));
    let nx_ref = if s.hydro_nx_ref == 0 { 4 * cfg.grid.nx } else { s.hydro_nx_ref };
    let settings = SweepSettings { horizon: s.hydro_horizon, nx_ref, interpolation: s.interpolation };
    let res = tau_sweep(|x| state(x).0, |x| state(x).1[0], &taus, settings, &grid, &cfg.params)?;
    let fit_j = convergence_order_fit(&res.iter().map(|r| (r.tau, r.j)).collect::<Vec<_>>())?;
    let fit_rho = convergence_order_fit(&res.iter().map(|r| (r.tau, r.l1_err_rho)).collect::<Vec<_>>())?;
    let rows: Vec<Vec<String>> = res
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.tau),
                fmt_f64(r.j),
                fmt_f64(fit_j.predict(r.tau)),
                fmt_f64(r.l1_err_rho),
                fmt_f64(r.l1_err_momentum),
                r.steps.to_string(),
                format!("{:.3}", r.runtime_s),
            ]
        })
        .collect();
    let mut body = table(&["tau", "j", "j_fit", "l1_err_rho", "l1_err_momentum", "steps", "runtime_s"], &rows);
    body.push_str(&format!(
        "# summary: order_j = {}, r_squared_j = {}, order_l1_err_rho = {}, r_squared_l1_err_rho = {}\n",
        fmt_f64(fit_j.order),
        fmt_f64(fit_j.r_squared),
        fmt_f64(fit_rho.order),
        fmt_f64(fit_rho.r_squared)
    ));
    out.write_csv("hydro.csv", &body)?;
    println!(
        "hydro-limit: J order {:.3} (r2 {:.3}), rho error order {:.3}",
        fit_j.order, fit_j.r_squared, fit_rho.order
    );

    let mut failures = Vec::new();
    if !(fit_j.order >= HYDRO_MIN_ORDER) {
        failures.push(Failure::new("order_j", format!("{} < {HYDRO_MIN_ORDER}", fmt_f64(fit_j.order))));
    }
    for w in res.windows(2) {
        if !(w[1].l1_err_rho < w[0].l1_err_rho) {
            failures.push(Failure::new(
                "l1_err_rho_monotone",
                format!(
                    "tau {} -> {}: {} -> {}",
                    fmt_f64(w[0].tau),
                    fmt_f64(w[1].tau),
                    fmt_f64(w[0].l1_err_rho),
                    fmt_f64(w[1].l1_err_rho)
                ),
            ));
        }
    }
    Ok(failures)
}

pub fn weakform(cfg: &RunConfig, out: &OutputDir) -> Result<Failures, CommandError> {
    let (f0, sim) = simulate_core(cfg, out)?;
    let grid = f0.grid();
    let dx = grid.dx().iter().copied().fold(0.0, f64::max);
    let bound = cfg.solver.weak_constant * (sim.dt + dx);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for phi in TestFunction::library(grid, sim.trajectory.end_time()) {
        let r = weak_form_residual(&sim.trajectory, &phi, &cfg.params)?;
        let pass = r.normalized <= bound;
        println!(
            "{:<6} residual {:>12.4e} normalized {:>10.4e} bound {:>10.4e} {}",
            phi.id,
            r.residual,
            r.normalized,
            bound,
            if pass { "pass" } else { "FAIL" }
        );
        if !pass {
            failures.push(Failure::new(
                phi.id.clone(),
                format!("normalized {} > {}", fmt_f64(r.normalized), fmt_f64(bound)),
            ));
        }
        rows.push(vec![
            phi.id.clone(),
            fmt_f64(r.residual),
            fmt_f64(r.terms[0]),
            fmt_f64(r.terms[1]),
            fmt_f64(r.terms[2]),
            fmt_f64(r.max_term),
            fmt_f64(r.normalized),
            fmt_f64(bound),
            pass.to_string(),
        ]);
    }
    let cols = [
        "id",
        "residual",
        "initial_term",
        "transport_term",
        "relaxation_term",
        "max_term",
        "normalized",
        "bound",
        "pass",
    ];
    out.write_csv("weakform.csv", &table(&cols, &rows))?;
    Ok(failures)
}

/// Writes `failures.csv` when there is anything to report.
pub fn record_failures(out: &OutputDir, failures: &[Failure]) -> std::io::Result<()> {
    if !failures.is_empty() {
        out.write_csv("failures.csv", &failures_csv(failures))?;
    }
    Ok(())
}
