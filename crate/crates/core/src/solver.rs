//! Time stepping of the relaxation model in mild form.
//!
//! Each step relaxes toward the equilibrium with exact exponential weights
//! and then transports along free characteristics. The Picard recursion of
//! the existence argument is available both as an inner fixed point of the
//! implicit step and as a standalone verification run.

mod transport;

pub use transport::{free_transport, Interpolation, Transported};

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{write_checkpoint, CHECKPOINT_EXTENSION};
use crate::diagnostics::{ledger_update, EntropyLedger};
use crate::equilibrium::{equilibrium_field, EquilibriumKind};
use crate::error::{BgkError, Result};
use crate::maxwellian::cell_entropy;
use crate::params::{fmt_f64, ModelParams};
use crate::phase_space::{weighted_l1_distance, DistributionField, DomainMode};
use crate::summation::pairwise_sum;

/// Relative cell-mass threshold below which a cell counts as empty in the
/// support check.
const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Time quadrature of the relaxation integral over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Equilibrium frozen at the start of the step.
    DirectRelaxation,
    /// Exponential trapezoid rule, implicit in the end-of-step equilibrium,
    /// solved by fixed-point iteration.
    PicardLinearized,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::DirectRelaxation => "direct_relaxation",
            SolverMode::PicardLinearized => "picard_linearized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub interpolation: Interpolation,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub mode: SolverMode,
    /// Write a checkpoint every this many steps; zero disables checkpoints.
    pub checkpoint_every: usize,
    /// Keep a trajectory frame every this many steps (the last step is always kept).
    pub store_every: usize,
    pub equilibrium: EquilibriumKind,
    pub checkpoint_dir: Option<PathBuf>,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            interpolation: Interpolation::Linear,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            mode: SolverMode::DirectRelaxation,
            checkpoint_every: 0,
            store_every: 1,
            equilibrium: EquilibriumKind::Conservative,
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(BgkError::NonPositiveParameter { name: "dt", value: self.dt });
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(BgkError::NonPositiveParameter { name: "t_end", value: self.t_end });
        }
        if !(self.picard_tol > 0.0) {
            return Err(BgkError::NonPositiveParameter { name: "picard_tol", value: self.picard_tol });
        }
        if self.picard_max_iters == 0 || self.store_every == 0 {
            return Err(BgkError::InvalidArgument("picard_max_iters and store_every must be positive".into()));
        }
        if self.dt > params.tau() * (1.0 + 1e-12) {
            return Err(BgkError::StepTooLarge { dt: self.dt, tau: params.tau() });
        }
        Ok(())
    }

    /// Number of steps reaching `horizon` with a step no larger than `dt`.
    pub fn steps_to(&self, horizon: f64) -> usize {
        ((horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Uniform step that lands exactly on `horizon`.
    pub fn effective_dt(&self, horizon: f64) -> f64 {
        horizon / self.steps_to(horizon) as f64
    }
}

/// Stored snapshots of a run, in increasing time.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    frames: Vec<DistributionField>,
}

impl Trajectory {
    pub fn new(frames: Vec<DistributionField>) -> Result<Self> {
        for w in frames.windows(2) {
            if !(w[1].time() > w[0].time()) {
                return Err(BgkError::NonMonotoneTime { time: w[1].time(), last: w[0].time() });
            }
            if !w[0].same_grid(&w[1]) {
                return Err(BgkError::GridMismatch);
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[DistributionField] {
        &self.frames
    }

    pub fn end_time(&self) -> f64 {
        self.frames.last().map_or(f64::NEG_INFINITY, |f| f.time())
    }

    pub fn last(&self) -> Option<&DistributionField> {
        self.frames.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time()).collect()
    }

    fn push(&mut self, f: DistributionField) {
        self.frames.push(f);
    }
}

fn clamp_to_c2(values: &mut [f64], params: &ModelParams) {
    if params.is_endpoint() {
        let c2 = params.c2();
        for x in values.iter_mut() {
            *x = x.min(c2);
        }
    }
}

/// Convex combination `sum_i w_i g_i`, cellwise.
fn combine(parts: &[(f64, &DistributionField)]) -> DistributionField {
    let (_, first) = parts[0];
    let mut out = first.clone();
    let dst = out.values_mut();
    for (i, x) in dst.iter_mut().enumerate() {
        *x = parts.iter().map(|(w, g)| w * g.values()[i]).sum();
    }
    out
}

/// Errors when the occupied region plus one step of transport leaves the
/// spatial box in free-space mode.
fn check_support(f: &DistributionField, dt: f64) -> Result<()> {
    let grid = f.grid();
    if grid.mode() != DomainMode::FreeTruncated {
        return Err(BgkError::ModeMismatch { expected: "free_truncated" });
    }
    let nvt = grid.nv_total();
    let masses: Vec<f64> = (0..grid.num_cells()).map(|c| pairwise_sum(nvt, |j| f.cell(c)[j])).collect();
    let peak = masses.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(());
    }
    for k in 0..grid.n() {
        let speed = grid.v_min()[k].abs().max(grid.v_max()[k].abs());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (c, &m) in masses.iter().enumerate() {
            if m > SUPPORT_THRESHOLD * peak {
                let x = grid.cell_center(c)[k];
                lo = lo.min(x - 0.5 * grid.dx()[k]);
                hi = hi.max(x + 0.5 * grid.dx()[k]);
            }
        }
        let (a, b) = (grid.x_min()[k], grid.x_max()[k]);
        let slack = 1e-12 * (b - a);
        if lo - speed * dt < a - slack || hi + speed * dt > b + slack {
            let reach = (a - (lo - speed * dt)).max((hi + speed * dt) - b);
            return Err(BgkError::CflViolation { time: f.time(), reach, limit: 0.5 * (b - a) + reach });
        }
    }
    Ok(())
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: DistributionField,
    pub clipped_mass: f64,
    pub inner_iterations: usize,
}

fn relax_then_transport(
    f: &DistributionField,
    eq: &DistributionField,
    keep: f64,
    weight: f64,
    dt: f64,
    cfg: &SolverConfig,
    params: &ModelParams,
) -> Transported {
    let mut g = combine(&[(keep, f), (weight, eq)]);
    clamp_to_c2(g.values_mut(), params);
    let mut out = free_transport(&g, dt, cfg.interpolation);
    clamp_to_c2(out.field.values_mut(), params);
    out
}

/// One step of length `dt`, reporting clipped mass and inner iterations.
pub fn mild_step_with(f: &DistributionField, dt: f64, cfg: &SolverConfig, params: &ModelParams) -> Result<StepOutcome> {
    if f.grid().mode() == DomainMode::FreeTruncated {
        check_support(f, dt)?;
    }
    let h = dt / params.tau();
    let keep = (-h).exp();
    let relax = -(-h).exp_m1();
    let eq = equilibrium_field(f, params, cfg.equilibrium)?;
    let t_new = f.time() + dt;
    match cfg.mode {
        SolverMode::DirectRelaxation => {
            let mut out = relax_then_transport(f, &eq, keep, relax, dt, cfg, params);
            out.field.set_time(t_new);
            Ok(StepOutcome { field: out.field, clipped_mass: out.clipped_mass, inner_iterations: 0 })
        }
        SolverMode::PicardLinearized => {
            // Weights of the exponential trapezoid rule on [t, t + dt].
            let late = if h > 1e-4 { 1.0 - relax / h } else { h / 2.0 - h * h / 6.0 + h * h * h / 24.0 };
            let early = relax - late;
            let base = relax_then_transport(f, &eq, keep, early, dt, cfg, params);
            let start = relax_then_transport(f, &eq, keep, relax, dt, cfg, params);
            let mut current = start.field;
            let mut last = f64::INFINITY;
            let mut rises = 0;
            for it in 1..=cfg.picard_max_iters {
                let eq_new = equilibrium_field(&current, params, cfg.equilibrium)?;
                let mut next = combine(&[(1.0, &base.field), (late, &eq_new)]);
                clamp_to_c2(next.values_mut(), params);
                let dist = weighted_l1_distance(&next, &current)?;
                current = next;
                if dist < cfg.picard_tol {
                    current.set_time(t_new);
                    return Ok(StepOutcome { field: current, clipped_mass: base.clipped_mass, inner_iterations: it });
                }
                rises = if dist > last { rises + 1 } else { 0 };
                if rises >= 3 {
                    return Err(BgkError::PicardDivergence { last: dist });
                }
                last = dist;
            }
            current.set_time(t_new);
            Ok(StepOutcome { field: current, clipped_mass: base.clipped_mass, inner_iterations: cfg.picard_max_iters })
        }
    }
}

/// One step of length `cfg.dt`.
pub fn mild_step(f: &DistributionField, cfg: &SolverConfig, params: &ModelParams) -> Result<DistributionField> {
    mild_step_with(f, cfg.dt, cfg, params).map(|s| s.field)
}

/// Summary of admissibility checks on initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataReport {
    pub min_value: f64,
    pub max_value: f64,
    pub mass: f64,
    /// `int (1 + |v|^2) f`.
    pub weighted_mass: f64,
    /// `||f||_{1 + 2/d}` when `d > 0`.
    pub lp_norm: Option<f64>,
    /// Total entropy, always finite once the checks pass.
    pub entropy: f64,
}

pub fn validate_initial_data(f0: &DistributionField, params: &ModelParams) -> Result<InitialDataReport> {
    if let Some((index, &value)) = f0.values().iter().enumerate().find(|(_, x)| !(**x >= 0.0) || !x.is_finite()) {
        if value.is_finite() || value.is_nan() {
            return Err(BgkError::NegativeInitialData { index, value });
        }
        return Err(BgkError::InvalidArgument(format!("non-finite value at index {index}")));
    }
    let max_value = f0.max_value();
    if params.is_endpoint() && max_value > params.c2() * (1.0 + 1e-12) {
        return Err(BgkError::EndpointBoundViolated { value: max_value, c2: params.c2() });
    }
    let grid = f0.grid();
    let vol = grid.cell_volume() * grid.velocity_volume();
    let values = f0.values();
    let lp_norm = (params.d() > 0.0).then(|| {
        let p = 1.0 + 2.0 / params.d();
        (pairwise_sum(values.len(), |i| values[i].powf(p)) * vol).powf(1.0 / p)
    });
    let mass = f0.total_mass();
    let entropies: Vec<f64> = (0..grid.num_cells()).map(|c| cell_entropy(grid, f0.cell(c), params).to_f64()).collect();
    Ok(InitialDataReport {
        min_value: f0.min_value(),
        max_value,
        mass,
        weighted_mass: mass + f0.weighted_mass(),
        lp_norm,
        entropy: pairwise_sum(entropies.len(), |c| entropies[c]) * grid.cell_volume(),
    })
}

/// One written checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub step: usize,
    pub time: f64,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub ledger: EntropyLedger,
    pub manifest: Vec<ManifestEntry>,
    pub clipped_mass: f64,
    pub dt: f64,
    pub steps: usize,
    pub max_inner_iterations: usize,
}

fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step:08}.{CHECKPOINT_EXTENSION}"))
}

/// Manifest CSV listing every checkpoint.
pub fn manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("step,time,path\n");
    for e in entries {
        s.push_str(&format!("{},{},{}\n", e.step, fmt_f64(e.time), e.path.display()));
    }
    s
}

/// Advances `f0` to `cfg.t_end`, updating the ledger after every step.
pub fn run_simulation(f0: &DistributionField, cfg: &SolverConfig, params: &ModelParams) -> Result<SimulationOutput> {
    cfg.validate(params)?;
    validate_initial_data(f0, params)?;
    let steps = cfg.steps_to(cfg.t_end);
    let dt = cfg.t_end / steps as f64;
    let mut ledger = EntropyLedger::new(params);
    let mut trajectory = Trajectory::default();
    let mut manifest = Vec::new();
    let t0 = f0.time();
    let mut f = f0.clone();
    ledger_update(&mut ledger, &f, params)?;
    trajectory.push(f.clone());
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| BgkError::Checkpoint(format!("{}: {e}", dir.display())))?;
    }
    let checkpoint = |step: usize, f: &DistributionField, manifest: &mut Vec<ManifestEntry>| -> Result<()> {
        if let (Some(dir), true) = (&cfg.checkpoint_dir, cfg.checkpoint_every > 0) {
            if step.is_multiple_of(cfg.checkpoint_every) || step == steps {
                let path = checkpoint_path(dir, step);
                write_checkpoint(&path, f, params)?;
                manifest.push(ManifestEntry { step, time: f.time(), path });
            }
        }
        Ok(())
    };
    checkpoint(0, &f, &mut manifest)?;
    let mut clipped_mass = 0.0;
    let mut max_inner = 0;
    for step in 1..=steps {
        let out = mild_step_with(&f, dt, cfg, params)?;
        f = out.field;
        f.set_time(t0 + step as f64 * dt);
        clipped_mass += out.clipped_mass;
        max_inner = max_inner.max(out.inner_iterations);
        ledger_update(&mut ledger, &f, params)?;
        if step.is_multiple_of(cfg.store_every) || step == steps {
            trajectory.push(f.clone());
        }
        checkpoint(step, &f, &mut manifest)?;
    }
    if let (Some(dir), false) = (&cfg.checkpoint_dir, manifest.is_empty()) {
        fs::write(dir.join("manifest.csv"), manifest_csv(&manifest))
            .map_err(|e| BgkError::Checkpoint(format!("{}: {e}", dir.display())))?;
    }
    Ok(SimulationOutput { trajectory, ledger, manifest, clipped_mass, dt, steps, max_inner_iterations: max_inner })
}

/// Iterates and distances of the Picard recursion.
#[derive(Debug, Clone)]
pub struct PicardRun {
    /// `f_0, f_1, ...` on the shared time grid; `f_0` is constant in time.
    pub iterates: Vec<Trajectory>,
    /// `sup_t |f_{k+1} - f_k|` in the weighted L1 norm.
    pub distances: Vec<f64>,
    pub converged: bool,
}

impl PicardRun {
    /// Successive ratios of the distance sequence.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }
}

/// Runs `f_{k+1} = e^{-t/tau} T_t f0 + int e^{(s-t)/tau} T_{t-s} M[f_k](s) ds`
/// on a shared grid of `[0, horizon]`, with the left-endpoint rule on each
/// step.
pub fn picard_sequence(
    f0: &DistributionField,
    cfg: &SolverConfig,
    params: &ModelParams,
    horizon: f64,
) -> Result<PicardRun> {
    cfg.validate(params)?;
    if !(horizon > 0.0) || horizon > cfg.t_end * (1.0 + 1e-12) {
        return Err(BgkError::InvalidArgument(format!("horizon {horizon} must lie in (0, t_end]")));
    }
    validate_initial_data(f0, params)?;
    let steps = cfg.steps_to(horizon);
    let dt = horizon / steps as f64;
    let h = dt / params.tau();
    let (keep, relax) = ((-h).exp(), -(-h).exp_m1());
    let t0 = f0.time();
    let constant: Vec<DistributionField> = (0..=steps)
        .map(|m| {
            let mut g = f0.clone();
            g.set_time(t0 + m as f64 * dt);
            g
        })
        .collect();
    let mut iterates = vec![Trajectory::new(constant)?];
    let mut distances: Vec<f64> = Vec::new();
    let mut rises = 0;
    let mut converged = false;
    for _ in 0..cfg.picard_max_iters {
        let prev = iterates.last().expect("non-empty").frames();
        let mut frames = Vec::with_capacity(steps + 1);
        frames.push(constant_frame(f0, t0));
        let mut dist: f64 = 0.0;
        for m in 0..steps {
            let eq = equilibrium_field(&prev[m], params, cfg.equilibrium)?;
            let out = relax_then_transport(&frames[m], &eq, keep, relax, dt, cfg, params);
            let mut next = out.field;
            next.set_time(t0 + (m + 1) as f64 * dt);
            dist = dist.max(weighted_l1_distance(&next, &prev[m + 1])?);
            frames.push(next);
        }
        if let Some(&last) = distances.last() {
            rises = if dist > last { rises + 1 } else { 0 };
        }
        distances.push(dist);
        iterates.push(Trajectory::new(frames)?);
        if dist < cfg.picard_tol {
            converged = true;
            break;
        }
        if rises >= 3 {
            return Err(BgkError::PicardDivergence { last: dist });
        }
    }
    Ok(PicardRun { iterates, distances, converged })
}

fn constant_frame(f0: &DistributionField, t: f64) -> DistributionField {
    let mut g = f0.clone();
    g.set_time(t);
    g
}
