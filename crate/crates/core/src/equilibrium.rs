//! Discrete equilibria that share the exact grid moments of a state.
//!
//! The sampled Maxwellian `M[rho, u]` has grid mass and momentum that differ
//! from `(rho, rho u)` by the quadrature error. The relaxation step instead
//! uses a member of the same profile family, `M[rho', u']`, whose parameters
//! are tuned so that its grid moments equal the targets to rounding. Because
//! the minimizer of `sum_v H(g, v)` under fixed grid moments has exactly this
//! form, the result is also the discrete entropy minimizer.
//!
//! At the endpoint the indicator has a staircase mass, so its edge is
//! replaced by a linear ramp one velocity cell wide. Supports narrower than
//! two velocity cells fall back to depositing the mass on the nearest nodes.

use rayon::prelude::*;

use crate::error::Result;
use crate::maxwellian::{fill_maxwellian, profile_value};
use crate::params::ModelParams;
use crate::phase_space::{moments, norm, regularized_moments, DistributionField, PhaseGrid};
use crate::summation::pairwise_sum;

const FIXED_POINT_STEPS: usize = 12;
const SECANT_STEPS: usize = 8;
const MAX_SWEEPS: usize = 12;
const MAX_INNER: usize = 80;
const REL_TOL: f64 = 4.0 * f64::EPSILON;

/// Which discrete equilibrium stands in for `M[f]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    /// Moment-matched profile from [`discrete_maxwellian`].
    Conservative,
    /// `M[rho, u]` sampled at the velocity nodes.
    Sampled,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumKind::Conservative => "conservative",
            EquilibriumKind::Sampled => "sampled",
        }
    }
}

/// Equilibrium of every cell of `f`, at the regularized moments when
/// `params.epsilon() > 0`.
pub fn equilibrium_field(
    f: &DistributionField,
    params: &ModelParams,
    kind: EquilibriumKind,
) -> Result<DistributionField> {
    let grid = f.grid();
    let mut mac = moments(f);
    let regularized = params.epsilon() > 0.0;
    if regularized {
        mac = regularized_moments(&mac, params.epsilon())?;
    }
    let nvt = grid.nv_total();
    let mut values = vec![0.0; grid.len()];
    values.par_chunks_mut(nvt).enumerate().for_each(|(c, chunk)| {
        let (rho, u) = mac.equilibrium_args(c, regularized).expect("moments present");
        match kind {
            EquilibriumKind::Conservative => {
                let m = if regularized { [rho * u[0], rho * u[1]] } else { mac.momentum[c] };
                discrete_maxwellian(grid, params, rho, m, chunk);
            }
            EquilibriumKind::Sampled => fill_maxwellian(grid, params, rho, u, chunk),
        }
    });
    let mut out = DistributionField::from_values(f.grid_arc().clone(), values, f.time())?;
    out.set_time(f.time());
    Ok(out)
}

/// How the equilibrium of one cell was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumFit {
    pub rho_param: f64,
    pub u_param: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
    pub deposited: bool,
}

impl EquilibriumFit {
    fn trivial() -> Self {
        Self { rho_param: 0.0, u_param: [0.0; 2], iterations: 0, converged: true, deposited: false }
    }
}

fn sample(grid: &PhaseGrid, params: &ModelParams, rho: f64, u: [f64; 2], out: &mut [f64]) {
    let r2 = params.support_radius_sq(rho);
    if params.is_endpoint() {
        let r = r2.sqrt();
        let h = grid.velocity_volume().powf(1.0 / grid.n() as f64);
        let c2 = params.c2();
        for (j, o) in out.iter_mut().enumerate() {
            let v = grid.velocity(j);
            let dist = norm(&[v[0] - u[0], v[1] - u[1]]);
            *o = c2 * ((r - dist) / h + 0.5).clamp(0.0, 1.0);
        }
    } else {
        for (j, o) in out.iter_mut().enumerate() {
            let v = grid.velocity(j);
            let w2 = (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2);
            *o = profile_value(params, r2, w2);
        }
    }
}

fn grid_mass(out: &[f64], dvol: f64) -> f64 {
    pairwise_sum(out.len(), |j| out[j]) * dvol
}

fn grid_mean_velocity(grid: &PhaseGrid, out: &[f64], mass: f64, dvol: f64) -> [f64; 2] {
    let mut m = [0.0; 2];
    if mass <= 0.0 {
        return m;
    }
    for (k, mk) in m.iter_mut().enumerate().take(grid.n()) {
        *mk = pairwise_sum(out.len(), |j| grid.velocity(j)[k] * out[j]) * dvol / mass;
    }
    m
}

/// Writes into `out` the equilibrium whose grid mass is `rho` and whose grid
/// momentum is `momentum`.
pub fn discrete_maxwellian(
    grid: &PhaseGrid,
    params: &ModelParams,
    rho: f64,
    momentum: [f64; 2],
    out: &mut [f64],
) -> EquilibriumFit {
    if !(rho > 0.0) {
        out.iter_mut().for_each(|x| *x = 0.0);
        return EquilibriumFit::trivial();
    }
    let target_u = [momentum[0] / rho, momentum[1] / rho];
    let h_max = grid.dv().iter().copied().fold(0.0, f64::max);
    // At the endpoint a deposit taller than c2 would lose mass, so only
    // masses that fit under c2 in a single node are deposited.
    let fits = !params.is_endpoint() || rho <= params.c2() * grid.velocity_volume();
    if params.support_radius(rho) < 2.0 * h_max && fits {
        return deposit(grid, rho, target_u, out);
    }
    let dvol = grid.velocity_volume();
    let n = grid.n();
    let u_tol = 8.0 * REL_TOL * (norm(&target_u) + params.support_radius(rho));

    let mut rho_p = rho;
    let mut u_p = target_u;
    let mut iterations = 0;
    let mut converged = false;

    // Joint secant iteration first: the continuous mass is linear in the
    // density parameter and the continuous mean equals the velocity parameter,
    // so unit slopes are the starting guess.
    let mut last: Option<(f64, f64, [f64; 2], [f64; 2])> = None;
    let mut mass_slope = 1.0;
    let mut u_slope = [1.0f64; 2];
    for _ in 0..FIXED_POINT_STEPS {
        iterations += 1;
        sample(grid, params, rho_p, u_p, out);
        let mass = grid_mass(out, dvol);
        if !(mass > 0.0) {
            rho_p = rho;
            u_p = target_u;
            break;
        }
        let mean = grid_mean_velocity(grid, out, mass, dvol);
        let err = [target_u[0] - mean[0], target_u[1] - mean[1]];
        if norm(&err) <= u_tol && (mass - rho).abs() <= 4.0 * REL_TOL * rho {
            converged = true;
            break;
        }
        if let Some((pr, pm, pu, pmean)) = last {
            if rho_p != pr && mass != pm {
                mass_slope = ((rho_p - pr) / (mass - pm) * (mass / rho_p)).clamp(0.5, 2.0);
            }
            for k in 0..n {
                let (du, dm) = (u_p[k] - pu[k], mean[k] - pmean[k]);
                if du != 0.0 && dm != 0.0 {
                    u_slope[k] = (du / dm).clamp(0.5, 2.0);
                }
            }
        }
        last = Some((rho_p, mass, u_p, mean));
        rho_p *= 1.0 + mass_slope * (rho - mass) / mass;
        u_p = [u_p[0] + u_slope[0] * err[0], u_p[1] + u_slope[1] * err[1]];
    }

    if !(rho_p.is_finite() && rho_p > 0.0 && u_p.iter().all(|x| x.is_finite())) {
        rho_p = rho;
        u_p = target_u;
    }

    // Secant sweeps next; they converge in a few steps for smooth profiles.
    let mut slope = [1.0f64; 2];
    let mut prev: Option<([f64; 2], [f64; 2])> = None;
    for _ in 0..SECANT_STEPS {
        if converged {
            break;
        }
        iterations += 1;
        let Some(r) = solve_mass(grid, params, rho, rho_p, u_p, out) else {
            return fallback(grid, params, rho, target_u, out);
        };
        rho_p = r;
        let mean = grid_mean_velocity(grid, out, grid_mass(out, dvol), dvol);
        let err = [target_u[0] - mean[0], target_u[1] - mean[1]];
        if norm(&err) <= u_tol {
            converged = true;
            break;
        }
        if let Some((pu, pm)) = prev {
            for k in 0..n {
                let dm = mean[k] - pm[k];
                let du = u_p[k] - pu[k];
                if dm != 0.0 && du != 0.0 {
                    slope[k] = (du / dm).clamp(0.2, 50.0);
                }
            }
        }
        prev = Some((u_p, mean));
        u_p = [u_p[0] + slope[0] * err[0], u_p[1] + slope[1] * err[1]];
    }

    // Steep profiles: bracketed solves along each axis in turn.
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for k in 0..n {
            let axis_mean = |x: f64, out: &mut [f64], rho_p: &mut f64| -> Option<f64> {
                let mut trial = u_p;
                trial[k] = x;
                *rho_p = solve_mass(grid, params, rho, *rho_p, trial, out)?;
                Some(grid_mean_velocity(grid, out, grid_mass(out, dvol), dvol)[k] - target_u[k])
            };
            let mut failed = false;
            let root = monotone_root(
                |x| match axis_mean(x, out, &mut rho_p) {
                    Some(g) => g,
                    None => {
                        failed = true;
                        0.0
                    }
                },
                u_p[k],
                h_max,
                u_tol,
            );
            if failed {
                return fallback(grid, params, rho, target_u, out);
            }
            iterations += 1;
            u_p[k] = root;
        }
        let Some(r) = solve_mass(grid, params, rho, rho_p, u_p, out) else {
            return fallback(grid, params, rho, target_u, out);
        };
        rho_p = r;
        let mean = grid_mean_velocity(grid, out, grid_mass(out, dvol), dvol);
        converged = norm(&[target_u[0] - mean[0], target_u[1] - mean[1]]) <= u_tol;
    }

    let mass = grid_mass(out, dvol);
    if mass > 0.0 {
        let s = rho / mass;
        out.iter_mut().for_each(|x| *x *= s);
    }
    if params.is_endpoint() {
        let c2 = params.c2();
        out.iter_mut().for_each(|x| *x = x.min(c2));
    }
    EquilibriumFit { rho_param: rho_p, u_param: u_p, iterations, converged, deposited: false }
}

/// Root of a nondecreasing function: bracket by doubling steps from `x0`,
/// then secant steps safeguarded by bisection.
fn monotone_root<G: FnMut(f64) -> f64>(mut g: G, x0: f64, step: f64, gtol: f64) -> f64 {
    let g0 = g(x0);
    if g0.abs() <= gtol {
        return x0;
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut ga) = (x0, g0);
    let mut h = step;
    let mut b = x0;
    let mut gb = g0;
    for _ in 0..200 {
        b = a + dir * h;
        gb = g(b);
        if gb.signum() != g0.signum() || gb == 0.0 {
            break;
        }
        a = b;
        ga = gb;
        h *= 2.0;
    }
    if gb.signum() == g0.signum() && gb != 0.0 {
        return b;
    }
    let (mut lo, mut g_lo, mut hi, mut g_hi) = if a < b { (a, ga, b, gb) } else { (b, gb, a, ga) };
    for _ in 0..MAX_INNER {
        let mut x = if g_hi != g_lo { lo - g_lo * (hi - lo) / (g_hi - g_lo) } else { 0.5 * (lo + hi) };
        // Keep the secant away from the bracket ends so the bracket keeps shrinking.
        let guard = 0.01 * (hi - lo);
        if !(x > lo + guard && x < hi - guard) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx.abs() <= gtol || hi - lo <= 4.0 * f64::EPSILON * (lo.abs() + hi.abs()) {
            return x;
        }
        if gx < 0.0 {
            lo = x;
            g_lo = gx;
        } else {
            hi = x;
            g_hi = gx;
        }
    }
    0.5 * (lo + hi)
}

/// Density parameter whose sampled profile has grid mass `target`; leaves
/// that profile in `out`.
fn solve_mass(
    grid: &PhaseGrid,
    params: &ModelParams,
    target: f64,
    start: f64,
    u: [f64; 2],
    out: &mut [f64],
) -> Option<f64> {
    let dvol = grid.velocity_volume();
    let ln_root = monotone_root(
        |ln_r| {
            sample(grid, params, ln_r.exp(), u, out);
            grid_mass(out, dvol) - target
        },
        start.ln(),
        0.05,
        REL_TOL * target,
    );
    sample(grid, params, ln_root.exp(), u, out);
    let mass = grid_mass(out, dvol);
    if mass > 0.0 && (mass - target).abs() <= 1e-6 * target {
        Some(ln_root.exp())
    } else {
        None
    }
}

/// Spreads `rho` over the nodes surrounding `u` with multilinear weights,
/// which matches mass and momentum whenever `u` lies inside the node range.
/// Used when the parameter solve fails: a deposit when it respects the
/// endpoint height, otherwise the sampled profile scaled towards mass `rho`
/// without exceeding `c2`.
fn fallback(grid: &PhaseGrid, params: &ModelParams, rho: f64, u: [f64; 2], out: &mut [f64]) -> EquilibriumFit {
    if !params.is_endpoint() || rho <= params.c2() * grid.velocity_volume() {
        return deposit(grid, rho, u, out);
    }
    sample(grid, params, rho, u, out);
    let mass = grid_mass(out, grid.velocity_volume());
    let peak = out.iter().copied().fold(0.0, f64::max);
    if mass > 0.0 && peak > 0.0 {
        let k = (rho / mass).min(params.c2() / peak);
        out.iter_mut().for_each(|x| *x *= k);
    }
    EquilibriumFit { rho_param: rho, u_param: u, iterations: 0, converged: false, deposited: false }
}

fn deposit(grid: &PhaseGrid, rho: f64, u: [f64; 2], out: &mut [f64]) -> EquilibriumFit {
    out.iter_mut().for_each(|x| *x = 0.0);
    let n = grid.n();
    let mut base = [0usize; 2];
    let mut frac = [0.0f64; 2];
    for k in 0..n {
        let nv = grid.nv()[k];
        if nv == 1 {
            continue;
        }
        let p = (u[k] - grid.v_min()[k]) / grid.dv()[k] - 0.5;
        let i0 = (p.floor().max(0.0) as usize).min(nv - 2);
        base[k] = i0;
        frac[k] = (p - i0 as f64).clamp(0.0, 1.0);
    }
    let dvol = grid.velocity_volume();
    let corners = 1usize << n;
    for corner in 0..corners {
        let mut idx = 0usize;
        let mut stride = 1usize;
        let mut w = 1.0;
        for k in 0..n {
            let bit = (corner >> k) & 1;
            let nv = grid.nv()[k];
            let i = if nv == 1 { 0 } else { base[k] + bit };
            if nv == 1 && bit == 1 {
                w = 0.0;
            }
            w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            idx += i * stride;
            stride *= nv;
        }
        if w > 0.0 {
            out[idx] += w * rho / dvol;
        }
    }
    EquilibriumFit { rho_param: rho, u_param: u, iterations: 0, converged: true, deposited: true }
}
