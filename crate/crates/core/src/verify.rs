//! Randomized invariant suites and sweeps with deterministic CSV output.
//!
//! Cases are drawn sequentially from a seeded generator and evaluated in
//! parallel with order-preserving collection, so the output bytes do not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::lifting::{lift_cutoff, lifted_dissipation, sampled_dissipation, InternalGrid, DEFAULT_I_CELLS};
use crate::maxwellian::{
    cell_entropy, fill_maxwellian, maxwellian_entropy_value, quadrature_tolerance, MaxwellianSpec,
};
use crate::params::{fmt_f64, ModelParams};
use crate::phase_space::{cell_moments, norm, regularize, PhaseGrid};
use crate::stability::{
    ball_l1_distance, ball_stability_bound, maxwellian_l1_distance, maxwellian_weighted_l1_distance,
    stability_bound_theta, support_speed, weighted_stability_bound, BallMethod, BoundReport,
};
use crate::summation::pairwise_sum;

/// Relative tolerance of the moment and compatibility families.
pub const MOMENT_TOL: f64 = 5e-3;
/// Absolute slack of the minimization family on top of the quadrature tolerance.
pub const MINIMIZATION_SLACK: f64 = 1e-8;
/// Agreement required between first-model and lifted dissipation.
pub const LIFTING_TOL: f64 = 1e-3;
/// Agreement required of the lifted moment identities.
pub const LIFTING_MOMENT_TOL: f64 = 1e-4;
/// Relative slack of the ball-lemma sweep.
pub const BALL_TOL: f64 = 1e-2;
/// Relative slack of the Maxwellian stability sweeps.
pub const STABILITY_TOL: f64 = 2e-2;

/// Sizes of the randomized suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSettings {
    pub seed: u64,
    pub cases: usize,
    /// Velocity nodes per axis for one-dimensional checks.
    pub nv_1d: usize,
    /// Velocity nodes per axis for two-dimensional checks.
    pub nv_2d: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self { seed: 0, cases: 50, nv_1d: 1024, nv_2d: 128 }
    }
}

/// One line of a check table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub family: &'static str,
    pub case_id: usize,
    pub quantity: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRow {
    fn at_most(family: &'static str, case_id: usize, quantity: &'static str, measured: f64, bound: f64) -> Self {
        Self { family, case_id, quantity, measured, bound, pass: measured <= bound }
    }
}

pub const CHECK_COLUMNS: [&str; 6] = ["family", "case_id", "quantity", "measured", "bound", "pass"];

/// CSV body (header line plus rows) of a check table.
pub fn checks_csv(rows: &[CheckRow]) -> String {
    let mut s = CHECK_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.family,
            r.case_id,
            r.quantity,
            fmt_f64(r.measured),
            fmt_f64(r.bound),
            r.pass
        ));
    }
    s
}

/// Pass/fail count per family, in first-appearance order.
pub fn family_summary(rows: &[CheckRow]) -> Vec<(&'static str, usize, usize)> {
    let mut out: Vec<(&'static str, usize, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|e| e.0 == r.family) {
            Some(e) => {
                e.1 += r.pass as usize;
                e.2 += 1;
            }
            None => out.push((r.family, r.pass as usize, 1)),
        }
    }
    out
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> (f64, [f64; 2]) {
    let rho = rng.gen_range(0.1..3.0);
    let mut u = [0.0; 2];
    for uk in u.iter_mut().take(n) {
        *uk = rng.gen_range(-1.0..1.0);
    }
    (rho, u)
}

/// Velocity grid centred on `u` whose half-width leaves six empty cells
/// beyond a support of radius `r` on each side.
pub fn centred_velocity_grid(n: usize, u: [f64; 2], r: f64, nv: usize) -> Result<PhaseGrid> {
    let half = r * nv as f64 / (nv as f64 - 12.0);
    let lo: Vec<f64> = (0..n).map(|k| u[k] - half).collect();
    let hi: Vec<f64> = (0..n).map(|k| u[k] + half).collect();
    PhaseGrid::new(n, &vec![0.0; n], &vec![1.0; n], &vec![1; n], &lo, &hi, &vec![nv; n], crate::DomainMode::Periodic)
}

fn nv_for(params: &ModelParams, s: &SuiteSettings) -> usize {
    if params.n() == 1 {
        s.nv_1d
    } else {
        s.nv_2d
    }
}

/// Errors of a sampled Maxwellian's grid moments, each scaled by a natural
/// size of the moment: `rho`, `rho (|u| + r)` and `rho (|u| + r)^2`.
pub fn moment_errors(params: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> Result<[f64; 3]> {
    let n = params.n();
    let r = params.support_radius(rho);
    let grid = centred_velocity_grid(n, u, r, nv)?;
    let mut m = vec![0.0; grid.nv_total()];
    fill_maxwellian(&grid, params, rho, u, &mut m);
    let dvol = grid.velocity_volume();
    let (mass, mom) = cell_moments(&grid, &m, dvol);
    let scale = norm(&u) + r;
    let mut mom_err: f64 = 0.0;
    let mut stress_err: f64 = 0.0;
    for a in 0..n {
        mom_err = mom_err.max((mom[a] - rho * u[a]).abs());
        for b in 0..n {
            let s = pairwise_sum(m.len(), |j| grid.velocity(j)[a] * grid.velocity(j)[b] * m[j]) * dvol;
            let exact = rho * u[a] * u[b] + if a == b { params.pressure(rho) } else { 0.0 };
            stress_err = stress_err.max((s - exact).abs());
        }
    }
    Ok([(mass - rho).abs() / rho, mom_err / (rho * scale), stress_err / (rho * scale * scale)])
}

/// Relative error of the quadrature entropy of a sampled Maxwellian.
pub fn compatibility_error(params: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> Result<f64> {
    let r = params.support_radius(rho);
    let grid = centred_velocity_grid(params.n(), u, r, nv)?;
    let mut m = vec![0.0; grid.nv_total()];
    fill_maxwellian(&grid, params, rho, u, &mut m);
    let h = cell_entropy(&grid, &m, params).to_f64();
    let exact = maxwellian_entropy_value(rho, u, params);
    Ok((h - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
}

fn moments_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(s.seed, 1);
    let cases: Vec<(f64, [f64; 2])> = (0..s.cases).map(|_| random_state(&mut rng, params.n())).collect();
    let nv = nv_for(params, s);
    let errs = cases.par_iter().map(|&(rho, u)| moment_errors(params, rho, u, nv)).collect::<Result<Vec<_>>>()?;
    Ok(errs
        .iter()
        .enumerate()
        .flat_map(|(i, e)| {
            [
                CheckRow::at_most("moments", i, "mass_rel_err", e[0], MOMENT_TOL),
                CheckRow::at_most("moments", i, "momentum_rel_err", e[1], MOMENT_TOL),
                CheckRow::at_most("moments", i, "stress_rel_err", e[2], MOMENT_TOL),
            ]
        })
        .collect())
}

fn compatibility_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(s.seed, 2);
    let cases: Vec<(f64, [f64; 2])> = (0..s.cases).map(|_| random_state(&mut rng, params.n())).collect();
    let nv = nv_for(params, s);
    let errs = cases.par_iter().map(|&(rho, u)| compatibility_error(params, rho, u, nv)).collect::<Result<Vec<_>>>()?;
    Ok(errs
        .iter()
        .enumerate()
        .map(|(i, &e)| CheckRow::at_most("compatibility", i, "entropy_rel_err", e, MOMENT_TOL))
        .collect())
}

/// Random nonnegative velocity profile: a few boxes and Maxwellians plus
/// noise, capped at `c2` at the endpoint.
pub fn random_profile(rng: &mut ChaCha8Rng, grid: &PhaseGrid, params: &ModelParams) -> Vec<f64> {
    let nvt = grid.nv_total();
    let mut f = vec![0.0; nvt];
    let mut tmp = vec![0.0; nvt];
    let pieces = rng.gen_range(1..=4);
    for _ in 0..pieces {
        let (rho, u) = random_state(rng, grid.n());
        let rho = 0.5 * rho;
        if rng.gen_bool(0.5) {
            fill_maxwellian(grid, params, rho, u, &mut tmp);
        } else {
            let w = rng.gen_range(0.2..1.5);
            let h = rng.gen_range(0.05..0.6);
            for (j, t) in tmp.iter_mut().enumerate() {
                let v = grid.velocity(j);
                let inside = (0..grid.n()).all(|k| (v[k] - u[k]).abs() <= w);
                *t = if inside { h } else { 0.0 };
            }
        }
        for (a, b) in f.iter_mut().zip(&tmp) {
            *a += b;
        }
    }
    let noise = rng.gen_range(0.0..0.05);
    for x in f.iter_mut() {
        *x += noise * rng.gen::<f64>() * (*x > 0.0) as u8 as f64;
    }
    if params.is_endpoint() {
        let c2 = params.c2();
        f.iter_mut().for_each(|x| *x = x.min(c2));
    }
    f
}

/// `sum H(f) dv - H(M[f])` and its admissible deficit for one profile.
pub fn minimization_gap(grid: &PhaseGrid, f: &[f64], params: &ModelParams) -> (f64, f64) {
    let (rho, m) = cell_moments(grid, f, grid.velocity_volume());
    let u = if rho > 0.0 { [m[0] / rho, m[1] / rho] } else { [0.0; 2] };
    let h = cell_entropy(grid, f, params).to_f64();
    let h_m = maxwellian_entropy_value(rho, u, params);
    (h - h_m, MINIMIZATION_SLACK + quadrature_tolerance(rho, grid.dv()))
}

fn profile_grid(params: &ModelParams, s: &SuiteSettings) -> Result<PhaseGrid> {
    let reach = 2.0 + support_speed(1.5, params);
    let nv = if params.n() == 1 { s.nv_1d.min(512) } else { s.nv_2d.min(48) };
    PhaseGrid::velocity_only(params.n(), (-reach, reach), nv)
}

fn minimization_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let grid = profile_grid(params, s)?;
    let mut rng = rng_for(s.seed, 3);
    let profiles: Vec<Vec<f64>> = (0..s.cases).map(|_| random_profile(&mut rng, &grid, params)).collect();
    let gaps: Vec<(f64, f64)> = profiles.par_iter().map(|f| minimization_gap(&grid, f, params)).collect();
    Ok(gaps
        .iter()
        .enumerate()
        .map(|(i, &(gap, tol))| CheckRow {
            family: "minimization",
            case_id: i,
            quantity: "entropy_excess",
            measured: gap,
            bound: -tol,
            pass: gap >= -tol,
        })
        .collect())
}

/// `(|D - D_lifted|, moment-identity error)` for one profile.
pub fn lifting_errors(grid: &PhaseGrid, f: &[f64], params: &ModelParams) -> Result<(f64, f64)> {
    let (rho, m) = cell_moments(grid, f, grid.velocity_volume());
    let u = if rho > 0.0 { [m[0] / rho, m[1] / rho] } else { [0.0; 2] };
    let d = sampled_dissipation(grid, f, rho, u, params);
    let d_lift = lifted_dissipation(grid, f, rho, u, params, DEFAULT_I_CELLS)?;
    let p = 1.0 + 2.0 / params.d();
    let mut worst: f64 = 0.0;
    for &x in f.iter().filter(|x| **x > 0.0) {
        let cut = lift_cutoff(x, params)?;
        let igrid = InternalGrid::new(cut * 1.25, DEFAULT_I_CELLS)?;
        let m0 = igrid.indicator_moment(cut, 0, params)?;
        let m2 = igrid.indicator_moment(cut, 2, params)?;
        let e2 = (p * x.ln() - 2.0 * params.ln_c2() / params.d()).exp() / p;
        worst = worst.max((m0 - x).abs() / x).max((m2 - e2).abs() / e2);
    }
    Ok(((d - d_lift).abs() / d.abs().max(1.0), worst))
}

fn lifting_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    if params.is_endpoint() {
        return Ok(Vec::new());
    }
    let grid = profile_grid(params, s)?;
    let mut rng = rng_for(s.seed, 4);
    let profiles: Vec<Vec<f64>> = (0..s.cases).map(|_| random_profile(&mut rng, &grid, params)).collect();
    let errs = profiles.par_iter().map(|f| lifting_errors(&grid, f, params)).collect::<Result<Vec<_>>>()?;
    Ok(errs
        .iter()
        .enumerate()
        .flat_map(|(i, &(d, m))| {
            [
                CheckRow::at_most("lifting", i, "dissipation_gap", d, LIFTING_TOL),
                CheckRow::at_most("lifting", i, "moment_identity_err", m, LIFTING_MOMENT_TOL),
            ]
        })
        .collect())
}

/// Every relation between plain and regularized moments for one pair of
/// states, as `(quantity, measured, bound)` with `measured <= bound` required
/// exactly.
pub fn regularization_relations(a: (f64, [f64; 2]), b: (f64, [f64; 2]), eps: f64) -> Vec<(&'static str, f64, f64)> {
    let (ra, ua) = regularize(a.0, a.1, eps);
    let (rb, ub) = regularize(b.0, b.1, eps);
    let ma = [a.0 * a.1[0], a.0 * a.1[1]];
    let mb = [b.0 * b.1[0], b.0 * b.1[1]];
    let drho = (a.0 - b.0).abs();
    vec![
        ("rho_eps_le_rho", ra, a.0),
        ("rho_eps_le_inv_eps", ra, 1.0 / eps),
        ("u_eps_le_u", norm(&ua), norm(&a.1)),
        ("u_eps_le_inv_eps", norm(&ua), 1.0 / eps),
        ("rho_eps_lipschitz", (ra - rb).abs(), drho),
        (
            "u_eps_lipschitz",
            norm(&[ua[0] - ub[0], ua[1] - ub[1]]),
            2.0 * norm(&[ma[0] - mb[0], ma[1] - mb[1]]) / eps + drho / (eps * eps),
        ),
    ]
}

/// Density and velocity.
pub type State = (f64, [f64; 2]);

/// Random pair of states and a regularization parameter.
pub fn random_regularization_tuple(rng: &mut ChaCha8Rng, n: usize) -> (State, State, f64) {
    let state = |rng: &mut ChaCha8Rng| {
        let rho = if rng.gen_bool(0.05) { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..2.0)) };
        let mut u = [0.0; 2];
        for uk in u.iter_mut().take(n) {
            *uk = rng.gen_range(-20.0..20.0);
        }
        (rho, u)
    };
    let a = state(rng);
    let b = state(rng);
    (a, b, 10f64.powf(rng.gen_range(-2.0..1.0)))
}

fn regularization_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(s.seed, 5);
    let tuples: Vec<_> = (0..s.cases * 20).map(|_| random_regularization_tuple(&mut rng, params.n())).collect();
    Ok(tuples
        .iter()
        .enumerate()
        .flat_map(|(i, &(a, b, eps))| {
            regularization_relations(a, b, eps)
                .into_iter()
                .map(move |(q, m, bound)| CheckRow::at_most("regularization", i, q, m, bound))
        })
        .collect())
}

fn ball_family(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let rows = ball_sweep(params.n(), s.seed, s.cases)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            CheckRow::at_most(
                "ball_stability",
                r.case_id,
                "distance_over_bound",
                r.report.lhs,
                r.report.rhs * (1.0 + BALL_TOL),
            )
        })
        .collect())
}

/// Runs every check family.
pub fn run_suite(params: &ModelParams, s: &SuiteSettings) -> Result<Vec<CheckRow>> {
    let mut rows = moments_family(params, s)?;
    rows.extend(compatibility_family(params, s)?);
    rows.extend(minimization_family(params, s)?);
    rows.extend(lifting_family(params, s)?);
    rows.extend(regularization_family(params, s)?);
    rows.extend(ball_family(params, s)?);
    Ok(rows)
}

/// One row of a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep: &'static str,
    pub case_id: usize,
    /// Named case parameters.
    pub inputs: Vec<(&'static str, f64)>,
    pub report: BoundReport,
}

pub const SWEEP_COLUMNS: [&str; 8] = ["sweep", "case_id", "inputs", "lhs", "rhs", "ratio", "satisfied", "tol"];

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = SWEEP_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let inputs: Vec<String> = r.inputs.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.sweep,
            r.case_id,
            inputs.join(";"),
            fmt_f64(r.report.lhs),
            fmt_f64(r.report.rhs),
            fmt_f64(r.report.ratio),
            r.report.satisfied,
            fmt_f64(r.report.tol)
        ));
    }
    s
}

/// Random ball pairs with `r` in `[0.1, 3]` and `|c_a - c_b|` in `[0, 4]`.
pub fn ball_sweep(n: usize, seed: u64, cases: usize) -> Result<Vec<SweepRow>> {
    let mut rng = rng_for(seed, 6);
    let draws: Vec<(f64, f64, f64)> = (0..cases)
        .map(|_| (rng.gen_range(0.1..3.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    draws
        .par_iter()
        .enumerate()
        .map(|(i, &(r, dc, angle))| {
            let cb = if n == 1 { [dc, 0.0] } else { [dc * angle.cos(), dc * angle.sin()] };
            let d = ball_l1_distance(r, [0.0; 2], cb, n, BallMethod::Grid)?;
            let bound = ball_stability_bound(r, [0.0; 2], cb, n);
            Ok(SweepRow {
                sweep: "ball",
                case_id: i,
                inputs: vec![("n", n as f64), ("r", r), ("dc", dc)],
                report: BoundReport::new(d.value, bound, BALL_TOL),
            })
        })
        .collect()
}

/// Velocity grid holding both supports with `nv` nodes per axis.
pub fn pair_grid(specs: &[MaxwellianSpec<'_>], nv: usize) -> Result<PhaseGrid> {
    let n = specs[0].params.n();
    let reach = specs.iter().map(|s| norm(&s.u) + s.radius_sq().sqrt()).fold(0.0, f64::max);
    let half = reach * nv as f64 / (nv as f64 - 12.0);
    PhaseGrid::velocity_only(n, (-half, half), nv)
}

/// Random Maxwellian pairs against the theta bound and the weighted bound.
pub fn maxwellian_sweep(params: &ModelParams, seed: u64, cases: usize, nv: usize) -> Result<Vec<SweepRow>> {
    let mut rng = rng_for(seed, 7);
    let n = params.n();
    let draw_u = |rng: &mut ChaCha8Rng, cap: f64| {
        let s = rng.gen_range(0.0..cap);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        if n == 1 {
            [if rng.gen_bool(0.5) { s } else { -s }, 0.0]
        } else {
            [s * a.cos(), s * a.sin()]
        }
    };
    let mut draws = Vec::with_capacity(2 * cases);
    for i in 0..cases {
        let theta = [0.0, 0.5, 1.0][i % 3];
        let (ra, rb) = (rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0));
        let (ua, ub) = (draw_u(&mut rng, 1.0), draw_u(&mut rng, 1.0));
        draws.push(("theta", theta, ra, rb, ua, ub));
    }
    for _ in 0..cases {
        let (ra, rb) = (rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0));
        let (ua, ub) = (draw_u(&mut rng, 2.0), draw_u(&mut rng, 2.0));
        draws.push(("weighted", 2.0, ra, rb, ua, ub));
    }
    draws
        .par_iter()
        .enumerate()
        .map(|(i, &(kind, knob, ra, rb, ua, ub))| {
            let a = MaxwellianSpec::new(ra, ua, params);
            let b = MaxwellianSpec::new(rb, ub, params);
            let grid = pair_grid(&[a, b], nv)?;
            let (lhs, rhs) = if kind == "theta" {
                (maxwellian_l1_distance(&a, &b, &grid)?, stability_bound_theta(ra, rb, ua, ub, knob, params)?)
            } else {
                (
                    maxwellian_weighted_l1_distance(&a, &b, &grid)?,
                    weighted_stability_bound(ra, rb, ua, ub, knob, params)?,
                )
            };
            let knob_name = if kind == "theta" { "theta" } else { "c0" };
            Ok(SweepRow {
                sweep: if kind == "theta" { "maxwellian_theta" } else { "maxwellian_weighted" },
                case_id: i % cases,
                inputs: vec![
                    ("gamma", params.gamma()),
                    (knob_name, knob),
                    ("rho_a", ra),
                    ("rho_b", rb),
                    ("du", norm(&[ua[0] - ub[0], ua[1] - ub[1]])),
                ],
                report: BoundReport::new(lhs, rhs, STABILITY_TOL),
            })
        })
        .collect()
}
