//! End-to-end acceptance checks, one line per criterion.
//!
//! Closed-form targets are written out here rather than taken from the
//! library, so every comparison is against an independent value.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use bgk_core::diagnostics::{tightness_check, tol_ledger, weak_form_residual, TestFunction, DEFAULT_LEDGER_CONSTANT};
use bgk_core::hydro::{convergence_order_fit, tau_sweep, SweepSettings};
use bgk_core::lifting::{lift_cutoff, InternalGrid};
use bgk_core::maxwellian::{cell_entropy, counterexample_quadrature, counterexample_report, fill_maxwellian};
use bgk_core::phase_space::regularize;
use bgk_core::scenario::Scenario;
use bgk_core::solver::{picard_sequence, run_simulation, validate_initial_data, Interpolation, SolverConfig};
use bgk_core::stability::{ball_l1_distance, BallMethod};
use bgk_core::verify::{
    ball_sweep, checks_csv, lifting_errors, maxwellian_sweep, minimization_gap, random_profile, run_suite, sweep_csv,
    SuiteSettings,
};
use bgk_core::{lambda_constant, DomainMode, ModelParams, PhaseGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

/// Errors below this level are treated as converged when fitting orders.
const ROUNDOFF_FLOOR: f64 = 1e-11;

fn order_over_two_halvings(coarse: f64, fine: f64) -> f64 {
    if fine <= ROUNDOFF_FLOOR {
        return f64::INFINITY;
    }
    (coarse / fine).log2() / 2.0
}

fn random_model(rng: &mut ChaCha8Rng) -> (ModelParams, f64, [f64; 2]) {
    let gamma = rng.gen_range(1.2..3.0);
    let kappa = rng.gen_range(0.3..2.0);
    let p = ModelParams::new(1, gamma, kappa, 1.0, 0.0).unwrap();
    (p, rng.gen_range(0.2..2.5), [rng.gen_range(-1.0..1.0), 0.0])
}

/// Velocity grid centred on the bulk velocity whose support edges fall on
/// cell boundaries six cells inside the box at every resolution.
fn aligned_grid(p: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> PhaseGrid {
    let half = p.support_radius(rho) * nv as f64 / (nv as f64 - 12.0);
    PhaseGrid::velocity_only(1, (u[0] - half, u[0] + half), nv).unwrap()
}

fn sampled(p: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> (PhaseGrid, Vec<f64>) {
    let grid = aligned_grid(p, rho, u, nv);
    let mut m = vec![0.0; nv];
    fill_maxwellian(&grid, p, rho, u, &mut m);
    (grid, m)
}

fn moment_error(p: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> f64 {
    let (grid, m) = sampled(p, rho, u, nv);
    let dv = grid.dv()[0];
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (j, x) in m.iter().enumerate() {
        let v = grid.velocity(j)[0];
        m0 += x * dv;
        m1 += v * x * dv;
        m2 += v * v * x * dv;
    }
    let scale = u[0].abs() + p.support_radius(rho);
    let e0 = (m0 - rho).abs() / rho;
    let e1 = (m1 - rho * u[0]).abs() / (rho * scale);
    let e2 = (m2 - rho * u[0] * u[0] - p.kappa() * rho.powf(p.gamma())).abs() / (rho * scale * scale);
    e0.max(e1).max(e2)
}

fn entropy_error(p: &ModelParams, rho: f64, u: [f64; 2], nv: usize) -> f64 {
    let (grid, m) = sampled(p, rho, u, nv);
    let h = cell_entropy(&grid, &m, p).to_f64();
    let exact = 0.5 * rho * u[0] * u[0] + p.kappa() * rho.powf(p.gamma()) / (p.gamma() - 1.0);
    (h - exact).abs() / exact
}

fn refinement_study<E: Fn(&ModelParams, f64, [f64; 2], usize) -> f64>(seed: u64, err: E) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_err: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    for _ in 0..50 {
        let (p, rho, u) = random_model(&mut rng);
        let e: Vec<f64> = [1024, 2048, 4096].iter().map(|&nv| err(&p, rho, u, nv)).collect();
        worst_err = worst_err.max(e[0]);
        worst_order = worst_order.min(order_over_two_halvings(e[0], e[2]));
    }
    (worst_err, worst_order)
}

fn criterion_1() -> Outcome {
    let (err, order) = refinement_study(101, moment_error);
    (err <= 5e-3 && order >= 0.9, format!("max rel err {err:.2e} at nv=1024, min order {order:.2}"))
}

fn criterion_2() -> Outcome {
    let (err, order) = refinement_study(102, entropy_error);
    let p = ModelParams::new(1, 2.0, 1.0, 1.0, 0.0).unwrap();
    let (grid, m) = sampled(&p, 1.0, [0.0; 2], 4096);
    let h = cell_entropy(&grid, &m, &p).to_f64();
    (
        err <= 5e-3 && order >= 0.9 && (h - 1.0).abs() <= 1e-4,
        format!("max rel err {err:.2e}, min order {order:.2}, closed case {h:.8}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let configs = [(1, 1.4), (1, 2.0), (1, 3.0), (2, 1.5), (2, 2.0)];
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let (n, gamma) = configs[i % configs.len()];
        let p = ModelParams::new(n, gamma, rng.gen_range(0.5..1.5), 1.0, 0.0).unwrap();
        let reach = 2.0 + p.support_radius(3.0);
        let grid = PhaseGrid::velocity_only(n, (-reach, reach), if n == 1 { 512 } else { 96 }).unwrap();
        let f = random_profile(&mut rng, &grid, &p);
        let (gap, tol) = minimization_gap(&grid, &f, &p);
        worst = worst.min(gap + tol);
        violations += (gap < -tol) as usize;
    }
    (violations == 0, format!("200 profiles, {violations} violations, min slack {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let p = ModelParams::new(1, 3.0, 1.0, 1.0, 0.0).unwrap();
    let exact = counterexample_report(0.5, 1.0, &p).unwrap();
    let grid = PhaseGrid::velocity_only(1, (-1.5, 1.5), 30001).unwrap();
    let quad = counterexample_quadrature(0.5, 1.0, &p, &grid).unwrap();
    let closed = exact.lhs == 1.0 / 3.0 && exact.rhs == 1.0 && exact.violated;
    let near = (quad.lhs - 1.0 / 3.0).abs() <= 1e-3 && (quad.rhs - 1.0).abs() <= 1e-3 && quad.violated;
    (
        closed && near,
        format!("closed lhs {} rhs {}, quadrature lhs {:.6} rhs {:.6}", exact.lhs, exact.rhs, quad.lhs, quad.rhs),
    )
}

fn criterion_5() -> Outcome {
    let mut rows = ball_sweep(1, 105, 250).unwrap();
    rows.extend(ball_sweep(2, 205, 250).unwrap());
    let bad = rows.iter().filter(|r| r.report.lhs > r.report.rhs * 1.01).count();
    let worst = rows.iter().map(|r| r.report.lhs / r.report.rhs.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    let mut eq_err: f64 = 0.0;
    for (r, dc) in [(1.0, 0.5), (0.7, 1.3), (2.0, 0.01)] {
        let d = ball_l1_distance(r, [0.0; 2], [dc, 0.0], 1, BallMethod::Grid).unwrap().value;
        eq_err = eq_err.max((d - 2.0 * dc).abs());
    }
    (
        bad == 0 && eq_err <= 1e-12,
        format!("500 pairs, {bad} above bound, max ratio {worst:.4}, 1D overlap err {eq_err:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let configs = [(1, 1.4, 2048), (1, 2.0, 2048), (1, 3.0, 4096), (2, 1.5, 160)];
    let mut rows = Vec::new();
    for (k, &(n, gamma, nv)) in configs.iter().enumerate() {
        let p = ModelParams::new(n, gamma, 1.0, 1.0, 0.0).unwrap();
        rows.extend(maxwellian_sweep(&p, 106 + k as u64, 50, nv).unwrap());
    }
    let bad = rows.iter().filter(|r| !r.report.satisfied).count();
    let worst = rows.iter().map(|r| r.report.ratio).fold(0.0, f64::max);
    let l2 = lambda_constant(&ModelParams::new(1, 2.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
    let l1 = lambda_constant(&ModelParams::new(1, 1.001, 1.0, 1.0, 0.0).unwrap()).unwrap();
    let pass = bad == 0 && (l2 - 2.0 / PI).abs() <= 1e-12 && (l1 - (2.0 / PI).sqrt()).abs() <= 1e-3;
    (
        pass,
        format!(
            "{} pairs, {bad} violations, max ratio {worst:.3}, L(2,1) - 2/pi = {:.1e}, L(1.001) - sqrt(2/pi) = {:.1e}",
            rows.len(),
            l2 - 2.0 / PI,
            l1 - (2.0 / PI).sqrt()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let norm = |a: [f64; 2]| (a[0] * a[0] + a[1] * a[1]).sqrt();
    let mut failures = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=2);
        let mut state = || {
            let rho = if rng.gen_bool(0.05) { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..2.0)) };
            let u = [rng.gen_range(-20.0..20.0), if n == 2 { rng.gen_range(-20.0..20.0) } else { 0.0 }];
            (rho, u)
        };
        let (a, b) = (state(), state());
        let eps = 10f64.powf(rng.gen_range(-2.0..1.0));
        let (ra, ua) = regularize(a.0, a.1, eps);
        let (rb, ub) = regularize(b.0, b.1, eps);
        let dm = norm([a.0 * a.1[0] - b.0 * b.1[0], a.0 * a.1[1] - b.0 * b.1[1]]);
        let drho = (a.0 - b.0).abs();
        let checks = [
            ra <= a.0,
            ra <= 1.0 / eps,
            norm(ua) <= norm(a.1) || a.0 == 0.0,
            norm(ua) <= 1.0 / eps,
            (ra - rb).abs() <= drho,
            norm([ua[0] - ub[0], ua[1] - ub[1]]) <= 2.0 * dm / eps + drho / (eps * eps),
        ];
        failures += checks.iter().filter(|c| !**c).count();
    }
    (failures == 0, format!("10000 tuples, {failures} failed relations"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst_d: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for i in 0..50 {
        let (n, gamma) = [(1, 1.5), (1, 2.0), (1, 2.6), (2, 1.5), (2, 1.8)][i % 5];
        let p = ModelParams::new(n, gamma, 1.0, 1.0, 0.0).unwrap();
        let reach = 2.0 + p.support_radius(3.0);
        let grid = PhaseGrid::velocity_only(n, (-reach, reach), if n == 1 { 256 } else { 48 }).unwrap();
        let f = random_profile(&mut rng, &grid, &p);
        let (d, _) = lifting_errors(&grid, &f, &p).unwrap();
        worst_d = worst_d.max(d);
        let x = f.iter().cloned().fold(0.0, f64::max);
        let cut = lift_cutoff(x, &p).unwrap();
        let ig = InternalGrid::new(1.3 * cut, 4096).unwrap();
        let pw = 1.0 + 2.0 / p.d();
        let want2 = x.powf(pw) / (pw * p.c2().powf(2.0 / p.d()));
        let m0 = ig.indicator_moment(cut, 0, &p).unwrap();
        let m2 = ig.indicator_moment(cut, 2, &p).unwrap();
        worst_m = worst_m.max((m0 - x).abs() / x).max((m2 - want2).abs() / want2);
    }
    (
        worst_d <= 1e-3 && worst_m <= 1e-4,
        format!("50 profiles, max dissipation gap {worst_d:.2e}, max moment err {worst_m:.2e}"),
    )
}

fn box_grid(nx: usize, nv: usize, half_width: f64, x: (f64, f64), mode: DomainMode) -> Arc<PhaseGrid> {
    let w = half_width / (1.0 - 12.0 / nv as f64);
    Arc::new(PhaseGrid::uniform(1, x, nx, (-w, w), nv, mode).unwrap())
}

fn step_run(nx: usize, nv: usize, dt: f64) -> (bgk_core::solver::SimulationOutput, Arc<PhaseGrid>, ModelParams) {
    let p = ModelParams::new(1, 2.0, 1.0, 0.05, 0.0).unwrap();
    let s = Scenario::SmoothedStep { rho_high: 1.0, rho_low: 0.125, width: 0.02 };
    let probe = PhaseGrid::uniform(1, (0.0, 1.0), nx, (-1.0, 1.0), nv, DomainMode::Periodic).unwrap();
    let grid = box_grid(nx, nv, s.velocity_reach(&probe, &p).unwrap(), (0.0, 1.0), DomainMode::Periodic);
    let f0 = s.build(&grid, &p).unwrap();
    (run_simulation(&f0, &SolverConfig::new(dt, 0.2), &p).unwrap(), grid, p)
}

fn criterion_9() -> Outcome {
    let (out, _, _) = step_run(256, 256, 1e-3);
    let rows = out.ledger.rows();
    let (m0, p0) = (rows[0].mass, rows[0].momentum[0]);
    let dm = rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max) / 0.2;
    let dp = rows.iter().map(|r| (r.momentum[0] - p0).abs()).fold(0.0, f64::max) / 0.2;
    let min = out.trajectory.frames().iter().map(|f| f.min_value()).fold(f64::INFINITY, f64::min);

    let p = ModelParams::new(1, 3.0, 1.0, 0.05, 0.0).unwrap();
    let reach = p.support_radius(2.0 * p.c2()).max(1.0);
    let grid = box_grid(128, 128, reach, (-1.0, 1.0), DomainMode::Periodic);
    let f0 = Scenario::BoxCounterexample { scale: 1.0, v_radius: 1.0, x_radius: 0.2 }.build(&grid, &p).unwrap();
    let end = run_simulation(&f0, &SolverConfig::new(1e-3, 0.2), &p).unwrap();
    let max = end.trajectory.frames().iter().map(|f| f.max_value()).fold(0.0, f64::max);
    let end_min = end.trajectory.frames().iter().map(|f| f.min_value()).fold(f64::INFINITY, f64::min);
    let end_drift = end.ledger.conservation_drift().0 / 0.2;
    (
        dm <= 1e-8 && dp <= 1e-8 && min >= 0.0 && end_min >= 0.0 && max <= p.c2(),
        format!("drift per unit time mass {dm:.1e} momentum {dp:.1e}, min {min:e}, endpoint max - c2 = {:e}, endpoint mass drift {end_drift:.1e}", max - p.c2()),
    )
}

fn criterion_10() -> Outcome {
    let mut tols = Vec::new();
    let mut detail = Vec::new();
    let mut ok = true;
    for (nx, nv, dt) in [(128, 128, 2e-3), (256, 256, 1e-3)] {
        let (out, grid, p) = step_run(nx, nv, dt);
        let tol = tol_ledger(DEFAULT_LEDGER_CONSTANT, dt, &grid, 0.2);
        let rows = out.ledger.rows();
        let h0 = rows[0].entropy.to_f64();
        let worst = rows
            .iter()
            .map(|r| r.entropy.to_f64() + r.base.cumulative / p.tau() - h0)
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= worst <= tol;
        detail.push(format!("nx={nx}: max budget {worst:.2e} vs tol {tol:.2e}"));
        tols.push(tol);
    }
    let shrink = tols[0] / tols[1];
    (ok && shrink >= 1.5, format!("{}, tol shrink {shrink:.2}x", detail.join("; ")))
}

fn sine_grid(nx: usize, nv: usize, reach: f64) -> Arc<PhaseGrid> {
    box_grid(nx, nv, reach, (0.0, 1.0), DomainMode::Periodic)
}

fn criterion_11() -> Outcome {
    let p = ModelParams::new(1, 2.0, 1.0, 1.0, 0.5).unwrap();
    let scen = Scenario::SineWave { rho_mean: 1.0, amplitude: 0.3, velocity_amplitude: 0.3 };
    let grid = sine_grid(64, 64, 2.0 * 1.3f64.sqrt());
    let f0 = scen.build(&grid, &p).unwrap();
    let mut cfg = SolverConfig::new(0.01, 0.5);
    cfg.picard_tol = 1e-12;
    let run = picard_sequence(&f0, &cfg, &p, 0.5).unwrap();
    let max_ratio = run.ratios().into_iter().fold(0.0, f64::max);
    let m0 = f0.total_mass();
    let h0 = validate_initial_data(&f0, &p).unwrap().entropy;
    let (mut dm, mut dh) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for it in &run.iterates {
        for f in it.frames() {
            dm = dm.max(f.total_mass() - m0);
            dh = dh.max(validate_initial_data(f, &p).unwrap().entropy - h0);
        }
    }
    (
        run.converged && max_ratio < 1.0 && dm <= 1e-6 && dh <= 1e-6,
        format!(
            "{} iterates, max ratio {max_ratio:.3}, mass excess {dm:.1e}, entropy excess {dh:.1e}",
            run.iterates.len()
        ),
    )
}

fn criterion_12() -> Outcome {
    let p = ModelParams::new(1, 2.0, 1.0, 0.1, 0.0).unwrap();
    let grid = sine_grid(256, 128, 2.0 * 1.1f64.sqrt());
    let t = Instant::now();
    let settings = SweepSettings { horizon: 0.1, nx_ref: 1024, interpolation: Interpolation::Linear };
    let res =
        tau_sweep(|x| 1.0 + 0.1 * (2.0 * PI * x).sin(), |_| 0.0, &[0.1, 0.05, 0.025, 0.0125], settings, &grid, &p)
            .unwrap();
    let fit = convergence_order_fit(&res.iter().map(|r| (r.tau, r.j)).collect::<Vec<_>>()).unwrap();
    let monotone = res.windows(2).all(|w| w[1].l1_err_rho < w[0].l1_err_rho);
    let errs: Vec<String> = res.iter().map(|r| format!("{:.2e}", r.l1_err_rho)).collect();
    let secs = t.elapsed().as_secs_f64();
    (
        fit.order >= 0.4 && monotone && secs < 300.0,
        format!("J order {:.3} (r2 {:.3}), rho errors [{}], {secs:.1}s", fit.order, fit.r_squared, errs.join(", ")),
    )
}

fn criterion_13() -> Outcome {
    let p = ModelParams::new(1, 2.0, 1.0, 0.1, 0.0).unwrap();
    let scen = Scenario::SineWave { rho_mean: 1.0, amplitude: 0.3, velocity_amplitude: 0.3 };
    let mut levels: Vec<Vec<f64>> = Vec::new();
    let mut within = true;
    for lvl in 0..3 {
        let nx = 32 << lvl;
        let dt = 0.4 / nx as f64;
        let grid = sine_grid(nx, nx, 2.0 * 1.3f64.sqrt());
        let f0 = scen.build(&grid, &p).unwrap();
        let out = run_simulation(&f0, &SolverConfig::new(dt, 0.5), &p).unwrap();
        let r: Vec<f64> = TestFunction::library(&grid, 0.5)
            .iter()
            .map(|phi| weak_form_residual(&out.trajectory, phi, &p).unwrap().normalized)
            .collect();
        within &= r.iter().all(|x| *x <= dt + grid.dx()[0]);
        levels.push(r);
    }
    let orders: Vec<f64> = (0..levels[0].len()).map(|k| order_over_two_halvings(levels[0][k], levels[2][k])).collect();
    let ok = within && levels[0].len() >= 3 && orders.iter().all(|o| *o >= 0.9);
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.2}")).collect();
    (
        ok,
        format!("{} test functions, residual within (dt+dx): {within}, orders [{}]", levels[0].len(), shown.join(", ")),
    )
}

fn criterion_14() -> Outcome {
    let p = ModelParams::new(1, 2.0, 1.0, 0.2, 0.0).unwrap();
    let scen = Scenario::Bump { rho_peak: 1.0, radius: 0.5, u: [0.3, 0.0] };
    let grid = box_grid(200, 64, 0.3 + p.support_radius(1.0) + 0.5, (-5.0, 5.0), DomainMode::FreeTruncated);
    let f0 = scen.build(&grid, &p).unwrap();
    let out = run_simulation(&f0, &SolverConfig::new(0.01, 1.0), &p).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [1.0, 2.0, 4.0] {
        let rep = tightness_check(&out.trajectory, r, 1.0).unwrap();
        ok &= rep.ratio <= 1.0;
        parts.push(format!("R={r}: {:.3}", rep.ratio));
    }
    (ok, format!("ratios {}", parts.join(", ")))
}

fn criterion_15() -> Outcome {
    let p = ModelParams::new(1, 2.0, 1.0, 1.0, 0.0).unwrap();
    let settings = SuiteSettings { seed: 15, cases: 8, nv_1d: 512, nv_2d: 64 };
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = checks_csv(&run_suite(&p, &settings).unwrap());
            s.push_str(&sweep_csv(&maxwellian_sweep(&p, 15, 12, 1024).unwrap()));
            s
        })
    };
    let (a, b) = (render(1), render(8));
    (a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 15] = [
        ("equilibrium moment identities", criterion_1),
        ("entropy of the equilibrium", criterion_2),
        ("minimization principle", criterion_3),
        ("endpoint counterexample", criterion_4),
        ("ball symmetric difference", criterion_5),
        ("equilibrium stability bounds", criterion_6),
        ("regularization relations", criterion_7),
        ("lifting identities", criterion_8),
        ("conservation and bounds", criterion_9),
        ("entropy budget", criterion_10),
        ("picard iteration", criterion_11),
        ("fluid limit trend", criterion_12),
        ("weak-form residual", criterion_13),
        ("tail mass propagation", criterion_14),
        ("thread-count determinism", criterion_15),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = check();
        failed += !pass as usize;
        println!(
            "criterion {:>2} {:<32} {} ({detail}; {:.1}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
