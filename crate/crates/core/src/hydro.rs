//! Hydrodynamic-limit experiment: well-prepared data, a finite-volume
//! reference for the barotropic Euler system, relaxation-time sweeps and
//! log-log order fits.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::diagnostics::j_functional;
use crate::equilibrium::discrete_maxwellian;
use crate::error::{BgkError, Result};
use crate::params::ModelParams;
use crate::phase_space::{moments, DistributionField, DomainMode, PhaseGrid};
use crate::solver::{run_simulation, Interpolation, SolverConfig};
use crate::summation::pairwise_sum;

/// Courant number of the reference solver.
pub const EULER_CFL: f64 = 0.4;
/// Growth factor of Riemann-invariant gradients that aborts the reference.
pub const BLOWUP_FACTOR: f64 = 10.0;
/// Relaxation-time steps per kinetic time step in a sweep.
pub const STEPS_PER_TAU: f64 = 5.0;

/// Equilibrium field with moments `(rho0, rho0 u0)` in every cell.
pub fn well_prepared_init<R, U>(
    rho0: R,
    u0: U,
    grid: &Arc<PhaseGrid>,
    params: &ModelParams,
) -> Result<DistributionField>
where
    R: Fn([f64; 2]) -> f64 + Sync,
    U: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    let cells = grid.num_cells();
    let rho: Vec<f64> = (0..cells).map(|c| rho0(grid.cell_center(c))).collect();
    let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(BgkError::VacuumInProfile(min));
    }
    let nvt = grid.nv_total();
    let mut values = vec![0.0; grid.len()];
    values.par_chunks_mut(nvt).enumerate().for_each(|(c, chunk)| {
        let u = u0(grid.cell_center(c));
        discrete_maxwellian(grid, params, rho[c], [rho[c] * u[0], rho[c] * u[1]], chunk);
    });
    DistributionField::from_values(grid.clone(), values, 0.0)
}

/// Reference density and momentum averaged onto `nx_out` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerSolution {
    pub rho: Vec<f64>,
    pub momentum: Vec<f64>,
    pub steps: usize,
    /// Largest growth of Riemann-invariant gradients seen.
    pub gradient_growth: f64,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

struct EulerSystem {
    gamma: f64,
    kappa: f64,
    n: usize,
    dx: f64,
}

impl EulerSystem {
    fn pressure(&self, rho: f64) -> f64 {
        self.kappa * rho.max(0.0).powf(self.gamma)
    }

    fn sound(&self, rho: f64) -> f64 {
        (self.kappa * self.gamma * rho.max(0.0).powf(self.gamma - 1.0)).sqrt()
    }

    fn flux(&self, rho: f64, m: f64) -> [f64; 2] {
        let u = if rho > 0.0 { m / rho } else { 0.0 };
        [m, m * u + self.pressure(rho)]
    }

    fn max_speed(&self, q: &[[f64; 2]]) -> f64 {
        q.iter().map(|s| (if s[0] > 0.0 { s[1] / s[0] } else { 0.0 }).abs() + self.sound(s[0])).fold(0.0, f64::max)
    }

    /// `-(F_{i+1/2} - F_{i-1/2}) / dx` with limited reconstruction.
    fn rate(&self, q: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let n = self.n;
        let at = |i: isize| q[i.rem_euclid(n as isize) as usize];
        let slopes: Vec<[f64; 2]> = (0..n as isize)
            .map(|i| {
                let (l, c, r) = (at(i - 1), at(i), at(i + 1));
                [minmod(c[0] - l[0], r[0] - c[0]), minmod(c[1] - l[1], r[1] - c[1])]
            })
            .collect();
        let face: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let ql = [q[i][0] + 0.5 * slopes[i][0], q[i][1] + 0.5 * slopes[i][1]];
                let qr = [q[j][0] - 0.5 * slopes[j][0], q[j][1] - 0.5 * slopes[j][1]];
                let fl = self.flux(ql[0], ql[1]);
                let fr = self.flux(qr[0], qr[1]);
                let speed = |s: [f64; 2]| (if s[0] > 0.0 { s[1] / s[0] } else { 0.0 }).abs() + self.sound(s[0]);
                let a = speed(ql).max(speed(qr));
                [0.5 * (fl[0] + fr[0]) - 0.5 * a * (qr[0] - ql[0]), 0.5 * (fl[1] + fr[1]) - 0.5 * a * (qr[1] - ql[1])]
            })
            .collect();
        (0..n)
            .map(|i| {
                let im = (i + n - 1) % n;
                [-(face[i][0] - face[im][0]) / self.dx, -(face[i][1] - face[im][1]) / self.dx]
            })
            .collect()
    }

    fn invariant_gradient(&self, q: &[[f64; 2]]) -> f64 {
        let w: Vec<[f64; 2]> = q
            .iter()
            .map(|s| {
                let u = if s[0] > 0.0 { s[1] / s[0] } else { 0.0 };
                let c = 2.0 * self.sound(s[0]) / (self.gamma - 1.0);
                [u + c, u - c]
            })
            .collect();
        (0..self.n)
            .map(|i| {
                let j = (i + 1) % self.n;
                ((w[j][0] - w[i][0]).abs()).max((w[j][1] - w[i][1]).abs()) / self.dx
            })
            .fold(0.0, f64::max)
    }
}

/// Solves the periodic 1D barotropic Euler system on `[x_range.0, x_range.1)`
/// up to `horizon` with `nx_ref` cells and averages onto `nx_out` cells.
#[allow(clippy::too_many_arguments)]
pub fn euler_reference<R, U>(
    rho0: R,
    u0: U,
    gamma: f64,
    kappa: f64,
    horizon: f64,
    nx_ref: usize,
    x_range: (f64, f64),
    nx_out: usize,
) -> Result<EulerSolution>
where
    R: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    if nx_out == 0 || !nx_ref.is_multiple_of(nx_out) {
        return Err(BgkError::InvalidArgument(format!("nx_ref = {nx_ref} must be a multiple of {nx_out}")));
    }
    if !(horizon >= 0.0) {
        return Err(BgkError::NegativeParameter { name: "T", value: horizon });
    }
    let dx = (x_range.1 - x_range.0) / nx_ref as f64;
    let sys = EulerSystem { gamma, kappa, n: nx_ref, dx };
    // Three-point Gauss averages of the initial profiles.
    let nodes = [(-(0.6f64).sqrt(), 5.0 / 18.0), (0.0, 8.0 / 18.0), ((0.6f64).sqrt(), 5.0 / 18.0)];
    let mut q: Vec<[f64; 2]> = (0..nx_ref)
        .map(|i| {
            let xc = x_range.0 + (i as f64 + 0.5) * dx;
            let mut s = [0.0; 2];
            for (z, w) in nodes {
                let x = xc + 0.5 * dx * z;
                let r = rho0(x);
                s[0] += w * r;
                s[1] += w * r * u0(x);
            }
            s
        })
        .collect();
    if let Some(min) = q.iter().map(|s| s[0]).reduce(f64::min) {
        if !(min > 0.0) {
            return Err(BgkError::VacuumInProfile(min));
        }
    }
    let base = sys.invariant_gradient(&q);
    let mut growth: f64 = 1.0;
    let mut t = 0.0;
    let mut steps = 0;
    while t < horizon {
        let speed = sys.max_speed(&q);
        let mut dt = if speed > 0.0 { EULER_CFL * dx / speed } else { horizon - t };
        if t + dt >= horizon {
            dt = horizon - t;
        }
        let k1 = sys.rate(&q);
        let q1: Vec<[f64; 2]> = q.iter().zip(&k1).map(|(a, k)| [a[0] + dt * k[0], a[1] + dt * k[1]]).collect();
        let k2 = sys.rate(&q1);
        q = q
            .iter()
            .zip(q1.iter().zip(&k2))
            .map(|(a, (b, k))| [0.5 * a[0] + 0.5 * (b[0] + dt * k[0]), 0.5 * a[1] + 0.5 * (b[1] + dt * k[1])])
            .collect();
        t = if t + dt >= horizon { horizon } else { t + dt };
        steps += 1;
        if base > 0.0 {
            growth = growth.max(sys.invariant_gradient(&q) / base);
            if growth > BLOWUP_FACTOR {
                return Err(BgkError::BlowupSuspected { time: t, factor: growth });
            }
        }
    }
    let ratio = nx_ref / nx_out;
    let avg = |k: usize| -> Vec<f64> {
        (0..nx_out).map(|i| pairwise_sum(ratio, |j| q[i * ratio + j][k]) / ratio as f64).collect()
    };
    Ok(EulerSolution { rho: avg(0), momentum: avg(1), steps, gradient_growth: growth })
}

/// One member of a relaxation-time sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub tau: f64,
    pub j: f64,
    pub l1_err_rho: f64,
    pub l1_err_momentum: f64,
    pub steps: usize,
    pub runtime_s: f64,
}

/// Settings of a sweep beyond the profiles and the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub horizon: f64,
    pub nx_ref: usize,
    pub interpolation: Interpolation,
}

/// Runs the kinetic model from identical well-prepared data for every
/// relaxation time and compares with the Euler reference at the horizon.
pub fn tau_sweep<R, U>(
    rho0: R,
    u0: U,
    taus: &[f64],
    settings: SweepSettings,
    grid: &Arc<PhaseGrid>,
    params: &ModelParams,
) -> Result<Vec<SweepResult>>
where
    R: Fn(f64) -> f64 + Sync,
    U: Fn(f64) -> f64 + Sync,
{
    if grid.n() != 1 || grid.mode() != DomainMode::Periodic {
        return Err(BgkError::InvalidArgument("the sweep needs a periodic 1D grid".into()));
    }
    let base = params.with_epsilon(0.0)?;
    let reference = euler_reference(
        &rho0,
        &u0,
        base.gamma(),
        base.kappa(),
        settings.horizon,
        settings.nx_ref,
        (grid.x_min()[0], grid.x_max()[0]),
        grid.nx()[0],
    )?;
    let f0 = well_prepared_init(|x| rho0(x[0]), |x| [u0(x[0]), 0.0], grid, &base)?;
    taus.par_iter()
        .map(|&tau| {
            let start = Instant::now();
            let p = base.with_tau(tau)?;
            let mut cfg = SolverConfig::new(tau / STEPS_PER_TAU, settings.horizon);
            cfg.interpolation = settings.interpolation;
            let out = run_simulation(&f0, &cfg, &p)?;
            let j = j_functional(&out.trajectory, &p, settings.horizon)?;
            let last = out.trajectory.last().expect("final frame");
            let mac = moments(last);
            let dx = grid.dx()[0];
            let n = mac.rho.len();
            let l1_err_rho = pairwise_sum(n, |c| (mac.rho[c] - reference.rho[c]).abs()) * dx;
            let l1_err_momentum = pairwise_sum(n, |c| (mac.momentum[c][0] - reference.momentum[c]).abs()) * dx;
            Ok(SweepResult {
                tau,
                j,
                l1_err_rho,
                l1_err_momentum,
                steps: out.steps,
                runtime_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Least-squares line through `(log tau, log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub order: f64,
    pub r_squared: f64,
    pub intercept: f64,
}

impl OrderFit {
    /// Fitted value at `tau`.
    pub fn predict(&self, tau: f64) -> f64 {
        (self.intercept + self.order * tau.ln()).exp()
    }
}

pub fn convergence_order_fit(pairs: &[(f64, f64)]) -> Result<OrderFit> {
    if pairs.len() < 3 {
        return Err(BgkError::TooFewPoints(pairs.len()));
    }
    for &(t, v) in pairs {
        if !(t > 0.0) {
            return Err(BgkError::NonPositiveValue(t));
        }
        if !(v > 0.0) {
            return Err(BgkError::NonPositiveValue(v));
        }
    }
    let k = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BgkError::InvalidArgument("all abscissae coincide".into()));
    }
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - order * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(OrderFit { order, r_squared, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn exact_power_laws() {
        let taus = [0.1, 0.05, 0.025, 0.0125];
        let fit = convergence_order_fit(&taus.map(|t| (t, t))).unwrap();
        assert!((fit.order - 1.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        let fit = convergence_order_fit(&taus.map(|t| (t, t.sqrt()))).unwrap();
        assert!((fit.order - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<(f64, f64)> =
            (0..8).map(|i| 0.2 / 2f64.powi(i)).map(|t| (t, t.sqrt() * (1.0 + rng.gen_range(-0.05..0.05)))).collect();
        let fit = convergence_order_fit(&noisy).unwrap();
        assert!((0.4..=0.6).contains(&fit.order));
        assert_eq!(convergence_order_fit(&[(1.0, 1.0), (0.5, 0.5)]), Err(BgkError::TooFewPoints(2)));
        assert!(matches!(
            convergence_order_fit(&[(1.0, 1.0), (0.5, 0.0), (0.2, 1.0)]),
            Err(BgkError::NonPositiveValue(_))
        ));
    }

    #[test]
    fn constant_state_is_preserved() {
        let s = euler_reference(|_| 1.3, |_| 0.2, 2.0, 1.0, 0.1, 64, (0.0, 1.0), 16).unwrap();
        assert!(s.rho.iter().all(|r| (r - 1.3).abs() < 1e-13));
        assert!(s.momentum.iter().all(|m| (m - 0.26).abs() < 1e-13));
    }

    #[test]
    fn sine_wave_conserves_and_self_converges() {
        let rho0 = |x: f64| 1.0 + 0.1 * (2.0 * PI * x).sin();
        let a = euler_reference(rho0, |_| 0.0, 2.0, 1.0, 0.05, 512, (0.0, 1.0), 64).unwrap();
        let b = euler_reference(rho0, |_| 0.0, 2.0, 1.0, 0.05, 1024, (0.0, 1.0), 64).unwrap();
        let diff: f64 = a.rho.iter().zip(&b.rho).map(|(x, y)| (x - y).abs()).sum::<f64>() / 64.0;
        assert!(diff <= 1e-4, "{diff}");
        let mom: f64 = a.momentum.iter().sum::<f64>() / 64.0;
        assert!(mom.abs() < 1e-10, "{mom}");
        let mass: f64 = a.rho.iter().sum::<f64>() / 64.0;
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn vacuum_is_rejected() {
        let grid = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 8, (-3.0, 3.0), 32, DomainMode::Periodic).unwrap());
        let p = ModelParams::new(1, 2.0, 1.0, 0.1, 0.0).unwrap();
        let r = well_prepared_init(|x| (x[0] - 0.5).abs() - 0.2, |_| [0.0; 2], &grid, &p);
        assert!(matches!(r, Err(BgkError::VacuumInProfile(_))));
    }
}
