//! Bound evaluators for the ball and Maxwellian stability estimates and for
//! the dissipation control.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::discrete_maxwellian;
use crate::error::{BgkError, Result};
use crate::maxwellian::{cell_entropy, fill_maxwellian, MaxwellianSpec};
use crate::params::{stability_constant, unit_ball_volume, ModelParams};
use crate::phase_space::{cell_moments, norm, PhaseGrid};
use crate::summation::pairwise_sum;

pub const MONTE_CARLO_SEED: u64 = 0x5EED;
pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;
/// Lattice cells along each of the first `n - 1` axes in the grid method.
pub const BALL_LATTICE_CELLS: usize = 1 << 14;
/// Default empirical constant for the dissipation control.
pub const DEFAULT_CONTROL_CONSTANT: f64 = 10.0;
const Z_99: f64 = 2.575_829_303_548_901;

/// Measured quantity against its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub satisfied: bool,
    pub tol: f64,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self { lhs, rhs, ratio, satisfied: lhs <= rhs * (1.0 + tol), tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallMethod {
    Grid,
    MonteCarlo,
}

/// Measure of a symmetric difference, with a 99% half-width for sampled estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDistance {
    pub value: f64,
    pub half_width: Option<f64>,
}

fn chord(r: f64, offset: f64) -> f64 {
    let s = r * r - offset * offset;
    if s > 0.0 {
        s.sqrt()
    } else {
        0.0
    }
}

fn interval_gap(center_a: f64, center_b: f64, half_a: f64, half_b: f64) -> f64 {
    let overlap = ((center_a + half_a).min(center_b + half_b) - (center_a - half_a).max(center_b - half_b)).max(0.0);
    2.0 * half_a + 2.0 * half_b - 2.0 * overlap
}

/// `|B_r(c_a) symmetric-difference B_r(c_b)|` in dimension `n` in {1, 2}.
pub fn ball_l1_distance(r: f64, c_a: [f64; 2], c_b: [f64; 2], n: usize, method: BallMethod) -> Result<BallDistance> {
    if !(r > 0.0) {
        return Err(BgkError::NonPositiveParameter { name: "r", value: r });
    }
    if n != 1 && n != 2 {
        return Err(BgkError::UnsupportedDimension(n));
    }
    match method {
        BallMethod::Grid => {
            let value = if n == 1 {
                interval_gap(c_a[0], c_b[0], r, r)
            } else {
                // Lattice along the first axis, exact chords along the second.
                let lo = c_a[0].min(c_b[0]) - r;
                let hi = c_a[0].max(c_b[0]) + r;
                let h = (hi - lo) / BALL_LATTICE_CELLS as f64;
                pairwise_sum(BALL_LATTICE_CELLS, |i| {
                    let x = lo + (i as f64 + 0.5) * h;
                    interval_gap(c_a[1], c_b[1], chord(r, x - c_a[0]), chord(r, x - c_b[0]))
                }) * h
            };
            Ok(BallDistance { value, half_width: None })
        }
        BallMethod::MonteCarlo => {
            let mut lo = [0.0; 2];
            let mut hi = [0.0; 2];
            let mut volume = 1.0;
            for k in 0..n {
                lo[k] = c_a[k].min(c_b[k]) - r;
                hi[k] = c_a[k].max(c_b[k]) + r;
                volume *= hi[k] - lo[k];
            }
            let mut rng = ChaCha8Rng::seed_from_u64(MONTE_CARLO_SEED);
            let mut hits = 0usize;
            for _ in 0..MONTE_CARLO_SAMPLES {
                let mut p = [0.0; 2];
                for k in 0..n {
                    p[k] = rng.gen_range(lo[k]..hi[k]);
                }
                let ia = norm(&[p[0] - c_a[0], p[1] - c_a[1]]) < r;
                let ib = norm(&[p[0] - c_b[0], p[1] - c_b[1]]) < r;
                hits += (ia != ib) as usize;
            }
            let p = hits as f64 / MONTE_CARLO_SAMPLES as f64;
            Ok(BallDistance {
                value: volume * p,
                half_width: Some(Z_99 * volume * (p * (1.0 - p) / MONTE_CARLO_SAMPLES as f64).sqrt()),
            })
        }
    }
}

/// `2 |B_{n-1}| r^{n-1} |c_a - c_b|`.
pub fn ball_stability_bound(r: f64, c_a: [f64; 2], c_b: [f64; 2], n: usize) -> f64 {
    let dc = norm(&[c_a[0] - c_b[0], c_a[1] - c_b[1]]);
    2.0 * unit_ball_volume(n - 1) * r.powi(n as i32 - 1) * dc
}

/// Errors unless both Maxwellian supports fit in the velocity box of `grid`.
pub fn check_supports_fit(specs: &[MaxwellianSpec<'_>], grid: &PhaseGrid) -> Result<()> {
    for spec in specs {
        if spec.rho <= 0.0 {
            continue;
        }
        let r = spec.radius_sq().sqrt();
        for k in 0..grid.n() {
            let (a, b) = (grid.v_min()[k], grid.v_max()[k]);
            if spec.u[k] - r < a || spec.u[k] + r > b {
                let reach = (spec.u[k] + r).max(-(spec.u[k] - r));
                return Err(BgkError::SupportExceedsGrid { reach, limit: a.abs().min(b.abs()) });
            }
        }
    }
    Ok(())
}

fn weighted_distance(
    spec_a: &MaxwellianSpec<'_>,
    spec_b: &MaxwellianSpec<'_>,
    grid: &PhaseGrid,
    weighted: bool,
) -> Result<f64> {
    check_supports_fit(&[*spec_a, *spec_b], grid)?;
    let nvt = grid.nv_total();
    let mut a = vec![0.0; nvt];
    let mut b = vec![0.0; nvt];
    fill_maxwellian(grid, spec_a.params, spec_a.rho, spec_a.u, &mut a);
    fill_maxwellian(grid, spec_b.params, spec_b.rho, spec_b.u, &mut b);
    Ok(pairwise_sum(nvt, |j| {
        let w = if weighted { 1.0 + grid.speed_sq(j) } else { 1.0 };
        w * (a[j] - b[j]).abs()
    }) * grid.velocity_volume())
}

/// `sum_v |M_a - M_b| dv` on the velocity grid of `grid`.
pub fn maxwellian_l1_distance(
    spec_a: &MaxwellianSpec<'_>,
    spec_b: &MaxwellianSpec<'_>,
    grid: &PhaseGrid,
) -> Result<f64> {
    weighted_distance(spec_a, spec_b, grid, false)
}

/// `sum_v (1 + |v|^2) |M_a - M_b| dv`.
pub fn maxwellian_weighted_l1_distance(
    spec_a: &MaxwellianSpec<'_>,
    spec_b: &MaxwellianSpec<'_>,
    grid: &PhaseGrid,
) -> Result<f64> {
    weighted_distance(spec_a, spec_b, grid, true)
}

/// `|rho_a - rho_b| + 2 L^theta min(rho)^{1 - theta (gamma-1)/2} |u_a - u_b|^theta`
/// with `L` the stability constant of `params`.
pub fn stability_bound_theta(
    rho_a: f64,
    rho_b: f64,
    u_a: [f64; 2],
    u_b: [f64; 2],
    theta: f64,
    params: &ModelParams,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(BgkError::ThetaOutOfRange(theta));
    }
    let du = norm(&[u_a[0] - u_b[0], u_a[1] - u_b[1]]);
    let rho_min = rho_a.min(rho_b);
    let lam = stability_constant(params);
    let exp = 1.0 - theta * (params.gamma() - 1.0) / 2.0;
    let u_term = if rho_min <= 0.0 { 0.0 } else { 2.0 * lam.powf(theta) * rho_min.powf(exp) * du.powf(theta) };
    Ok((rho_a - rho_b).abs() + u_term)
}

/// Largest speed in the support of any Maxwellian with `rho, |u| <= c0`.
pub fn support_speed(c0: f64, params: &ModelParams) -> f64 {
    let r2 = params.c1() * c0.powf(params.gamma() - 1.0);
    c0 + r2.max(r2.sqrt())
}

/// `(1 + (C0 + R)^2)` times the `theta = 1` bound, for inputs capped by `C0`.
pub fn weighted_stability_bound(
    rho_a: f64,
    rho_b: f64,
    u_a: [f64; 2],
    u_b: [f64; 2],
    c0: f64,
    params: &ModelParams,
) -> Result<f64> {
    for (what, value) in [("rho_a", rho_a), ("rho_b", rho_b), ("|u_a|", norm(&u_a)), ("|u_b|", norm(&u_b))] {
        if value > c0 {
            return Err(BgkError::BoundExceeded { what, value, cap: c0 });
        }
    }
    let s = support_speed(c0, params);
    Ok((1.0 + s * s) * stability_bound_theta(rho_a, rho_b, u_a, u_b, 1.0, params)?)
}

/// Lipschitz constant of `f -> M^eps[f]` in the weighted L1 norm per cell.
pub fn regularized_contraction_constant(params: &ModelParams) -> Result<f64> {
    let eps = params.epsilon();
    if !(eps > 0.0) {
        return Err(BgkError::EpsilonNonPositive(eps));
    }
    let cap = 1.0 / eps;
    let s = support_speed(cap, params);
    let rho_power = eps.powf((params.gamma() - 1.0) / 2.0 - 1.0);
    let lam = stability_constant(params);
    Ok((1.0 + s * s) * (1.0 + 2.0 * lam * rho_power * (2.0 / eps + 1.0 / (eps * eps))))
}

/// Dissipation-control measurement for one velocity block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationControl {
    /// `sum_v |v|^2 |f - M[f]| dv`.
    pub moment_gap: f64,
    /// Entropy excess over the discrete equilibrium, `>= 0`.
    pub dissipation: f64,
    /// `rho^{gamma/2} sqrt(D) + D`.
    pub core: f64,
    /// `lhs = moment_gap`, `rhs = constant * core`.
    pub report: BoundReport,
}

impl DissipationControl {
    /// `moment_gap / core`.
    pub fn core_ratio(&self) -> f64 {
        if self.core > 0.0 {
            self.moment_gap / self.core
        } else if self.moment_gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compares `sum |v|^2 |f - M[f]|` with `rho^{gamma/2} sqrt(D) + D` for one
/// block, using the moment-matched equilibrium on the same velocity grid.
pub fn dissipation_control_check(
    grid: &PhaseGrid,
    cell: &[f64],
    params: &ModelParams,
    constant: f64,
) -> Result<DissipationControl> {
    let h = cell_entropy(grid, cell, params).finite().ok_or(BgkError::InfiniteEntropy { cell: 0 })?;
    let (rho, m) = cell_moments(grid, cell, grid.velocity_volume());
    let mut eq = vec![0.0; cell.len()];
    discrete_maxwellian(grid, params, rho, m, &mut eq);
    let h_eq = cell_entropy(grid, &eq, params).to_f64();
    let dissipation = (h - h_eq).max(0.0);
    let moment_gap = pairwise_sum(cell.len(), |j| grid.speed_sq(j) * (cell[j] - eq[j]).abs()) * grid.velocity_volume();
    let core = rho.max(0.0).powf(params.gamma() / 2.0) * dissipation.sqrt() + dissipation;
    let report = BoundReport::new(moment_gap, constant * core, 0.0);
    Ok(DissipationControl { moment_gap, dissipation, core, report })
}
