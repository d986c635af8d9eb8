//! Maxwellian equilibria, kinetic entropy and entropy dissipation.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{BgkError, Result};
use crate::params::{unit_ball_volume, ModelParams};
use crate::phase_space::{DistributionField, MacroField, PhaseGrid};
use crate::summation::pairwise_sum;

/// Real number or `+inf`, with `+inf` absorbing under addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }

    /// `+inf` maps to `f64::INFINITY`, for reporting only.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn scale(self, k: f64) -> Self {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(x * k),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }

    /// Pairwise sum of a sequence of extended reals.
    pub fn sum(values: &[ExtendedReal]) -> Self {
        if values.iter().any(|v| v.is_infinite()) {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(pairwise_sum(values.len(), |i| values[i].to_f64()))
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::Infinite) => Some(Ordering::Less),
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => Some(Ordering::Greater),
            (ExtendedReal::Infinite, ExtendedReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x:e}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Macroscopic state defining one Maxwellian.
#[derive(Debug, Clone, Copy)]
pub struct MaxwellianSpec<'a> {
    pub rho: f64,
    pub u: [f64; 2],
    pub params: &'a ModelParams,
}

impl<'a> MaxwellianSpec<'a> {
    pub fn new(rho: f64, u: [f64; 2], params: &'a ModelParams) -> Self {
        Self { rho, u, params }
    }

    pub fn radius_sq(&self) -> f64 {
        self.params.support_radius_sq(self.rho)
    }

    pub fn eval(&self, v: [f64; 2]) -> f64 {
        eval_maxwellian(self, v)
    }
}

/// Power profile `c2 (r^2 - w^2)_+^{d/2}` or its endpoint indicator.
#[inline]
pub(crate) fn profile_value(params: &ModelParams, radius_sq: f64, dist_sq: f64) -> f64 {
    if params.is_endpoint() {
        if dist_sq <= radius_sq && radius_sq > 0.0 {
            params.c2()
        } else {
            0.0
        }
    } else {
        let gap = radius_sq - dist_sq;
        if gap <= 0.0 {
            return 0.0;
        }
        let half_d = 0.5 * params.d();
        let twice = 2.0 * half_d;
        if twice <= 16.0 && twice.fract() == 0.0 {
            let whole = gap.powi(half_d.floor() as i32);
            params.c2() * if twice as i32 % 2 == 1 { whole * gap.sqrt() } else { whole }
        } else if half_d <= 32.0 {
            params.c2() * gap.powf(half_d)
        } else {
            (params.ln_c2() + half_d * gap.ln()).exp()
        }
    }
}

#[inline]
fn dist_sq(v: [f64; 2], u: [f64; 2]) -> f64 {
    let a = v[0] - u[0];
    let b = v[1] - u[1];
    a * a + b * b
}

/// Value of `M[rho, u]` at velocity `v`.
pub fn eval_maxwellian(spec: &MaxwellianSpec<'_>, v: [f64; 2]) -> f64 {
    if spec.rho <= 0.0 {
        return 0.0;
    }
    profile_value(spec.params, spec.radius_sq(), dist_sq(v, spec.u))
}

/// Fills `out` with `M[rho, u]` sampled at the grid's velocity nodes.
pub fn fill_maxwellian(grid: &PhaseGrid, params: &ModelParams, rho: f64, u: [f64; 2], out: &mut [f64]) {
    if rho <= 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let r2 = params.support_radius_sq(rho);
    for (j, o) in out.iter_mut().enumerate() {
        *o = profile_value(params, r2, dist_sq(grid.velocity(j), u));
    }
}

/// Cellwise Maxwellian of a macroscopic field, optionally at the
/// regularized arguments.
pub fn build_maxwellian_field(
    mac: &MacroField,
    grid: &Arc<PhaseGrid>,
    params: &ModelParams,
    use_regularized: bool,
) -> Result<DistributionField> {
    if use_regularized && (mac.rho_eps.is_none() || mac.u_eps.is_none()) {
        return Err(BgkError::MissingRegularizedMoments);
    }
    if mac.len() != grid.num_cells() {
        return Err(BgkError::GridMismatch);
    }
    let nvt = grid.nv_total();
    let mut values = vec![0.0; grid.len()];
    values.par_chunks_mut(nvt).enumerate().for_each(|(c, chunk)| {
        let (rho, u) = mac.equilibrium_args(c, use_regularized).expect("checked above");
        fill_maxwellian(grid, params, rho, u, chunk);
    });
    DistributionField::from_values(grid.clone(), values, 0.0)
}

/// Kinetic entropy density `H(f, v)`.
pub fn entropy_density(f: f64, speed_sq: f64, params: &ModelParams) -> ExtendedReal {
    let kinetic = 0.5 * speed_sq * f;
    if params.is_endpoint() {
        if f > params.c2() {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(kinetic)
        }
    } else if f <= 0.0 {
        ExtendedReal::Finite(kinetic)
    } else {
        let p = 1.0 + 2.0 / params.d();
        let internal = (p * f.ln() - 2.0 * params.ln_c2() / params.d()).exp() / (2.0 * p);
        ExtendedReal::Finite(kinetic + internal)
    }
}

/// `sum_v H(f, v) dv` over one velocity block.
pub fn cell_entropy(grid: &PhaseGrid, cell: &[f64], params: &ModelParams) -> ExtendedReal {
    let c2 = params.c2();
    if params.is_endpoint() && cell.iter().any(|&x| x > c2) {
        return ExtendedReal::Infinite;
    }
    let s = pairwise_sum(cell.len(), |j| entropy_density(cell[j], grid.speed_sq(j), params).to_f64());
    ExtendedReal::Finite(s * grid.velocity_volume())
}

/// `1/2 rho |u|^2 + kappa rho^gamma / (gamma - 1)`.
pub fn maxwellian_entropy_value(rho: f64, u: [f64; 2], params: &ModelParams) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    0.5 * rho * (u[0] * u[0] + u[1] * u[1]) + params.pressure(rho) / (params.gamma() - 1.0)
}

/// Closed-form Maxwellian entropy of every cell.
pub fn maxwellian_entropy(mac: &MacroField, params: &ModelParams) -> Vec<f64> {
    (0..mac.len()).map(|c| maxwellian_entropy_value(mac.rho[c], mac.u[c], params)).collect()
}

/// Same at the regularized arguments.
pub fn regularized_maxwellian_entropy(mac: &MacroField, params: &ModelParams) -> Result<Vec<f64>> {
    (0..mac.len()).map(|c| mac.equilibrium_args(c, true).map(|(r, u)| maxwellian_entropy_value(r, u, params))).collect()
}

/// Lower bound on `sum_v H(f) dv - H(M)` valid for any discrete `f` of mass
/// `rho` on a midpoint grid with spacings `dv`.
///
/// Reading `f` as piecewise constant over velocity cells keeps its mass and
/// momentum and raises its second moment by exactly `rho sum_k dv_k^2 / 12`,
/// so the continuous minimization principle gives this defect.
pub fn quadrature_tolerance(rho: f64, dv: &[f64]) -> f64 {
    rho.max(0.0) * dv.iter().map(|h| h * h).sum::<f64>() / 24.0
}

/// Per-cell dissipation and flagged cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub values: Vec<ExtendedReal>,
    pub raw: Vec<ExtendedReal>,
    pub tolerance: Vec<f64>,
    pub violations: Vec<usize>,
}

/// `D_f = sum_v H(f) dv - H(M[f])` per cell, clamped at zero within the
/// quadrature tolerance.
pub fn dissipation(f: &DistributionField, mac: &MacroField, params: &ModelParams) -> DissipationReport {
    let h_m = maxwellian_entropy(mac, params);
    dissipation_against(f, mac, &h_m, params)
}

/// Dissipation against precomputed equilibrium entropies.
pub fn dissipation_against(
    f: &DistributionField,
    mac: &MacroField,
    equilibrium_entropy: &[f64],
    params: &ModelParams,
) -> DissipationReport {
    let grid = f.grid();
    let per_cell: Vec<(ExtendedReal, ExtendedReal, f64)> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let h = cell_entropy(grid, f.cell(c), params);
            let tol =
                quadrature_tolerance(mac.rho[c], grid.dv()) + 1e-12 * (h.to_f64().abs() + equilibrium_entropy[c].abs());
            match h {
                ExtendedReal::Infinite => (ExtendedReal::Infinite, ExtendedReal::Infinite, tol),
                ExtendedReal::Finite(x) => {
                    let raw = x - equilibrium_entropy[c];
                    (ExtendedReal::Finite(raw.max(0.0)), ExtendedReal::Finite(raw), tol)
                }
            }
        })
        .collect();
    let mut values = Vec::with_capacity(per_cell.len());
    let mut raw = Vec::with_capacity(per_cell.len());
    let mut tolerance = Vec::with_capacity(per_cell.len());
    let mut violations = Vec::new();
    for (c, (v, r, t)) in per_cell.into_iter().enumerate() {
        if let ExtendedReal::Finite(x) = r {
            if x < -t {
                violations.push(c);
            }
        }
        values.push(v);
        raw.push(r);
        tolerance.push(t);
    }
    DissipationReport { values, raw, tolerance, violations }
}

/// Outcome of the endpoint counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleReport {
    pub rho: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

/// Second moment of `a 1_{|v| <= r}` against `kappa n rho^{1+2/n}`.
pub fn counterexample_report(a: f64, r: f64, params: &ModelParams) -> Result<CounterexampleReport> {
    if !params.is_endpoint() {
        return Err(BgkError::InvalidArgument("the counterexample needs gamma = (n+2)/n".into()));
    }
    if !(r > 0.0) {
        return Err(BgkError::NonPositiveParameter { name: "r", value: r });
    }
    if !(a > params.c2()) {
        return Err(BgkError::NotAboveC2 { a, c2: params.c2() });
    }
    let n = params.n() as f64;
    let ball = unit_ball_volume(params.n());
    let rho = a * ball * r.powf(n);
    let lhs = ball * r.powf(n + 2.0) * a * n / (n + 2.0);
    let rhs = params.kappa() * n * rho.powf(1.0 + 2.0 / n);
    Ok(CounterexampleReport { rho, lhs, rhs, violated: rhs > lhs })
}

/// The same two quantities by midpoint quadrature on a velocity grid.
pub fn counterexample_quadrature(
    a: f64,
    r: f64,
    params: &ModelParams,
    grid: &PhaseGrid,
) -> Result<CounterexampleReport> {
    counterexample_report(a, r, params)?;
    let nvt = grid.nv_total();
    let dvol = grid.velocity_volume();
    let box_f = |j: usize| if grid.speed_sq(j) <= r * r { a } else { 0.0 };
    let rho = pairwise_sum(nvt, box_f) * dvol;
    let lhs = pairwise_sum(nvt, |j| grid.speed_sq(j) * box_f(j)) * dvol;
    let n = params.n() as f64;
    let rhs = params.kappa() * n * rho.powf(1.0 + 2.0 / n);
    Ok(CounterexampleReport { rho, lhs, rhs, violated: rhs > lhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{moments, DomainMode};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn p(n: usize, g: f64) -> ModelParams {
        ModelParams::new(n, g, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn pointwise_values() {
        let params = p(1, 2.0);
        let spec = MaxwellianSpec::new(1.0, [0.0; 2], &params);
        assert_relative_eq!(spec.eval([0.0, 0.0]), 1.0 / PI, max_relative = 1e-13);
        assert_eq!(MaxwellianSpec::new(0.0, [3.0, 0.0], &params).eval([3.0, 0.0]), 0.0);
        let end = p(1, 3.0);
        let spec = MaxwellianSpec::new(1.0, [0.0; 2], &end);
        assert_eq!(spec.eval([6f64.sqrt() * 1.01, 0.0]), 0.0);
        assert_eq!(spec.eval([-6f64.sqrt() * 1.01, 0.0]), 0.0);
        assert_relative_eq!(spec.eval([0.0, 0.0]), 1.0 / (2.0 * 3f64.sqrt()), max_relative = 1e-13);
    }

    #[test]
    fn large_d_profile_uses_logs_consistently() {
        let params = p(1, 1.02);
        let spec = MaxwellianSpec::new(1.3, [0.2, 0.0], &params);
        let v = [0.7, 0.0];
        let direct = params.c2() * (spec.radius_sq() - 0.25).powf(0.5 * params.d());
        assert_relative_eq!(spec.eval(v), direct, max_relative = 1e-11);
    }

    #[test]
    fn entropy_sentinel_and_order() {
        let end = p(1, 3.0);
        assert!(entropy_density(end.c2() * 1.01, 0.0, &end).is_infinite());
        assert_eq!(entropy_density(end.c2(), 4.0, &end), ExtendedReal::Finite(2.0 * end.c2()));
        assert_eq!(entropy_density(0.0, 1.0, &p(1, 2.0)), ExtendedReal::Finite(0.0));
        assert!(ExtendedReal::Finite(1e300) < ExtendedReal::Infinite);
        assert!((ExtendedReal::Finite(1.0) + ExtendedReal::Infinite).is_infinite());
    }

    #[test]
    fn closed_form_entropies() {
        let params = p(1, 2.0);
        assert_eq!(maxwellian_entropy_value(0.0, [1.0, 0.0], &params), 0.0);
        assert_relative_eq!(maxwellian_entropy_value(1.0, [0.0; 2], &params), 1.0);
        let q = p(1, 1.5);
        assert_relative_eq!(
            maxwellian_entropy_value(2.0, [3.0, 0.0], &q),
            9.0 + 4.0 * 2f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn equilibrium_dissipation_vanishes() {
        let params = p(1, 2.0);
        let grid = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 2, (-4.0, 4.0), 4096, DomainMode::Periodic).unwrap());
        let mac = MacroField::uniform(1, 2, 1.0, [0.0; 2]);
        let f = build_maxwellian_field(&mac, &grid, &params, false).unwrap();
        let rep = dissipation(&f, &moments(&f), &params);
        assert!(rep.violations.is_empty());
        assert!(rep.values.iter().all(|d| d.to_f64() < 1e-4));
        let h = cell_entropy(&grid, f.cell(0), &params).to_f64();
        assert!((h - 1.0).abs() < 1e-4);
    }

    #[test]
    fn over_cap_box_has_infinite_dissipation() {
        let params = p(1, 3.0);
        let grid = Arc::new(PhaseGrid::velocity_only(1, (-2.0, 2.0), 400).unwrap());
        let f = DistributionField::from_fn(grid, |_, v| if v[0].abs() <= 1.0 { 0.5 } else { 0.0 });
        let rep = dissipation(&f, &moments(&f), &params);
        assert!(rep.values[0].is_infinite());
    }

    #[test]
    fn counterexample_closed_forms() {
        let end1 = p(1, 3.0);
        let r = counterexample_report(0.5, 1.0, &end1).unwrap();
        assert_relative_eq!(r.rho, 1.0, max_relative = 1e-14);
        assert_relative_eq!(r.lhs, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(r.rhs, 1.0, max_relative = 1e-14);
        assert!(r.violated);
        let end2 = p(2, 2.0);
        let r = counterexample_report(0.2, 1.0, &end2).unwrap();
        assert_relative_eq!(r.rho, 0.2 * PI, max_relative = 1e-14);
        assert_relative_eq!(r.lhs, 0.1 * PI, max_relative = 1e-14);
        assert_relative_eq!(r.rhs, 2.0 * (0.2 * PI).powi(2), max_relative = 1e-14);
        let marginal = counterexample_report(end1.c2() * 1.0001, 1.0, &end1).unwrap();
        assert!(marginal.violated);
        assert!(matches!(counterexample_report(end1.c2(), 1.0, &end1), Err(BgkError::NotAboveC2 { .. })));
    }
}
