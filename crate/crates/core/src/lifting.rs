//! The second kinetic model with an internal-energy variable `I >= 0`.
//!
//! A value `f` is lifted to an indicator in `I` of height `c3`; integrating
//! against `c0 I^{d-1}` recovers `f`, and against `I^2 c0 I^{d-1}` recovers the
//! convex part of the entropy. The `I` axis is a uniform grid whose cells are
//! integrated exactly, so indicator integrands carry no quadrature error.

use crate::error::{BgkError, Result};
use crate::maxwellian::{cell_entropy, MaxwellianSpec};
use crate::params::ModelParams;
use crate::phase_space::PhaseGrid;
use crate::summation::pairwise_sum;

/// Default number of cells on the internal-energy axis.
pub const DEFAULT_I_CELLS: usize = 4096;

/// Value of the second Maxwellian at `(v, I)`.
pub fn eval_second_maxwellian(spec: &MaxwellianSpec<'_>, v: [f64; 2], i: f64) -> Result<f64> {
    let params = spec.params;
    if params.is_endpoint() {
        return Err(BgkError::EndpointUnsupported);
    }
    if spec.rho <= 0.0 {
        return Ok(0.0);
    }
    let w2 = (v[0] - spec.u[0]).powi(2) + (v[1] - spec.u[1]).powi(2);
    Ok(if w2 + i * i < spec.radius_sq() { params.c3() } else { 0.0 })
}

/// Cut-off in `I` of the lifted value `f`.
pub fn lift_cutoff(f_value: f64, params: &ModelParams) -> Result<f64> {
    if params.is_endpoint() {
        return Err(BgkError::EndpointUnsupported);
    }
    if f_value <= 0.0 {
        return Ok(0.0);
    }
    Ok(((f_value.ln() - params.ln_c2()) / params.d()).exp())
}

/// Lifted value of `f` at internal energy `I`.
pub fn lift_distribution(f_value: f64, i: f64, params: &ModelParams) -> Result<f64> {
    if f_value < 0.0 {
        return Err(BgkError::InvalidArgument(format!("negative value {f_value}")));
    }
    let cut = lift_cutoff(f_value, params)?;
    Ok(if f_value > 0.0 && i <= cut { params.c3() } else { 0.0 })
}

/// Uniform grid on `[0, i_max]` for the internal-energy variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalGrid {
    pub i_max: f64,
    pub cells: usize,
}

impl InternalGrid {
    pub fn new(i_max: f64, cells: usize) -> Result<Self> {
        if !(i_max > 0.0) || cells == 0 {
            return Err(BgkError::InvalidArgument("internal grid needs i_max > 0 and cells > 0".into()));
        }
        Ok(Self { i_max, cells })
    }

    pub fn step(&self) -> f64 {
        self.i_max / self.cells as f64
    }

    /// `sum_k int_{cell k} c3 1_{I <= cut} I^m c0 I^{d-1} dI` for `m` in {0, 2},
    /// each cell integrated exactly.
    pub fn indicator_moment(&self, cut: f64, m: u32, params: &ModelParams) -> Result<f64> {
        let c0 = params.c0().ok_or(BgkError::EndpointUnsupported)?;
        if cut <= 0.0 {
            return Ok(0.0);
        }
        let p = params.d() + m as f64;
        // Normalize by i_max^p so that large exponents stay representable.
        let scale = (params.c3().ln() + c0.ln() - p.ln() + p * self.i_max.ln()).exp();
        let h = self.step();
        let cut_n = (cut / self.i_max).min(1.0);
        let s = pairwise_sum(self.cells, |k| {
            let lo = k as f64 * h / self.i_max;
            if lo >= cut_n {
                return 0.0;
            }
            let hi = ((k + 1) as f64 * h / self.i_max).min(cut_n);
            hi.powf(p) - lo.powf(p)
        });
        Ok(scale * s)
    }

    /// Plain midpoint sum of `c0 I^{d-1} g(I)` for a pointwise integrand.
    pub fn midpoint_sum<G: Fn(f64) -> f64>(&self, g: G, params: &ModelParams) -> Result<f64> {
        let c0 = params.c0().ok_or(BgkError::EndpointUnsupported)?;
        let h = self.step();
        let d = params.d();
        Ok(pairwise_sum(self.cells, |k| {
            let i = (k as f64 + 0.5) * h;
            c0 * i.powf(d - 1.0) * g(i)
        }) * h)
    }
}

/// Dissipation of one velocity block computed through the lifted model.
///
/// Returns `sum_v int 1/2 (|v|^2 + I^2)(lift f - lift M) c0 I^{d-1} dI dv`,
/// where `M` is sampled at the block's own moments `(rho, u)`.
pub fn lifted_dissipation(
    grid: &PhaseGrid,
    cell: &[f64],
    rho: f64,
    u: [f64; 2],
    params: &ModelParams,
    cells: usize,
) -> Result<f64> {
    if params.is_endpoint() {
        return Err(BgkError::EndpointUnsupported);
    }
    let spec = MaxwellianSpec::new(rho, u, params);
    let r2 = spec.radius_sq();
    let mut i_max = r2.sqrt();
    for &x in cell {
        i_max = i_max.max(lift_cutoff(x, params)?);
    }
    if i_max <= 0.0 {
        return Ok(0.0);
    }
    let igrid = InternalGrid::new(i_max, cells)?;
    let mut terms = Vec::with_capacity(cell.len());
    for (j, &x) in cell.iter().enumerate() {
        let v = grid.velocity(j);
        let cut_f = lift_cutoff(x, params)?;
        let w2 = (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2);
        let cut_m = if rho > 0.0 && w2 < r2 { (r2 - w2).sqrt() } else { 0.0 };
        let mass = igrid.indicator_moment(cut_f, 0, params)? - igrid.indicator_moment(cut_m, 0, params)?;
        let second = igrid.indicator_moment(cut_f, 2, params)? - igrid.indicator_moment(cut_m, 2, params)?;
        terms.push(0.5 * grid.speed_sq(j) * mass + 0.5 * second);
    }
    Ok(pairwise_sum(terms.len(), |k| terms[k]) * grid.velocity_volume())
}

/// First-model dissipation of the same block against the sampled
/// Maxwellian, for comparison with [`lifted_dissipation`].
pub fn sampled_dissipation(grid: &PhaseGrid, cell: &[f64], rho: f64, u: [f64; 2], params: &ModelParams) -> f64 {
    let mut m = vec![0.0; cell.len()];
    crate::maxwellian::fill_maxwellian(grid, params, rho, u, &mut m);
    cell_entropy(grid, cell, params).to_f64() - cell_entropy(grid, &m, params).to_f64()
}
