//! Phase-space grids, distribution fields and their velocity moments.
//!
//! Spatial cells and velocity nodes are both midpoint grids. A field stores
//! `values[cell * nv_total + node]`, so each spatial cell owns a contiguous
//! block of velocity values. Multi-indices run with axis 0 fastest.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{BgkError, Result};
use crate::params::ModelParams;
use crate::summation::pairwise_sum;

/// Spatial boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainMode {
    Periodic,
    FreeTruncated,
}

impl DomainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainMode::Periodic => "periodic",
            DomainMode::FreeTruncated => "free_truncated",
        }
    }
}

/// Tensor-product grid over space times velocity, for `n` in {1, 2}.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    n: usize,
    x_min: Vec<f64>,
    x_max: Vec<f64>,
    nx: Vec<usize>,
    v_min: Vec<f64>,
    v_max: Vec<f64>,
    nv: Vec<usize>,
    dx: Vec<f64>,
    dv: Vec<f64>,
    mode: DomainMode,
    velocities: Vec<[f64; 2]>,
    speed_sq: Vec<f64>,
}

impl PhaseGrid {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        x_min: &[f64],
        x_max: &[f64],
        nx: &[usize],
        v_min: &[f64],
        v_max: &[f64],
        nv: &[usize],
        mode: DomainMode,
    ) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(BgkError::UnsupportedDimension(n));
        }
        for len in [x_min.len(), x_max.len(), nx.len(), v_min.len(), v_max.len(), nv.len()] {
            if len != n {
                return Err(BgkError::InvalidArgument(format!("grid bounds need {n} entries per axis, got {len}")));
            }
        }
        let mut dx = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        for k in 0..n {
            if nx[k] == 0 || nv[k] == 0 {
                return Err(BgkError::InvalidArgument("cell counts must be positive".into()));
            }
            let hx = (x_max[k] - x_min[k]) / nx[k] as f64;
            let hv = (v_max[k] - v_min[k]) / nv[k] as f64;
            if !(hx > 0.0 && hv > 0.0 && hx.is_finite() && hv.is_finite()) {
                return Err(BgkError::InvalidArgument(format!("axis {k} has empty or inverted bounds")));
            }
            dx.push(hx);
            dv.push(hv);
        }
        let nvt: usize = nv.iter().product();
        let mut velocities = Vec::with_capacity(nvt);
        for j in 0..nvt {
            let mut v = [0.0; 2];
            let mut rem = j;
            for k in 0..n {
                let i = rem % nv[k];
                rem /= nv[k];
                v[k] = v_min[k] + (i as f64 + 0.5) * dv[k];
            }
            velocities.push(v);
        }
        let speed_sq = velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).collect();
        Ok(Self {
            n,
            x_min: x_min.to_vec(),
            x_max: x_max.to_vec(),
            nx: nx.to_vec(),
            v_min: v_min.to_vec(),
            v_max: v_max.to_vec(),
            nv: nv.to_vec(),
            dx,
            dv,
            mode,
            velocities,
            speed_sq,
        })
    }

    /// Same bounds and counts on every axis.
    pub fn uniform(
        n: usize,
        x_range: (f64, f64),
        nx: usize,
        v_range: (f64, f64),
        nv: usize,
        mode: DomainMode,
    ) -> Result<Self> {
        Self::new(
            n,
            &vec![x_range.0; n],
            &vec![x_range.1; n],
            &vec![nx; n],
            &vec![v_range.0; n],
            &vec![v_range.1; n],
            &vec![nv; n],
            mode,
        )
    }

    /// A single periodic unit cell carrying a velocity grid, for cellwise work.
    pub fn velocity_only(n: usize, v_range: (f64, f64), nv: usize) -> Result<Self> {
        Self::uniform(n, (0.0, 1.0), 1, v_range, nv, DomainMode::Periodic)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn x_min(&self) -> &[f64] {
        &self.x_min
    }
    pub fn x_max(&self) -> &[f64] {
        &self.x_max
    }
    pub fn nx(&self) -> &[usize] {
        &self.nx
    }
    pub fn v_min(&self) -> &[f64] {
        &self.v_min
    }
    pub fn v_max(&self) -> &[f64] {
        &self.v_max
    }
    pub fn nv(&self) -> &[usize] {
        &self.nv
    }
    pub fn dx(&self) -> &[f64] {
        &self.dx
    }
    pub fn dv(&self) -> &[f64] {
        &self.dv
    }
    pub fn mode(&self) -> DomainMode {
        self.mode
    }

    pub fn num_cells(&self) -> usize {
        self.nx.iter().product()
    }

    pub fn nv_total(&self) -> usize {
        self.velocities.len()
    }

    pub fn len(&self) -> usize {
        self.num_cells() * self.nv_total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product of spatial spacings.
    pub fn cell_volume(&self) -> f64 {
        self.dx.iter().product()
    }

    /// Product of velocity spacings.
    pub fn velocity_volume(&self) -> f64 {
        self.dv.iter().product()
    }

    /// Velocity node `j`; unused trailing components are zero.
    #[inline]
    pub fn velocity(&self, j: usize) -> [f64; 2] {
        self.velocities[j]
    }

    #[inline]
    pub fn speed_sq(&self, j: usize) -> f64 {
        self.speed_sq[j]
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.velocities
    }

    /// Spatial multi-index of a flat cell index.
    pub fn cell_index(&self, cell: usize) -> [usize; 2] {
        if self.n == 1 {
            [cell, 0]
        } else {
            [cell % self.nx[0], cell / self.nx[0]]
        }
    }

    /// Centre of spatial cell `cell`.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let idx = self.cell_index(cell);
        let mut x = [0.0; 2];
        for k in 0..self.n {
            x[k] = self.x_min[k] + (idx[k] as f64 + 0.5) * self.dx[k];
        }
        x
    }

    /// Largest distance from the origin of any point of the velocity box
    /// measured along one axis.
    pub fn velocity_reach(&self) -> f64 {
        (0..self.n).map(|k| self.v_max[k].min(-self.v_min[k])).fold(f64::INFINITY, f64::min)
    }

    /// Same spatial layout with another velocity box.
    pub fn with_velocity_box(&self, v_min: &[f64], v_max: &[f64], nv: &[usize]) -> Result<Self> {
        Self::new(self.n, &self.x_min, &self.x_max, &self.nx, v_min, v_max, nv, self.mode)
    }
}

/// Half-width of a symmetric velocity box holding every Maxwellian support
/// of the given macroscopic state plus `margin_cells` velocity cells.
pub fn auto_velocity_half_width(params: &ModelParams, mac: &MacroField, nv: usize, margin_cells: f64) -> f64 {
    let reach = (0..mac.len()).map(|c| norm(&mac.u[c]) + params.support_radius(mac.rho[c])).fold(0.0, f64::max);
    let shrink = 1.0 - 2.0 * margin_cells / nv as f64;
    if shrink <= 0.0 {
        reach * 2.0
    } else {
        reach / shrink
    }
}

#[inline]
pub(crate) fn norm(v: &[f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Values of `f` on the phase grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    grid: Arc<PhaseGrid>,
    values: Vec<f64>,
    time: f64,
}

impl DistributionField {
    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let len = grid.len();
        Self { grid, values: vec![0.0; len], time: 0.0 }
    }

    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BgkError::InvalidArgument(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `f(x, v)` at cell centres and velocity nodes.
    pub fn from_fn<F>(grid: Arc<PhaseGrid>, f: F) -> Self
    where
        F: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
    {
        let nvt = grid.nv_total();
        let mut values = vec![0.0; grid.len()];
        values.par_chunks_mut(nvt).enumerate().for_each(|(c, chunk)| {
            let x = grid.cell_center(c);
            for (j, out) in chunk.iter_mut().enumerate() {
                *out = f(x, grid.velocity(j));
            }
        });
        Self { grid, values, time: 0.0 }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Velocity values in spatial cell `c`.
    pub fn cell(&self, c: usize) -> &[f64] {
        let nvt = self.grid.nv_total();
        &self.values[c * nvt..(c + 1) * nvt]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total mass over phase space.
    pub fn total_mass(&self) -> f64 {
        let nvt = self.grid.nv_total();
        let per_cell: Vec<f64> = (0..self.grid.num_cells())
            .into_par_iter()
            .map(|c| pairwise_sum(nvt, |j| self.values[c * nvt + j]))
            .collect();
        pairwise_sum(per_cell.len(), |c| per_cell[c]) * self.grid.cell_volume() * self.grid.velocity_volume()
    }

    /// Total (1+|v|^2)-weighted mass.
    pub fn weighted_mass(&self) -> f64 {
        let grid = &*self.grid;
        let nvt = grid.nv_total();
        let per_cell: Vec<f64> = (0..grid.num_cells())
            .into_par_iter()
            .map(|c| pairwise_sum(nvt, |j| (1.0 + grid.speed_sq(j)) * self.values[c * nvt + j]))
            .collect();
        pairwise_sum(per_cell.len(), |c| per_cell[c]) * grid.cell_volume() * grid.velocity_volume()
    }
}

/// Per-cell macroscopic quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    pub n: usize,
    pub rho: Vec<f64>,
    pub momentum: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    pub rho_eps: Option<Vec<f64>>,
    pub u_eps: Option<Vec<[f64; 2]>>,
}

impl MacroField {
    /// Builds a field from densities and momenta, applying the zero-density rule.
    pub fn from_rho_momentum(n: usize, rho: Vec<f64>, momentum: Vec<[f64; 2]>) -> Self {
        let u =
            rho.iter().zip(&momentum).map(|(&r, m)| if r > 0.0 { [m[0] / r, m[1] / r] } else { [0.0; 2] }).collect();
        Self { n, rho, momentum, u, rho_eps: None, u_eps: None }
    }

    /// Builds a field from densities and velocities.
    pub fn from_rho_u(n: usize, rho: Vec<f64>, u: Vec<[f64; 2]>) -> Self {
        let u: Vec<[f64; 2]> = rho.iter().zip(&u).map(|(&r, v)| if r > 0.0 { *v } else { [0.0; 2] }).collect();
        let momentum = rho.iter().zip(&u).map(|(&r, v)| [r * v[0], r * v[1]]).collect();
        Self { n, rho, momentum, u, rho_eps: None, u_eps: None }
    }

    /// Spatially uniform state over `cells` cells.
    pub fn uniform(n: usize, cells: usize, rho: f64, u: [f64; 2]) -> Self {
        Self::from_rho_u(n, vec![rho; cells], vec![u; cells])
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Density and velocity used for the equilibrium: regularized when asked.
    pub fn equilibrium_args(&self, c: usize, use_regularized: bool) -> Result<(f64, [f64; 2])> {
        if use_regularized {
            match (&self.rho_eps, &self.u_eps) {
                (Some(r), Some(u)) => Ok((r[c], u[c])),
                _ => Err(BgkError::MissingRegularizedMoments),
            }
        } else {
            Ok((self.rho[c], self.u[c]))
        }
    }
}

/// Density, momentum and bulk velocity of every spatial cell.
pub fn moments(f: &DistributionField) -> MacroField {
    let grid = f.grid();
    let nvt = grid.nv_total();
    let dvol = grid.velocity_volume();
    let n = grid.n();
    let per_cell: Vec<(f64, [f64; 2])> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| cell_moments(grid, &f.values()[c * nvt..(c + 1) * nvt], dvol))
        .collect();
    let rho = per_cell.iter().map(|p| p.0).collect();
    let mut momentum: Vec<[f64; 2]> = per_cell.iter().map(|p| p.1).collect();
    if n == 1 {
        momentum.iter_mut().for_each(|m| m[1] = 0.0);
    }
    MacroField::from_rho_momentum(n, rho, momentum)
}

/// Mass and momentum of one velocity block.
pub(crate) fn cell_moments(grid: &PhaseGrid, cell: &[f64], dvol: f64) -> (f64, [f64; 2]) {
    let nvt = cell.len();
    let rho = pairwise_sum(nvt, |j| cell[j]) * dvol;
    let mut m = [0.0; 2];
    for (k, mk) in m.iter_mut().enumerate().take(grid.n()) {
        *mk = pairwise_sum(nvt, |j| grid.velocity(j)[k] * cell[j]) * dvol;
    }
    (rho, m)
}

/// Regularized density and velocity of a single state.
///
/// Both outputs satisfy their upper bounds exactly in floating point:
/// `rho_eps <= min(rho, 1/eps)` and `|u_eps| <= min(|u|, 1/eps)`.
pub fn regularize(rho: f64, u: [f64; 2], epsilon: f64) -> (f64, [f64; 2]) {
    if rho <= 0.0 {
        return (0.0, [0.0; 2]);
    }
    let cap = 1.0 / epsilon;
    let rho_eps = (rho / (1.0 + epsilon * rho)).min(rho).min(cap);
    let m = [rho * u[0], rho * u[1]];
    let mut k = (rho / (rho + epsilon * (1.0 + norm(&m)))).min(1.0);
    let mut u_eps = [u[0] * k, u[1] * k];
    while norm(&u_eps) > cap && k > 0.0 {
        k = k.next_down();
        u_eps = [u[0] * k, u[1] * k];
    }
    (rho_eps, u_eps)
}

/// Attaches the regularized moments for parameter `epsilon`.
pub fn regularized_moments(mac: &MacroField, epsilon: f64) -> Result<MacroField> {
    if !(epsilon > 0.0) {
        return Err(BgkError::EpsilonNonPositive(epsilon));
    }
    let (rho_eps, u_eps): (Vec<f64>, Vec<[f64; 2]>) =
        (0..mac.len()).map(|c| regularize(mac.rho[c], mac.u[c], epsilon)).unzip();
    let mut out = mac.clone();
    out.rho_eps = Some(rho_eps);
    out.u_eps = Some(u_eps);
    Ok(out)
}

/// Per-cell velocity average of `f` against the weight `psi`.
pub fn velocity_average<P>(f: &DistributionField, psi: P) -> Vec<f64>
where
    P: Fn([f64; 2]) -> f64 + Sync,
{
    let grid = f.grid();
    let nvt = grid.nv_total();
    let dvol = grid.velocity_volume();
    let weights: Vec<f64> = (0..nvt).map(|j| psi(grid.velocity(j))).collect();
    (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let cell = f.cell(c);
            pairwise_sum(nvt, |j| weights[j] * cell[j]) * dvol
        })
        .collect()
}

/// Distance in the (1+|v|^2)-weighted L1 norm over phase space.
pub fn weighted_l1_distance(f: &DistributionField, g: &DistributionField) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(BgkError::GridMismatch);
    }
    let grid = f.grid();
    let nvt = grid.nv_total();
    let per_cell: Vec<f64> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let (a, b) = (f.cell(c), g.cell(c));
            pairwise_sum(nvt, |j| (1.0 + grid.speed_sq(j)) * (a[j] - b[j]).abs())
        })
        .collect();
    Ok(pairwise_sum(per_cell.len(), |c| per_cell[c]) * grid.cell_volume() * grid.velocity_volume())
}

/// Mass carried by cells whose centre lies at distance at least `radius`
/// from the origin.
pub fn tail_mass(f: &DistributionField, radius: f64) -> Result<f64> {
    let grid = f.grid();
    if grid.mode() != DomainMode::FreeTruncated {
        return Err(BgkError::ModeMismatch { expected: "free_truncated" });
    }
    let mac = moments(f);
    let far: Vec<f64> =
        (0..grid.num_cells()).map(|c| if norm(&grid.cell_center(c)) >= radius { mac.rho[c] } else { 0.0 }).collect();
    Ok(pairwise_sum(far.len(), |c| far[c]) * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(nx: usize, nv: usize, v: f64) -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), nx, (-v, v), nv, DomainMode::Periodic).unwrap())
    }

    #[test]
    fn zero_field_has_zero_moments() {
        let f = DistributionField::zeros(line(4, 16, 2.0));
        let m = moments(&f);
        assert!(m.rho.iter().all(|&r| r == 0.0));
        assert!(m.u.iter().all(|u| u == &[0.0, 0.0]));
    }

    #[test]
    fn half_box_has_unit_mass() {
        let grid = line(1, 1000, 3.0);
        let f = DistributionField::from_fn(grid.clone(), |_, v| if v[0].abs() <= 1.0 { 0.5 } else { 0.0 });
        let m = moments(&f);
        assert!((m.rho[0] - 1.0).abs() <= grid.dv()[0]);
        assert!(m.u[0][0].abs() < 1e-14);
    }

    #[test]
    fn regularized_examples() {
        let (r, u) = regularize(1.0, [1.0, 0.0], 0.5);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert!((u[0] - 0.5).abs() < 1e-15);
        let (r, u) = regularize(100.0, [0.0, 0.0], 0.1);
        assert!((r - 100.0 / 11.0).abs() < 1e-12 && r <= 10.0);
        assert_eq!(u, [0.0, 0.0]);
        assert_eq!(regularize(0.0, [0.0, 0.0], 0.3), (0.0, [0.0, 0.0]));
        let mac = MacroField::uniform(1, 2, 1.0, [0.0; 2]);
        assert_eq!(regularized_moments(&mac, 0.0), Err(BgkError::EpsilonNonPositive(0.0)));
    }

    #[test]
    fn weighted_distance_single_node() {
        let grid = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 1, (1.5, 2.5), 1, DomainMode::Periodic).unwrap());
        let f = DistributionField::from_values(grid.clone(), vec![1.0], 0.0).unwrap();
        let z = DistributionField::zeros(grid);
        assert!((weighted_l1_distance(&f, &z).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(weighted_l1_distance(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn tail_mass_of_uniform_slab() {
        let grid =
            Arc::new(PhaseGrid::uniform(1, (-2.0, 2.0), 400, (-1.0, 1.0), 4, DomainMode::FreeTruncated).unwrap());
        let f = DistributionField::from_fn(grid, |_, _| 0.125);
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
        assert!((tail_mass(&f, 1.0).unwrap() - 0.5).abs() < 1e-12);
        let p = DistributionField::zeros(line(4, 4, 1.0));
        assert!(matches!(tail_mass(&p, 1.0), Err(BgkError::ModeMismatch { .. })));
    }

    #[test]
    fn two_dimensional_layout() {
        let grid = PhaseGrid::uniform(2, (0.0, 1.0), 3, (-1.0, 1.0), 4, DomainMode::Periodic).unwrap();
        assert_eq!(grid.num_cells(), 9);
        assert_eq!(grid.nv_total(), 16);
        assert_eq!(grid.velocity(1), [-0.25, -0.75]);
        assert_eq!(grid.velocity(4), [-0.75, -0.25]);
        assert_eq!(grid.cell_index(4), [1, 1]);
    }
}
