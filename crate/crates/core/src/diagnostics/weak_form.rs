//! Residual of the weak formulation against smooth compactly supported
//! test functions.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::equilibrium::{equilibrium_field, EquilibriumKind};
use crate::error::{BgkError, Result};
use crate::params::ModelParams;
use crate::phase_space::{DistributionField, PhaseGrid};
use crate::solver::Trajectory;
use crate::summation::pairwise_sum;

/// One-variable factor of a separable test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `cos^2(pi (z - center) / (2 half_width))` on `|z - center| < half_width`.
    Bump { center: f64, half_width: f64 },
    /// `(z - center)` times the same bump.
    OddBump { center: f64, half_width: f64 },
}

impl Factor {
    fn parts(&self) -> (f64, f64) {
        match *self {
            Factor::Bump { center, half_width } | Factor::OddBump { center, half_width } => (center, half_width),
        }
    }

    /// Value and derivative at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let (c, w) = self.parts();
        let s = z - c;
        if s.abs() >= w {
            return (0.0, 0.0);
        }
        let a = PI * s / (2.0 * w);
        let b = a.cos().powi(2);
        let db = -(PI / (2.0 * w)) * (2.0 * a).sin();
        match self {
            Factor::Bump { .. } => (b, db),
            Factor::OddBump { .. } => (s * b, b + s * db),
        }
    }

    fn support(&self) -> (f64, f64) {
        let (c, w) = self.parts();
        (c - w, c + w)
    }
}

/// Separable test function `theta(t) prod_k X_k(x_k) prod_k V_k(v_k)` with
/// `theta(t) = cos^2(pi t / (2 horizon))`, vanishing at `t = horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub horizon: f64,
    pub space: Vec<Factor>,
    pub velocity: Vec<Factor>,
}

impl TestFunction {
    /// Time factor and its derivative.
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        if t >= self.horizon {
            return (0.0, 0.0);
        }
        let a = PI * t / (2.0 * self.horizon);
        (a.cos().powi(2), -(PI / (2.0 * self.horizon)) * (2.0 * a).sin())
    }

    /// Errors unless the support lies inside the grid box.
    pub fn check_support(&self, grid: &PhaseGrid) -> Result<()> {
        let n = grid.n();
        if self.space.len() != n || self.velocity.len() != n {
            return Err(BgkError::TestFunctionSupportViolation { id: self.id.clone() });
        }
        for k in 0..n {
            let (a, b) = self.space[k].support();
            let (p, q) = self.velocity[k].support();
            if a < grid.x_min()[k] || b > grid.x_max()[k] || p < grid.v_min()[k] || q > grid.v_max()[k] {
                return Err(BgkError::TestFunctionSupportViolation { id: self.id.clone() });
            }
        }
        Ok(())
    }

    /// Three fixed test functions: a centred bump, an off-centre bump and a
    /// product that is odd in `x`. Spatial factors scale with the box of `grid`; velocity
    /// factors are absolute so that they do not change under refinement.
    pub fn library(grid: &PhaseGrid, horizon: f64) -> Vec<TestFunction> {
        let n = grid.n();
        let build = |id: &str, xs: [f64; 2], vs: [f64; 2], odd: bool| {
            let mut space = Vec::new();
            let mut velocity = Vec::new();
            for k in 0..n {
                let (x0, lx) = (grid.x_min()[k], grid.x_max()[k] - grid.x_min()[k]);
                let (center, half_width) = (x0 + xs[0] * lx, xs[1] * lx);
                let (vcenter, vhalf) = if k == 0 { (vs[0], vs[1]) } else { (0.0, vs[1]) };
                if odd && k == 0 {
                    space.push(Factor::OddBump { center, half_width });
                } else {
                    space.push(Factor::Bump { center, half_width });
                }
                velocity.push(Factor::Bump { center: vcenter, half_width: vhalf });
            }
            TestFunction { id: id.to_string(), horizon, space, velocity }
        };
        vec![
            build("phi1", [0.5, 0.3], [0.0, 1.5], false),
            build("phi2", [0.6, 0.3], [0.2, 1.2], false),
            build("phi3", [0.5, 0.35], [0.0, 1.5], true),
        ]
    }
}

/// Weak-form residual and its three contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakFormResidual {
    pub residual: f64,
    /// Initial-data, transport and relaxation terms.
    pub terms: [f64; 3],
    /// Largest magnitude among the terms.
    pub max_term: f64,
    /// `|residual| / max_term`, zero when every term vanishes.
    pub normalized: f64,
}

/// Tabulated factors of a test function on a grid.
struct Tables {
    x: Vec<[(f64, f64); 2]>,
    v: Vec<[(f64, f64); 2]>,
}

impl Tables {
    fn new(phi: &TestFunction, grid: &PhaseGrid) -> Self {
        let n = grid.n();
        let x = (0..grid.num_cells())
            .map(|c| {
                let p = grid.cell_center(c);
                let mut row = [(1.0, 0.0); 2];
                for k in 0..n {
                    row[k] = phi.space[k].eval(p[k]);
                }
                row
            })
            .collect();
        let v = (0..grid.nv_total())
            .map(|j| {
                let p = grid.velocity(j);
                let mut row = [(1.0, 0.0); 2];
                for k in 0..n {
                    row[k] = phi.velocity[k].eval(p[k]);
                }
                row
            })
            .collect();
        Self { x, v }
    }

    /// `(phi_x phi_v, v . grad_x (phi_x) phi_v)` at `(cell, j)` without time factor.
    #[inline]
    fn at(&self, c: usize, j: usize, vel: [f64; 2]) -> (f64, f64) {
        let [(x0, dx0), (x1, dx1)] = self.x[c];
        let [(v0, _), (v1, _)] = self.v[j];
        let pv = v0 * v1;
        (x0 * x1 * pv, (vel[0] * dx0 * x1 + vel[1] * x0 * dx1) * pv)
    }
}

fn pair_sum(grid: &PhaseGrid, tables: &Tables, f: &DistributionField, g: Option<&DistributionField>) -> (f64, f64) {
    let nvt = grid.nv_total();
    let per_cell: Vec<(f64, f64)> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let a = f.cell(c);
            let b = g.map(|g| g.cell(c));
            let s0 = pairwise_sum(nvt, |j| {
                let w = b.map_or(a[j], |b| b[j] - a[j]);
                w * tables.at(c, j, grid.velocity(j)).0
            });
            let s1 = pairwise_sum(nvt, |j| a[j] * tables.at(c, j, grid.velocity(j)).1);
            (s0, s1)
        })
        .collect();
    let vol = grid.cell_volume() * grid.velocity_volume();
    (pairwise_sum(per_cell.len(), |c| per_cell[c].0) * vol, pairwise_sum(per_cell.len(), |c| per_cell[c].1) * vol)
}

/// Discrete residual of
/// `int f (dt phi + v . grad phi) + (1/tau) int (M[f] - f) phi + int f0 phi(0) = 0`
/// over the stored frames, time integrals by the trapezoid rule.
pub fn weak_form_residual(traj: &Trajectory, phi: &TestFunction, params: &ModelParams) -> Result<WeakFormResidual> {
    let frames = traj.frames();
    let Some(first) = frames.first() else {
        return Err(BgkError::InsufficientTrajectory { requested: phi.horizon, available: f64::NAN });
    };
    let grid = first.grid();
    phi.check_support(grid)?;
    if traj.end_time() + 1e-12 * phi.horizon.max(1.0) < phi.horizon {
        return Err(BgkError::InsufficientTrajectory { requested: phi.horizon, available: traj.end_time() });
    }
    let tables = Tables::new(phi, grid);
    let used: Vec<&DistributionField> = frames.iter().filter(|f| f.time() <= phi.horizon * (1.0 + 1e-12)).collect();
    let mut transport = Vec::with_capacity(used.len());
    let mut relax = Vec::with_capacity(used.len());
    let mut initial = 0.0;
    for (i, f) in used.iter().enumerate() {
        let (th, dth) = phi.time_factor(f.time());
        let eq = equilibrium_field(f, params, EquilibriumKind::Conservative)?;
        let (plain, flux) = pair_sum(grid, &tables, f, None);
        let (gap, _) = pair_sum(grid, &tables, f, Some(&eq));
        if i == 0 {
            initial = th * plain;
        }
        transport.push(dth * plain + th * flux);
        relax.push(th * gap / params.tau());
    }
    let times: Vec<f64> = used.iter().map(|f| f.time()).collect();
    let trap = |vals: &[f64]| {
        let pieces: Vec<f64> =
            (1..times.len()).map(|i| 0.5 * (vals[i] + vals[i - 1]) * (times[i] - times[i - 1])).collect();
        pairwise_sum(pieces.len(), |i| pieces[i])
    };
    let terms = [-initial, -trap(&transport), -trap(&relax)];
    let residual = terms[0] + terms[1] + terms[2];
    let max_term = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let normalized = if max_term > 0.0 { residual.abs() / max_term } else { 0.0 };
    Ok(WeakFormResidual { residual, terms, max_term, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_derivative_matches_difference() {
        for f in [Factor::Bump { center: 0.3, half_width: 0.2 }, Factor::OddBump { center: -0.1, half_width: 0.7 }] {
            for z in [-0.5, 0.2, 0.35, 0.41] {
                let h = 1e-6;
                let fd = (f.eval(z + h).0 - f.eval(z - h).0) / (2.0 * h);
                assert!((fd - f.eval(z).1).abs() < 1e-6, "{f:?} at {z}");
            }
        }
    }

    #[test]
    fn library_fits_inside_grid() {
        let grid = PhaseGrid::uniform(2, (0.0, 1.0), 8, (-4.0, 4.0), 16, crate::DomainMode::Periodic).unwrap();
        for phi in TestFunction::library(&grid, 1.0) {
            phi.check_support(&grid).unwrap();
        }
        let mut wide = TestFunction::library(&grid, 1.0).remove(0);
        wide.velocity[0] = Factor::Bump { center: 0.0, half_width: 5.0 };
        assert!(matches!(wide.check_support(&grid), Err(BgkError::TestFunctionSupportViolation { .. })));
    }
}
