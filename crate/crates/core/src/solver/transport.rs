//! Semi-Lagrangian free transport `g(x, v) = f(x - v s, v)`.

use rayon::prelude::*;

use crate::phase_space::{DistributionField, DomainMode, PhaseGrid};
use crate::summation::pairwise_sum;

/// Spatial interpolation used to evaluate `f` at the foot of a characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    CubicClamped,
}

impl Interpolation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Interpolation::Linear => "linear",
            Interpolation::CubicClamped => "cubic_clamped",
        }
    }
}

/// One-axis stencil: source offset of the first point and its weights.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    first: isize,
    len: usize,
    weights: [f64; 4],
}

impl Stencil {
    fn identity() -> Self {
        Self { first: 0, len: 1, weights: [1.0, 0.0, 0.0, 0.0] }
    }

    /// Stencil for reading position `i - shift` (in cells) from index `i`.
    fn new(shift: f64, interp: Interpolation) -> Self {
        let pos = -shift;
        let base = pos.floor();
        let t = pos - base;
        let base = base as isize;
        if t == 0.0 {
            return Self { first: base, len: 1, weights: [1.0, 0.0, 0.0, 0.0] };
        }
        match interp {
            Interpolation::Linear => Self { first: base, len: 2, weights: [1.0 - t, t, 0.0, 0.0] },
            Interpolation::CubicClamped => {
                let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
                Self { first: base - 1, len: 4, weights: [w0, w1, w2, w3] }
            }
        }
    }
}

#[inline]
fn source(i: usize, offset: isize, n: usize, mode: DomainMode) -> Option<usize> {
    let j = i as isize + offset;
    match mode {
        DomainMode::Periodic => Some(j.rem_euclid(n as isize) as usize),
        DomainMode::FreeTruncated => {
            if j >= 0 && (j as usize) < n {
                Some(j as usize)
            } else {
                None
            }
        }
    }
}

/// Transported field and the mass removed by clipping negative values.
#[derive(Debug, Clone)]
pub struct Transported {
    pub field: DistributionField,
    pub clipped_mass: f64,
}

/// Shifts every velocity slice of `f` along its characteristic for time `s`.
pub fn free_transport(f: &DistributionField, s: f64, interp: Interpolation) -> Transported {
    let grid: &PhaseGrid = f.grid();
    let n = grid.n();
    let nvt = grid.nv_total();
    let nx = grid.nx();
    let mode = grid.mode();
    if s == 0.0 {
        return Transported { field: f.clone(), clipped_mass: 0.0 };
    }
    let stencils: Vec<[Stencil; 2]> = (0..nvt)
        .map(|j| {
            let v = grid.velocity(j);
            let mut st = [Stencil::identity(); 2];
            for k in 0..n {
                st[k] = Stencil::new(v[k] * s / grid.dx()[k], interp);
            }
            st
        })
        .collect();
    let input = f.values();
    let mut values = vec![0.0; grid.len()];
    let clipped: Vec<f64> = values
        .par_chunks_mut(nvt)
        .enumerate()
        .map(|(cell, chunk)| {
            let idx = grid.cell_index(cell);
            let ny = if n == 2 { nx[1] } else { 1 };
            let mut lost = 0.0;
            for (j, out) in chunk.iter_mut().enumerate() {
                let [sx, sy] = &stencils[j];
                let mut acc = 0.0;
                for b in 0..sy.len {
                    let Some(iy) = source(idx[1], sy.first + b as isize, ny, mode) else { continue };
                    let wy = sy.weights[b];
                    for a in 0..sx.len {
                        let Some(ix) = source(idx[0], sx.first + a as isize, nx[0], mode) else { continue };
                        acc += wy * sx.weights[a] * input[(ix + nx[0] * iy) * nvt + j];
                    }
                }
                if acc < 0.0 {
                    lost -= acc;
                    acc = 0.0;
                }
                *out = acc;
            }
            lost
        })
        .collect();
    let clipped_mass = pairwise_sum(clipped.len(), |c| clipped[c]) * grid.cell_volume() * grid.velocity_volume();
    let mut field = DistributionField::from_values(f.grid_arc().clone(), values, f.time()).expect("same grid");
    field.set_time(f.time());
    Transported { field, clipped_mass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn ring(nx: usize) -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), nx, (0.5, 1.5), 1, DomainMode::Periodic).unwrap())
    }

    #[test]
    fn zero_time_is_identity() {
        let g = ring(16);
        let f = DistributionField::from_fn(g, |x, _| (6.0 * x[0]).sin() + 2.0);
        assert_eq!(free_transport(&f, 0.0, Interpolation::Linear).field, f);
    }

    #[test]
    fn integer_shift_is_exact() {
        let g = ring(16);
        let f = DistributionField::from_fn(g, |x, _| if x[0] < 0.25 { 1.0 } else { 0.0 });
        let out = free_transport(&f, 0.25, Interpolation::Linear).field;
        for c in 0..16 {
            assert_eq!(out.values()[c], f.values()[(c + 12) % 16]);
        }
        let cubic = free_transport(&f, 0.25, Interpolation::CubicClamped).field;
        assert_eq!(cubic.values(), out.values());
    }

    #[test]
    fn periodic_linear_conserves_mass() {
        let g = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 50, (-3.0, 3.0), 12, DomainMode::Periodic).unwrap());
        let f = DistributionField::from_fn(g, |x, v| (1.0 + (6.3 * x[0]).cos()) * (-v[0] * v[0]).exp());
        let out = free_transport(&f, 0.137, Interpolation::Linear);
        assert!((out.field.total_mass() - f.total_mass()).abs() < 1e-14);
        assert_eq!(out.clipped_mass, 0.0);
        let cubic = free_transport(&f, 0.137, Interpolation::CubicClamped);
        let drift = cubic.field.total_mass() - f.total_mass() - cubic.clipped_mass;
        assert!(drift.abs() < 1e-13);
    }

    #[test]
    fn free_space_drops_outflow() {
        let g = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 10, (0.5, 1.5), 1, DomainMode::FreeTruncated).unwrap());
        let f = DistributionField::from_fn(g, |_, _| 1.0);
        let out = free_transport(&f, 0.2, Interpolation::Linear).field;
        assert_eq!(out.values()[0], 0.0);
        assert_eq!(out.values()[1], 0.0);
        assert_eq!(out.values()[9], 1.0);
    }

    #[test]
    fn two_dimensional_diagonal_shift() {
        let g = Arc::new(PhaseGrid::uniform(2, (0.0, 1.0), 8, (0.5, 1.5), 1, DomainMode::Periodic).unwrap());
        let f = DistributionField::from_fn(g, |x, _| if x[0] < 0.125 && x[1] < 0.125 { 1.0 } else { 0.0 });
        let out = free_transport(&f, 0.125, Interpolation::Linear).field;
        assert_eq!(out.values()[1 + 8], 1.0);
        assert!((out.total_mass() - f.total_mass()).abs() < 1e-15);
    }
}
