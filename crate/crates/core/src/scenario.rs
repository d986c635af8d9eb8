//! Initial data used by the command-line runs and the acceptance suite.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use crate::checkpoint::read_checkpoint;
use crate::equilibrium::discrete_maxwellian;
use crate::error::{BgkError, Result};
use crate::params::{unit_ball_volume, ModelParams};
use crate::phase_space::{DistributionField, MacroField, PhaseGrid};

/// Macroscopic profiles or a stored field that define initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Uniform equilibrium.
    Equilibrium { rho: f64, u: [f64; 2] },
    /// `rho = rho_mean (1 + amplitude sin(2 pi x / L))` and
    /// `u = velocity_amplitude sin(2 pi x / L)` along the first axis.
    SineWave { rho_mean: f64, amplitude: f64, velocity_amplitude: f64 },
    /// Smoothed plateau `rho_high` on the middle half of the first axis over
    /// `rho_low`, at rest; `width` is the tanh transition length.
    SmoothedStep { rho_high: f64, rho_low: f64, width: f64 },
    /// Compact `cos^2` density bump of radius `radius` around the domain
    /// centre, moving with velocity `u`.
    Bump { rho_peak: f64, radius: f64, u: [f64; 2] },
    /// `scale * c2` on `|v| <= v_radius` and `|x - centre| < x_radius`, zero elsewhere.
    BoxCounterexample { scale: f64, v_radius: f64, x_radius: f64 },
    /// Field read from a checkpoint file.
    Custom(PathBuf),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Equilibrium { .. } => "equilibrium",
            Scenario::SineWave { .. } => "sine_wave",
            Scenario::SmoothedStep { .. } => "smoothed_step",
            Scenario::Bump { .. } => "bump",
            Scenario::BoxCounterexample { .. } => "box_counterexample",
            Scenario::Custom(_) => "custom",
        }
    }

    /// Density and velocity at position `x` of a domain box.
    fn profile(&self, x: [f64; 2], lo: &[f64], hi: &[f64]) -> Option<(f64, [f64; 2])> {
        let len = hi[0] - lo[0];
        let s = (x[0] - lo[0]) / len;
        match *self {
            Scenario::Equilibrium { rho, u } => Some((rho, u)),
            Scenario::SineWave { rho_mean, amplitude, velocity_amplitude } => {
                let phase = 2.0 * PI * s;
                Some((rho_mean * (1.0 + amplitude * phase.sin()), [velocity_amplitude * phase.sin(), 0.0]))
            }
            Scenario::SmoothedStep { rho_high, rho_low, width } => {
                let w = width / len;
                let plateau = 0.5 * (((s - 0.25) / w).tanh() - ((s - 0.75) / w).tanh());
                Some((rho_low + (rho_high - rho_low) * plateau, [0.0; 2]))
            }
            Scenario::Bump { rho_peak, radius, u } => {
                let mut r2 = 0.0;
                for k in 0..lo.len() {
                    let c = 0.5 * (lo[k] + hi[k]);
                    r2 += (x[k] - c).powi(2);
                }
                let r = r2.sqrt();
                let rho = if r < radius { rho_peak * (0.5 * PI * r / radius).cos().powi(2) } else { 0.0 };
                Some((rho, u))
            }
            Scenario::BoxCounterexample { .. } | Scenario::Custom(_) => None,
        }
    }

    /// Density and velocity at `x` on the spatial box of `grid`, for
    /// profile-defined scenarios.
    pub fn state_at(&self, x: [f64; 2], grid: &PhaseGrid) -> Option<(f64, [f64; 2])> {
        self.profile(x, grid.x_min(), grid.x_max())
    }

    /// Cell-centre macroscopic state, for profile-defined scenarios.
    pub fn macro_state(&self, grid: &PhaseGrid) -> Option<MacroField> {
        let cells = grid.num_cells();
        let mut rho = Vec::with_capacity(cells);
        let mut u = Vec::with_capacity(cells);
        for c in 0..cells {
            let (r, v) = self.profile(grid.cell_center(c), grid.x_min(), grid.x_max())?;
            rho.push(r);
            u.push(v);
        }
        Some(MacroField::from_rho_u(grid.n(), rho, u))
    }

    /// Largest `|v|` occupied by the initial data or by the equilibrium of
    /// any of its cells, when known in advance.
    pub fn velocity_reach(&self, grid: &PhaseGrid, params: &ModelParams) -> Option<f64> {
        if let Scenario::BoxCounterexample { scale, v_radius, .. } = *self {
            let rho = scale * params.c2() * unit_ball_volume(grid.n()) * v_radius.powi(grid.n() as i32);
            return Some(v_radius.max(params.support_radius(rho)));
        }
        let mac = self.macro_state(grid)?;
        Some(
            (0..mac.len())
                .map(|c| (mac.u[c][0].powi(2) + mac.u[c][1].powi(2)).sqrt() + params.support_radius(mac.rho[c]))
                .fold(0.0, f64::max),
        )
    }

    /// Builds the initial field on `grid`. Profile scenarios use the
    /// moment-matched equilibrium of every cell.
    pub fn build(&self, grid: &Arc<PhaseGrid>, params: &ModelParams) -> Result<DistributionField> {
        match self {
            Scenario::Custom(path) => {
                let (f, _) = read_checkpoint(path)?;
                if f.grid() != grid.as_ref() {
                    return Err(BgkError::GridMismatch);
                }
                Ok(f)
            }
            Scenario::BoxCounterexample { scale, v_radius, x_radius } => {
                let c2 = params.c2();
                let centre: Vec<f64> = (0..grid.n()).map(|k| 0.5 * (grid.x_min()[k] + grid.x_max()[k])).collect();
                let (scale, v_radius, x_radius) = (*scale, *v_radius, *x_radius);
                Ok(DistributionField::from_fn(grid.clone(), move |x, v| {
                    let dx: f64 = (0..centre.len()).map(|k| (x[k] - centre[k]).powi(2)).sum::<f64>().sqrt();
                    let sp = (v[0] * v[0] + v[1] * v[1]).sqrt();
                    if dx < x_radius && sp <= v_radius {
                        scale * c2
                    } else {
                        0.0
                    }
                }))
            }
            _ => {
                let mac = self.macro_state(grid).expect("profile scenario");
                if let Some(bad) = mac.rho.iter().find(|r| !(**r >= 0.0)) {
                    return Err(BgkError::InvalidArgument(format!("scenario density {bad} is negative")));
                }
                let nvt = grid.nv_total();
                let mut values = vec![0.0; grid.len()];
                values.par_chunks_mut(nvt).enumerate().for_each(|(c, chunk)| {
                    discrete_maxwellian(grid, params, mac.rho[c], mac.momentum[c], chunk);
                });
                DistributionField::from_values(grid.clone(), values, 0.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{moments, DomainMode};

    #[test]
    fn profile_scenarios_have_their_moments() {
        let p = ModelParams::new(1, 2.0, 1.0, 0.05, 0.0).unwrap();
        let grid = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 32, (-4.0, 4.0), 128, DomainMode::Periodic).unwrap());
        for s in [
            Scenario::Equilibrium { rho: 0.8, u: [0.3, 0.0] },
            Scenario::SineWave { rho_mean: 1.0, amplitude: 0.1, velocity_amplitude: 0.2 },
            Scenario::SmoothedStep { rho_high: 1.0, rho_low: 0.125, width: 0.02 },
        ] {
            let f = s.build(&grid, &p).unwrap();
            let want = s.macro_state(&grid).unwrap();
            let got = moments(&f);
            for c in 0..32 {
                assert!((got.rho[c] - want.rho[c]).abs() < 1e-13, "{} cell {c}", s.name());
                assert!((got.momentum[c][0] - want.momentum[c][0]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn box_scenario_sits_at_c2() {
        let p = ModelParams::new(1, 3.0, 1.0, 0.05, 0.0).unwrap();
        let grid = Arc::new(PhaseGrid::uniform(1, (-1.0, 1.0), 20, (-2.0, 2.0), 40, DomainMode::Periodic).unwrap());
        let f = Scenario::BoxCounterexample { scale: 1.0, v_radius: 1.0, x_radius: 0.2 }.build(&grid, &p).unwrap();
        assert_eq!(f.max_value(), p.c2());
        assert_eq!(f.min_value(), 0.0);
    }
}
