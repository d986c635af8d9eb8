//! Entropy ledger, decay functional, tightness monitor and weak-form residual.

mod weak_form;

pub use weak_form::{weak_form_residual, Factor, TestFunction, WeakFormResidual};

use rayon::prelude::*;

use crate::equilibrium::{equilibrium_field, EquilibriumKind};
use crate::error::{BgkError, Result};
use crate::maxwellian::{
    cell_entropy, dissipation_against, maxwellian_entropy, regularized_maxwellian_entropy, ExtendedReal,
};
use crate::params::ModelParams;
use crate::phase_space::{
    moments, norm, regularized_moments, tail_mass, velocity_average, DistributionField, DomainMode, PhaseGrid,
};
use crate::solver::Trajectory;
use crate::stability::BoundReport;
use crate::summation::pairwise_sum;

/// Default calibration constant of the ledger tolerance.
pub const DEFAULT_LEDGER_CONSTANT: f64 = 0.5;

/// Dissipation bookkeeping at one level of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationTrack {
    pub rate: f64,
    pub cumulative: f64,
    pub residual: ExtendedReal,
    pub flagged_cells: usize,
}

/// One ledger entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 2],
    pub kinetic_energy: f64,
    pub entropy: ExtendedReal,
    /// Against the unmodified equilibrium.
    pub base: DissipationTrack,
    /// Against the regularized equilibrium, when `epsilon > 0`.
    pub regularized: Option<DissipationTrack>,
}

impl LedgerRow {
    pub fn dissipation_rate(&self) -> f64 {
        self.base.rate
    }
    pub fn cumulative_dissipation(&self) -> f64 {
        self.base.cumulative
    }
    pub fn budget_residual(&self) -> ExtendedReal {
        self.base.residual
    }
}

/// Time series of conserved quantities and the entropy budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyLedger {
    n: usize,
    tau: f64,
    rows: Vec<LedgerRow>,
}

impl EntropyLedger {
    pub fn new(params: &ModelParams) -> Self {
        Self { n: params.n(), tau: params.tau(), rows: Vec::new() }
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Largest budget residual over the run.
    pub fn max_residual(&self) -> ExtendedReal {
        self.rows.iter().map(|r| r.base.residual).fold(ExtendedReal::Finite(f64::NEG_INFINITY), |a, b| {
            if b > a {
                b
            } else {
                a
            }
        })
    }

    /// Rows whose budget residual exceeds `tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.base.residual > ExtendedReal::Finite(tol))
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest drift of mass and of any momentum component from the first row.
    pub fn conservation_drift(&self) -> (f64, f64) {
        let Some(first) = self.rows.first() else { return (0.0, 0.0) };
        let mut dm: f64 = 0.0;
        let mut dp: f64 = 0.0;
        for r in &self.rows {
            dm = dm.max((r.mass - first.mass).abs());
            for k in 0..self.n {
                dp = dp.max((r.momentum[k] - first.momentum[k]).abs());
            }
        }
        (dm, dp)
    }

    /// Column names of the CSV rendering.
    pub fn csv_columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "mass".to_string()];
        for k in 0..self.n {
            cols.push(format!("momentum_{}", k + 1));
        }
        for c in ["kinetic_energy", "entropy", "dissipation_rate", "cumulative_dissipation", "budget_residual"] {
            cols.push(c.to_string());
        }
        if self.rows.iter().any(|r| r.regularized.is_some()) {
            for c in ["dissipation_rate_eps", "cumulative_dissipation_eps", "budget_residual_eps"] {
                cols.push(c.to_string());
            }
        }
        cols
    }

    /// CSV cells of every row, matching [`csv_columns`](Self::csv_columns).
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        use crate::params::fmt_f64;
        let with_eps = self.rows.iter().any(|r| r.regularized.is_some());
        self.rows
            .iter()
            .map(|r| {
                let mut cells = vec![fmt_f64(r.t), fmt_f64(r.mass)];
                for k in 0..self.n {
                    cells.push(fmt_f64(r.momentum[k]));
                }
                cells.push(fmt_f64(r.kinetic_energy));
                cells.push(r.entropy.to_string());
                cells.push(fmt_f64(r.base.rate));
                cells.push(fmt_f64(r.base.cumulative));
                cells.push(r.base.residual.to_string());
                if with_eps {
                    let e = r.regularized.unwrap_or(r.base);
                    cells.push(fmt_f64(e.rate));
                    cells.push(fmt_f64(e.cumulative));
                    cells.push(e.residual.to_string());
                }
                cells
            })
            .collect()
    }
}

/// Allowed budget residual `c_led (dt + dx + dv) T` for a run.
pub fn tol_ledger(c_led: f64, dt: f64, grid: &PhaseGrid, horizon: f64) -> f64 {
    let dx = grid.dx().iter().copied().fold(0.0, f64::max);
    let dv = grid.dv().iter().copied().fold(0.0, f64::max);
    c_led * (dt + dx + dv) * horizon
}

struct CellStats {
    rho: f64,
    momentum: [f64; 2],
    kinetic: f64,
    entropy: ExtendedReal,
}

/// Appends the state `f` to the ledger.
pub fn ledger_update(ledger: &mut EntropyLedger, f: &DistributionField, params: &ModelParams) -> Result<()> {
    let t = f.time();
    if let Some(last) = ledger.rows.last() {
        if !(t > last.t) {
            return Err(BgkError::NonMonotoneTime { time: t, last: last.t });
        }
    }
    let grid = f.grid();
    let nvt = grid.nv_total();
    let dvol = grid.velocity_volume();
    let dx = grid.cell_volume();
    let mac = moments(f);
    let stats: Vec<CellStats> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let cell = f.cell(c);
            CellStats {
                rho: mac.rho[c],
                momentum: mac.momentum[c],
                kinetic: 0.5 * pairwise_sum(nvt, |j| grid.speed_sq(j) * cell[j]) * dvol,
                entropy: cell_entropy(grid, cell, params),
            }
        })
        .collect();
    let total = |g: &dyn Fn(&CellStats) -> f64| pairwise_sum(stats.len(), |c| g(&stats[c])) * dx;
    let mass = total(&|s| s.rho);
    let mut momentum = [0.0; 2];
    for (k, m) in momentum.iter_mut().enumerate().take(grid.n()) {
        *m = total(&|s| s.momentum[k]);
    }
    let kinetic_energy = total(&|s| s.kinetic);
    let entropies: Vec<ExtendedReal> = stats.iter().map(|s| s.entropy).collect();
    let entropy = ExtendedReal::sum(&entropies).scale(dx);

    let h_m = maxwellian_entropy(&mac, params);
    let base_rep = dissipation_against(f, &mac, &h_m, params);
    let base_rate = ExtendedReal::sum(&base_rep.values).scale(dx).to_f64();
    let regularized = if params.epsilon() > 0.0 {
        let reg = regularized_moments(&mac, params.epsilon())?;
        let h_eps = regularized_maxwellian_entropy(&reg, params)?;
        let rep = dissipation_against(f, &mac, &h_eps, params);
        Some((ExtendedReal::sum(&rep.values).scale(dx).to_f64(), rep.violations.len()))
    } else {
        None
    };

    let prev = ledger.rows.last().cloned();
    let first_entropy = ledger.rows.first().map(|r| r.entropy).unwrap_or(entropy);
    let tau = ledger.tau;
    let track = |rate: f64, flagged: usize, prev: Option<DissipationTrack>| {
        let cumulative = match (prev, ledger.rows.last()) {
            (Some(p), Some(last)) => p.cumulative + 0.5 * (p.rate + rate) * (t - last.t),
            _ => 0.0,
        };
        let residual = match (entropy, first_entropy) {
            (ExtendedReal::Finite(h), ExtendedReal::Finite(h0)) => ExtendedReal::Finite(h + cumulative / tau - h0),
            _ => ExtendedReal::Infinite,
        };
        DissipationTrack { rate, cumulative, residual, flagged_cells: flagged }
    };
    let base = track(base_rate, base_rep.violations.len(), prev.as_ref().map(|p| p.base));
    let regularized =
        regularized.map(|(rate, flagged)| track(rate, flagged, prev.as_ref().map(|p| p.regularized.unwrap_or(p.base))));
    ledger.rows.push(LedgerRow { t, mass, momentum, kinetic_energy, entropy, base, regularized });
    Ok(())
}

fn check_horizon(traj: &Trajectory, t: f64) -> Result<()> {
    let available = traj.end_time();
    if traj.frames().is_empty() || available + 1e-12 * t.abs().max(1.0) < t {
        return Err(BgkError::InsufficientTrajectory { requested: t, available });
    }
    Ok(())
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let pieces: Vec<f64> =
        (1..times.len()).map(|i| 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1])).collect();
    pairwise_sum(pieces.len(), |i| pieces[i])
}

/// `sum |v|^2 |f - M[f]| dx dv` of one state, with the unregularized
/// moment-matched equilibrium.
pub fn equilibrium_gap(f: &DistributionField, params: &ModelParams) -> Result<f64> {
    let base = params.with_epsilon(0.0)?;
    let eq = equilibrium_field(f, &base, EquilibriumKind::Conservative)?;
    let grid = f.grid();
    let nvt = grid.nv_total();
    let per_cell: Vec<f64> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let (a, b) = (f.cell(c), eq.cell(c));
            pairwise_sum(nvt, |j| grid.speed_sq(j) * (a[j] - b[j]).abs())
        })
        .collect();
    Ok(pairwise_sum(per_cell.len(), |c| per_cell[c]) * grid.cell_volume() * grid.velocity_volume())
}

/// Time integral of [`equilibrium_gap`] over `[0, t]` by the trapezoid rule
/// on the stored frames.
pub fn j_functional(traj: &Trajectory, params: &ModelParams, t: f64) -> Result<f64> {
    check_horizon(traj, t)?;
    let frames: Vec<&DistributionField> =
        traj.frames().iter().filter(|f| f.time() <= t + 1e-12 * t.abs().max(1.0)).collect();
    let times: Vec<f64> = frames.iter().map(|f| f.time()).collect();
    let gaps = frames.iter().map(|f| equilibrium_gap(f, params)).collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&times, &gaps))
}

/// Tail-mass propagation bound over `[0, horizon]` at radius `radius`.
pub fn tightness_check(traj: &Trajectory, radius: f64, horizon: f64) -> Result<BoundReport> {
    tightness_check_weighted(traj, radius, horizon, 0.0)
}

/// Same bound for the velocity average against `|v|^sigma`, `sigma` in
/// `[0, 2)`: the right side becomes `E^{sigma/2} rhs^{1-sigma/2}`.
pub fn tightness_check_weighted(traj: &Trajectory, radius: f64, horizon: f64, sigma: f64) -> Result<BoundReport> {
    if !(0.0..2.0).contains(&sigma) {
        return Err(BgkError::InvalidArgument(format!("sigma = {sigma} must lie in [0, 2)")));
    }
    check_horizon(traj, horizon)?;
    let f0 = &traj.frames()[0];
    if f0.grid().mode() != DomainMode::FreeTruncated {
        return Err(BgkError::ModeMismatch { expected: "free_truncated" });
    }
    let mut lhs: f64 = 0.0;
    let mut energy: f64 = 0.0;
    for f in traj.frames().iter().filter(|f| f.time() <= horizon + 1e-12) {
        energy = energy.max(f.weighted_mass());
        let tail = if sigma == 0.0 { tail_mass(f, 2.0 * radius)? } else { weighted_tail(f, 2.0 * radius, sigma) };
        lhs = lhs.max(tail);
    }
    let base = tail_mass(f0, radius)? + 2.0 * energy * horizon / radius;
    let rhs = energy.powf(0.5 * sigma) * base.powf(1.0 - 0.5 * sigma);
    Ok(BoundReport::new(lhs, rhs, 0.0))
}

fn weighted_tail(f: &DistributionField, radius: f64, sigma: f64) -> f64 {
    let grid = f.grid();
    let avg = velocity_average(f, |v| norm(&v).powf(sigma));
    let far: Vec<f64> =
        (0..grid.num_cells()).map(|c| if norm(&grid.cell_center(c)) >= radius { avg[c] } else { 0.0 }).collect();
    pairwise_sum(far.len(), |c| far[c]) * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxwellian::build_maxwellian_field;
    use crate::phase_space::MacroField;
    use std::sync::Arc;

    fn params() -> ModelParams {
        ModelParams::new(1, 2.0, 1.0, 0.1, 0.0).unwrap()
    }

    #[test]
    fn ledger_rejects_repeated_time() {
        let p = params();
        let grid = Arc::new(PhaseGrid::uniform(1, (0.0, 1.0), 4, (-3.0, 3.0), 600, DomainMode::Periodic).unwrap());
        let mac = MacroField::uniform(1, 4, 1.0, [0.0; 2]);
        let f = build_maxwellian_field(&mac, &grid, &p, false).unwrap();
        let mut ledger = EntropyLedger::new(&p);
        ledger_update(&mut ledger, &f, &p).unwrap();
        assert!(matches!(ledger_update(&mut ledger, &f, &p), Err(BgkError::NonMonotoneTime { .. })));
        let row = &ledger.rows()[0];
        assert!((row.mass - 1.0).abs() < 1e-3);
        assert_eq!(row.base.cumulative, 0.0);
        assert_eq!(row.base.residual, ExtendedReal::Finite(0.0));
    }

    #[test]
    fn regularized_equilibrium_entropy_is_smaller() {
        let p = params().with_epsilon(0.3).unwrap();
        let mac = MacroField::from_rho_u(1, vec![0.2, 1.0, 7.0], vec![[0.5, 0.0], [-2.0, 0.0], [0.0, 0.0]]);
        let reg = regularized_moments(&mac, 0.3).unwrap();
        let h = maxwellian_entropy(&mac, &p);
        let he = regularized_maxwellian_entropy(&reg, &p).unwrap();
        for c in 0..3 {
            assert!(he[c] <= h[c]);
        }
    }

    #[test]
    fn ledger_tolerance_scales_with_spacings() {
        let grid = PhaseGrid::uniform(1, (0.0, 1.0), 10, (-1.0, 1.0), 20, DomainMode::Periodic).unwrap();
        let tol = tol_ledger(2.0, 0.01, &grid, 0.5);
        assert!((tol - 2.0 * (0.01 + 0.1 + 0.1) * 0.5).abs() < 1e-15);
    }
}
