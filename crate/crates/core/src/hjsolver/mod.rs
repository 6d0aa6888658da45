//! Backward reachable tubes and robust control invariant sets from the
//! double-obstacle Hamilton–Jacobi variational inequality.
//!
//! Fields are advanced backward in time with a first-order global
//! Lax–Friedrichs scheme and forward-Euler steps bounded by the CFL
//! condition. After every step the value is clipped from above by the target
//! and from below by the constraint.

mod backward;
mod scheme;
mod simulate;

use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

pub(crate) use backward::{BackwardPass, Monotone};
pub use backward::SolveStats;
pub use scheme::{cfl_dt, lax_friedrichs_update};
pub(crate) use simulate::rk4_step;
pub use simulate::{simulate, SimulationOptions, Trajectory};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::statespace::{Grid, TimeField, ValueTube};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Fraction of the largest stable explicit step, in `(0, 1]`.
    pub cfl: f64,
    /// Store a field every `save_stride` CFL steps.
    pub save_stride: usize,
    /// Largest node-wise change between stamps below which a problem with
    /// time-invariant inputs is treated as converged.
    pub convergence_tol: f64,
    /// Store fields on a fixed time lattice instead of every
    /// `save_stride` steps.
    #[serde(default)]
    pub stamp_interval: Option<f64>,
    #[serde(default)]
    pub dissipation: Dissipation,
    #[serde(default)]
    pub boundary: Boundary,
}

/// Lax–Friedrichs dissipation coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dissipation {
    /// One bound per dimension over the whole grid.
    #[default]
    Global,
    /// Per-node bounds from the kernel, capped by the global ones. The time
    /// step still follows the global bounds.
    Local,
}

/// Ghost values beyond non-periodic grid edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Linear extrapolation of the interior gradient.
    #[default]
    CopyGradient,
    /// The edge value pushed away from zero by the size of the interior
    /// difference, so an edge node never changes sign on its own.
    AwayFromZero,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { cfl: 0.9, save_stride: 10, convergence_tol: 1e-5, stamp_interval: None, dissipation: Dissipation::Global, boundary: Boundary::CopyGradient }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidRequest(format!("CFL number {} is outside (0, 1]", self.cfl)));
        }
        if self.save_stride == 0 {
            return Err(Error::InvalidRequest("save_stride must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidRequest("convergence_tol must be positive".into()));
        }
        if let Some(dt) = self.stamp_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidRequest(format!("stamp interval {dt} must be positive")));
            }
        }
        Ok(())
    }
}

/// Reach `target` within `t_span` while staying inside `constraint`.
pub struct BrtRequest<'a, M: Dynamics> {
    pub model: &'a M,
    pub grid: Arc<Grid>,
    pub target: &'a dyn TimeField,
    pub constraint: &'a dyn TimeField,
    pub t_span: (f64, f64),
}

/// A solved tube with its solver bookkeeping.
#[derive(Debug, Clone)]
pub struct Solution {
    pub tube: ValueTube,
    pub stats: SolveStats,
}

/// Ascending stamp times on `[t0, t1]` for the given options.
///
/// Without a stamp interval the step count is rounded up to a multiple of
/// `save_stride` so that stamps fall on whole steps.
pub fn stamp_schedule(t_span: (f64, f64), dt_cfl: Option<f64>, opts: &SolverOptions) -> Vec<f64> {
    let (t0, t1) = t_span;
    let span = t1 - t0;
    let intervals = match (opts.stamp_interval, dt_cfl) {
        (Some(iv), _) => ((span / iv) - 1e-9).ceil().max(1.0) as usize,
        (None, Some(dt)) => {
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            steps.div_ceil(opts.save_stride)
        }
        (None, None) => 1,
    };
    (0..=intervals)
        .map(|k| if k == intervals { t1 } else { t0 + span * k as f64 / intervals as f64 })
        .collect()
}

/// Largest Euler step for the stamp lattice: `save_stride` equal steps per
/// interval, or the CFL step when stamps are on a fixed lattice.
fn step_bound(stamps: &[f64], dt_cfl: Option<f64>, opts: &SolverOptions) -> f64 {
    let gap = stamps[1] - stamps[0];
    match (opts.stamp_interval, dt_cfl) {
        (_, None) => gap,
        (Some(_), Some(dt)) => dt,
        (None, Some(_)) => gap / opts.save_stride as f64 * (1.0 + 1e-12),
    }
}

fn check_inputs(grid: &Arc<Grid>, state_dim: usize, fields: &[&dyn TimeField], t_span: (f64, f64), opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(Error::InvalidRequest(format!("time span [{t0}, {t1}] is empty")));
    }
    if state_dim != grid.ndim() {
        return Err(Error::DimensionMismatch(format!("model has {state_dim} states, grid {} dimensions", grid.ndim())));
    }
    for f in fields {
        if f.grid().as_ref() != grid.as_ref() {
            return Err(Error::GridMismatch);
        }
        if !f.covers(t0, t1) {
            return Err(Error::InvalidRequest(format!("an input tube does not cover [{t0}, {t1}]")));
        }
    }
    Ok(())
}

/// Backward reachable tube `{V ≤ 0}` of `target` under `constraint`.
pub fn solve_brt<M: Dynamics>(req: &BrtRequest<'_, M>, opts: &SolverOptions) -> Result<ValueTube> {
    Ok(solve_brt_detailed(req, opts)?.tube)
}

pub fn solve_brt_detailed<M: Dynamics>(req: &BrtRequest<'_, M>, opts: &SolverOptions) -> Result<Solution> {
    let grid = &req.grid;
    check_inputs(grid, req.model.state_dim(), &[req.target, req.constraint], req.t_span, opts)?;
    let alpha = req.model.dissipation_bounds(grid);
    let dt_cfl = cfl_dt(grid, &alpha, opts.cfl)?;
    let stamps = stamp_schedule(req.t_span, dt_cfl, opts);
    let t1 = req.t_span.1;

    let mut initial = vec![0f32; grid.len()];
    req.target.fill(t1, &mut initial)?;
    req.constraint.combine_into(t1, &mut initial, crate::statespace::Combine::Max)?;

    let invariant = req.target.is_invariant() && req.constraint.is_invariant();
    let pass = BackwardPass {
        model: req.model,
        grid,
        target: Some(req.target),
        constraint: req.constraint,
        floor: None,
        stamps: &stamps,
        initial,
        dt_max: step_bound(&stamps, dt_cfl, opts),
        monotone: invariant.then_some(Monotone::Decreasing),
        convergence_tol: invariant.then_some(opts.convergence_tol),
        dissipation: opts.dissipation,
        boundary: opts.boundary,
    };
    let (fields, stats) = pass.run()?;
    info!("reachable tube: {} steps, {} stamps, {:.2} s", stats.steps, stamps.len(), stats.seconds);
    Ok(Solution { tube: ValueTube::new(stamps, fields)?, stats })
}

/// Largest set `{W ≤ 0}` from which the state can be kept inside
/// `constraint` until `t_span.1`.
pub fn solve_rci<M: Dynamics>(model: &M, grid: &Arc<Grid>, constraint: &dyn TimeField, t_span: (f64, f64), opts: &SolverOptions) -> Result<ValueTube> {
    Ok(solve_rci_detailed(model, grid, constraint, t_span, opts)?.tube)
}

pub fn solve_rci_detailed<M: Dynamics>(model: &M, grid: &Arc<Grid>, constraint: &dyn TimeField, t_span: (f64, f64), opts: &SolverOptions) -> Result<Solution> {
    check_inputs(grid, model.state_dim(), &[constraint], t_span, opts)?;
    let alpha = model.dissipation_bounds(grid);
    let dt_cfl = cfl_dt(grid, &alpha, opts.cfl)?;
    let stamps = stamp_schedule(t_span, dt_cfl, opts);
    let mut initial = vec![0f32; grid.len()];
    constraint.fill(t_span.1, &mut initial)?;
    let invariant = constraint.is_invariant();
    let pass = BackwardPass {
        model,
        grid,
        target: None,
        constraint,
        floor: None,
        stamps: &stamps,
        initial,
        dt_max: step_bound(&stamps, dt_cfl, opts),
        monotone: invariant.then_some(Monotone::Increasing),
        convergence_tol: invariant.then_some(opts.convergence_tol),
        dissipation: opts.dissipation,
        boundary: opts.boundary,
    };
    let (fields, stats) = pass.run()?;
    info!("invariant set: {} steps, {} stamps, {:.2} s", stats.steps, stamps.len(), stats.seconds);
    Ok(Solution { tube: ValueTube::new(stamps, fields)?, stats })
}

/// Euler step bound for a pass that reuses an existing stamp lattice; equal
/// to the bound the lattice was solved with.
pub(crate) fn lattice_step<M: Dynamics>(model: &M, grid: &Grid, stamps: &[f64], opts: &SolverOptions) -> Result<f64> {
    let dt_cfl = cfl_dt(grid, &model.dissipation_bounds(grid), opts.cfl)?;
    Ok(step_bound(stamps, dt_cfl, opts))
}

#[cfg(test)]
mod tests;
