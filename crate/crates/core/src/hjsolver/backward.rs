use std::sync::Arc;
use std::time::Instant;

use log::debug;
use rayon::prelude::*;

use super::scheme::sweep;
use super::{Boundary, Dissipation};
use crate::dynamics::{Dynamics, ReachMode};
use crate::error::Result;
use crate::statespace::{Grid, TimeField, ValueField};

/// Node-wise ordering enforced between consecutive steps of a problem whose
/// inputs do not depend on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Monotone {
    /// Values may only decrease backward in time (reachable tubes grow).
    Decreasing,
    /// Values may only increase backward in time (invariant sets shrink).
    Increasing,
}

/// Bookkeeping returned with every backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Explicit Euler steps actually taken.
    pub steps: usize,
    /// Largest step used.
    pub max_dt: f64,
    /// Stamp time at which the fixed point was detected, if any.
    pub converged_at: Option<f64>,
    /// Largest raise applied by the lower envelope (zero without one).
    pub floor_correction: f64,
    pub seconds: f64,
}

pub(crate) struct BackwardPass<'a, M: Dynamics> {
    pub model: &'a M,
    pub grid: &'a Arc<Grid>,
    pub target: Option<&'a dyn TimeField>,
    pub constraint: &'a dyn TimeField,
    /// Lower envelope applied after every step, `V = max(V, floor)`.
    pub floor: Option<&'a dyn TimeField>,
    /// Ascending stamp times; the pass starts at the last one.
    pub stamps: &'a [f64],
    /// Values at the last stamp.
    pub initial: Vec<f32>,
    pub dt_max: f64,
    pub monotone: Option<Monotone>,
    pub convergence_tol: Option<f64>,
    pub dissipation: Dissipation,
    pub boundary: Boundary,
}

impl<M: Dynamics> BackwardPass<'_, M> {
    /// Runs the pass and returns one field per stamp in ascending order.
    pub fn run(self) -> Result<(Vec<ValueField>, SolveStats)> {
        let start = Instant::now();
        let grid = self.grid;
        let n = grid.len();
        let alpha = self.model.dissipation_bounds(grid);
        let kernel = self.model.kernel(grid, ReachMode::Reach);
        let k_last = self.stamps.len() - 1;

        let mut stats = SolveStats::default();
        let mut v = self.initial;
        let mut next = vec![0f32; n];
        let mut c_buf = vec![0f32; n];
        let mut g_buf = vec![0f32; n];
        let mut floor_buf = vec![0f32; n];
        let mut saved: Vec<Option<ValueField>> = vec![None; self.stamps.len()];
        saved[k_last] = Some(ValueField::from_raw(grid.clone(), v.clone()));

        let mut converged = false;
        for k in (0..k_last).rev() {
            if converged {
                saved[k] = saved[k + 1].clone();
                continue;
            }
            let (t_lo, t_hi) = (self.stamps[k], self.stamps[k + 1]);
            let substeps = ((t_hi - t_lo) / self.dt_max - 1e-9).ceil().max(1.0) as usize;
            let dt = (t_hi - t_lo) / substeps as f64;
            stats.max_dt = stats.max_dt.max(dt);
            let dt32 = dt as f32;
            let at_stamp_start = self.convergence_tol.map(|_| v.clone());

            for j in 1..=substeps {
                let t = if j == substeps { t_lo } else { t_hi - j as f64 * dt };
                self.constraint.fill(t, &mut c_buf)?;
                if let Some(target) = self.target {
                    target.fill(t, &mut g_buf)?;
                }
                let has_target = self.target.is_some();
                let (c_ref, g_ref) = (&c_buf, &g_buf);
                let monotone = self.monotone;
                sweep(grid, &kernel, &alpha, self.dissipation == Dissipation::Local, self.boundary, &v, &mut next, |i, terms| {
                    let lf = terms.value + dt32 * (terms.hamiltonian + terms.dissipation);
                    let stepped = if has_target { lf.min(g_ref[i]) } else { lf };
                    let w = stepped.max(c_ref[i]);
                    match monotone {
                        Some(Monotone::Decreasing) => w.min(terms.value),
                        Some(Monotone::Increasing) => w.max(terms.value),
                        None => w,
                    }
                });
                if let Some(floor) = self.floor {
                    floor.fill(t, &mut floor_buf)?;
                    let raise = next
                        .par_iter_mut()
                        .zip(floor_buf.par_iter())
                        .with_min_len(4096)
                        .map(|(x, f)| {
                            let r = f - *x;
                            if r > 0.0 {
                                *x = *f;
                                r
                            } else {
                                0.0
                            }
                        })
                        .reduce(|| 0.0f32, f32::max);
                    stats.floor_correction = stats.floor_correction.max(raise as f64);
                }
                std::mem::swap(&mut v, &mut next);
                stats.steps += 1;
            }
            if let (Some(tol), Some(prev)) = (self.convergence_tol, at_stamp_start) {
                let change = v
                    .par_iter()
                    .zip(prev.par_iter())
                    .with_min_len(4096)
                    .map(|(a, b)| (a - b).abs())
                    .reduce(|| 0.0f32, f32::max);
                if (change as f64) < tol {
                    converged = true;
                    stats.converged_at = Some(t_lo);
                    debug!("fixed point reached at t = {t_lo:.3} (change {change:.2e})");
                }
            }
            saved[k] = Some(ValueField::from_raw(grid.clone(), v.clone()));
        }
        stats.seconds = start.elapsed().as_secs_f64();
        Ok((saved.into_iter().map(|f| f.expect("every stamp is filled")).collect(), stats))
    }
}
