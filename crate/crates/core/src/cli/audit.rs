//! Monte-Carlo rollouts from the online tube of a planned vehicle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{plan_artifacts, Session};
use crate::error::Result;
use crate::spp::{feedback_options, rollout};

/// A rollout that missed the goal or broke a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub z0: Vec<f64>,
    pub reached_at: Option<f64>,
    pub constraint_margin: f64,
    pub danger_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub vehicle: String,
    pub runs: usize,
    pub reached: usize,
    /// Candidate starts drawn, including rejected ones.
    pub draws: usize,
    pub worst_constraint_margin: f64,
    pub worst_danger_margin: f64,
    /// One grid cell: the largest spacing over all dimensions.
    pub constraint_tolerance: f64,
    /// One position cell.
    pub danger_tolerance: f64,
    pub failures: Vec<AuditFailure>,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.runs > 0 && self.failures.is_empty()
    }
}

/// Rolls vehicle `j` out `runs` times from random entry states inside its
/// online tube at the start of the horizon.
///
/// Starts are drawn around sub-zero entry nodes, jittered by up to half a
/// cell and kept when the interpolated entry and tube values are both
/// non-positive. A rollout passes when it reaches the goal within the
/// horizon with constraint and danger margins no worse than one cell.
pub fn audit_rollouts(session: &Session, j: usize, runs: usize, dt: f64, rng: &mut impl Rng) -> Result<AuditSummary> {
    let (v, online, danger, window) = plan_artifacts(session, j)?;
    let g = v.grid.clone();
    let (t0, t1) = session.scenario.t_span();
    let sim = feedback_options(&online, window, dt);
    let mut s = AuditSummary {
        vehicle: v.name.clone(),
        runs: 0,
        reached: 0,
        draws: 0,
        worst_constraint_margin: f64::INFINITY,
        worst_danger_margin: f64::INFINITY,
        constraint_tolerance: g.max_spacing(),
        danger_tolerance: g.spacing()[0].max(g.spacing()[1]),
        failures: Vec::new(),
    };
    let slice = online.omega_slice(t0)?;
    let inside: Vec<usize> = (0..g.len()).filter(|&i| slice.values()[i] <= 0.0 && v.entry.values()[i] <= 0.0).collect();
    if inside.is_empty() {
        return Ok(s);
    }
    while s.runs < runs && s.draws < 1000 * runs {
        s.draws += 1;
        let node = g.node(inside[rng.gen_range(0..inside.len())]);
        let z0: Vec<f64> = (0..g.ndim()).map(|d| (node[d] + g.spacing()[d] * rng.gen_range(-0.5..0.5)).clamp(g.lo()[d], g.hi()[d])).collect();
        if v.entry.interpolate(&z0)? > 0.0 || online.value_at(&z0, t0)? > 0.0 {
            continue;
        }
        s.runs += 1;
        let r = rollout(&online, &v, Some(&danger), &z0, &sim)?;
        s.worst_constraint_margin = s.worst_constraint_margin.min(r.min_constraint_margin);
        s.worst_danger_margin = s.worst_danger_margin.min(r.min_danger_margin);
        let ok = r.reached_at.is_some_and(|t| t <= t1) && r.min_constraint_margin >= -s.constraint_tolerance && r.min_danger_margin >= -s.danger_tolerance;
        if ok {
            s.reached += 1;
        } else {
            s.failures.push(AuditFailure { z0, reached_at: r.reached_at, constraint_margin: r.min_constraint_margin, danger_margin: r.min_danger_margin });
        }
    }
    Ok(s)
}
