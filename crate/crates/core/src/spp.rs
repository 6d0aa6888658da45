//! Sequential path planning: vehicles are solved in priority order and every
//! solved vehicle becomes a known, time-varying obstacle for the ones after
//! it.
//!
//! Each vehicle gets an offline tube `ℛ(𝒢ⱼ; 𝒞ⱼ)` that ignores traffic. The
//! danger set `𝒟ⱼ` collects the dilated footprints of all higher-priority
//! vehicles; where it meets the offline tube (the interaction window
//! `[t_a, t_b]`) the tube is re-solved over `t ≤ t_b` with constraint
//! `𝒞ⱼ ∩ 𝒟ⱼᶜ`, keeping the offline tube for later times.
//!
//! Danger sets are stored as one `(x, y)` plane per stamp and read as
//! cylinders over the remaining state dimensions. The first two grid
//! dimensions must be the position.

use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, VehicleModel};
use crate::error::{Error, Result};
use crate::hjsolver::{
    lattice_step, rk4_step, simulate, solve_brt_detailed, BackwardPass, Boundary, BrtRequest, Dissipation, SimulationOptions, Solution, SolveStats, SolverOptions, Trajectory,
};
use crate::ltl::Formula;
use crate::scenario::{compile_constraints, entry_field, Scenario};
use crate::statespace::{Combine, Grid, Intersection, Negated, TimeField, ValueField, ValueTube, FAR};
use crate::tlt::{Bindings, Verdict};

const STAMP_TOL: f64 = 1e-9;

/// One vehicle of a sequential planning problem. Priority is the position
/// in the slice handed to [`plan`].
#[derive(Debug, Clone)]
pub struct VehicleSpec<M: Dynamics = VehicleModel> {
    pub name: String,
    pub model: M,
    pub grid: Arc<Grid>,
    pub goal: ValueTube,
    pub constraint: ValueTube,
    /// Declared entry states (already intersected with the constraint).
    pub entry: ValueField,
    pub footprint: f64,
    /// Nominal start used to commit this vehicle's reservation.
    pub start: Option<Vec<f64>>,
}

impl VehicleSpec<VehicleModel> {
    pub fn from_scenario(s: &Scenario, j: usize, grid: &Arc<Grid>) -> Result<Self> {
        let seed = s.vehicle(j)?;
        let (constraint, goal) = compile_constraints(s, j, grid)?;
        Ok(Self {
            name: seed.name.clone(),
            model: s.model(j)?,
            grid: grid.clone(),
            goal,
            constraint,
            entry: entry_field(s, j, grid)?,
            footprint: seed.footprint,
            start: seed.start.clone(),
        })
    }

    pub fn all_from_scenario(s: &Scenario, grid: &Arc<Grid>) -> Result<Vec<Self>> {
        (0..s.vehicles.len()).map(|j| Self::from_scenario(s, j, grid)).collect()
    }
}

/// Where a higher-priority vehicle is assumed to be at each stamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DangerPolicy {
    /// Every position of the vehicle's online tube.
    AdmissibleSet,
    /// The positions swept by one committed closed-loop trajectory of the
    /// vehicle, held for half a stamp interval on either side of each stamp.
    #[default]
    Reservation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub solver: SolverOptions,
    pub danger: DangerPolicy,
    /// Integration step of committed trajectories.
    pub rollout_dt: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions {
                stamp_interval: Some(0.5),
                dissipation: Dissipation::Local,
                boundary: Boundary::AwayFromZero,
                ..SolverOptions::default()
            },
            danger: DangerPolicy::default(),
            rollout_dt: 0.01,
        }
    }
}

/// Positions a vehicle has committed to, held within `radius` in the max
/// norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub times: Vec<f64>,
    pub xy: Vec<[f64; 2]>,
    pub radius: f64,
}

impl Reservation {
    pub fn from_trajectory(traj: &Trajectory, radius: f64) -> Self {
        Self { times: traj.times.clone(), xy: traj.states.iter().map(|z| [z[0], z[1]]).collect(), radius }
    }

    pub fn widened(&self, by: f64) -> Self {
        Self { radius: self.radius + by, ..self.clone() }
    }

    /// The samples bracketing `t`; empty outside the trajectory.
    fn around(&self, t: f64) -> &[[f64; 2]] {
        let (Some(&lo), Some(&hi)) = (self.times.first(), self.times.last()) else {
            return &[];
        };
        if t < lo - STAMP_TOL || t > hi + STAMP_TOL {
            return &[];
        }
        let k = self.times.partition_point(|s| *s < t - STAMP_TOL);
        if k < self.times.len() && self.times[k] <= t + STAMP_TOL {
            return &self.xy[k..=k];
        }
        &self.xy[k.saturating_sub(1)..=k.min(self.times.len() - 1)]
    }

    /// Max-norm distance from `(x, y)` to the reserved positions at `t`,
    /// minus the radius; infinite when nothing is reserved.
    pub fn value_at(&self, x: f64, y: f64, t: f64) -> f64 {
        self.around(t).iter().map(|p| (p[0] - x).abs().max((p[1] - y).abs())).fold(f64::INFINITY, f64::min) - self.radius
    }
}

/// Time-varying set over the `(x, y)` plane, read as a cylinder over the
/// remaining dimensions of `grid`.
///
/// The stamped planes are what reports and the interaction window see;
/// between stamps they are read as the union of both neighbours. A set
/// built only from reservations is instead evaluated exactly at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct DangerSet {
    grid: Arc<Grid>,
    times: Vec<f64>,
    planes: Vec<ValueField>,
    reservations: Option<Vec<Reservation>>,
}

/// The `(x, y)` plane grid underlying `grid`.
pub fn plane_grid(grid: &Grid) -> Result<Arc<Grid>> {
    if grid.ndim() < 2 {
        return Err(Error::DimensionMismatch("danger sets need two position dimensions".into()));
    }
    if grid.periodic()[0] || grid.periodic()[1] {
        return Err(Error::InvalidRequest("position dimensions must not be periodic".into()));
    }
    Ok(Arc::new(Grid::new(&grid.lo()[..2], &grid.hi()[..2], &grid.shape()[..2], &[false, false])?))
}

impl DangerSet {
    pub fn new(grid: Arc<Grid>, times: Vec<f64>, planes: Vec<ValueField>) -> Result<Self> {
        let plane = plane_grid(&grid)?;
        if times.is_empty() || times.len() != planes.len() {
            return Err(Error::DimensionMismatch(format!("{} stamps for {} planes", times.len(), planes.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidRequest("danger stamps must be strictly increasing".into()));
        }
        if planes.iter().any(|p| p.grid().as_ref() != plane.as_ref()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, times, planes, reservations: None })
    }

    /// Evaluate the set exactly from `reservations`, which the stamped
    /// planes must cover.
    pub fn with_reservations(mut self, reservations: Vec<Reservation>) -> Self {
        self.reservations = Some(reservations);
        self
    }

    pub fn empty(grid: &Arc<Grid>, times: &[f64]) -> Result<Self> {
        let plane = plane_grid(grid)?;
        Ok(Self::new(grid.clone(), times.to_vec(), times.iter().map(|_| ValueField::empty(plane.clone())).collect())?.with_reservations(Vec::new()))
    }

    pub fn reservations(&self) -> Option<&[Reservation]> {
        self.reservations.as_deref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn planes(&self) -> &[ValueField] {
        &self.planes
    }

    pub fn is_empty_set(&self) -> bool {
        self.planes.iter().all(ValueField::is_empty_set)
    }

    /// Area of the plane at stamp `k`, counted in cells.
    pub fn area(&self, k: usize) -> f64 {
        let s = self.planes[k].grid().spacing();
        self.planes[k].count_inside() as f64 * s[0] * s[1]
    }

    /// Node-wise union with another danger set on the same lattice.
    pub fn union(&self, other: &DangerSet) -> Result<DangerSet> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.times.len() != other.times.len() || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > STAMP_TOL) {
            return Err(Error::InvalidRequest("danger sets use different stamps".into()));
        }
        let planes = self.planes.iter().zip(&other.planes).map(|(a, b)| a.zip_with(b, f32::min)).collect::<Result<_>>()?;
        let mut out = Self::new(self.grid.clone(), self.times.clone(), planes)?;
        if let (Some(a), Some(b)) = (&self.reservations, &other.reservations) {
            out.reservations = Some(a.iter().chain(b).cloned().collect());
        }
        Ok(out)
    }

    /// The set dilated by `by` and carried over to `onto`, which must share
    /// the position axes.
    pub fn dilated(&self, by: f64, onto: &Arc<Grid>) -> Result<DangerSet> {
        check_plane_compatible(&self.grid, onto)?;
        let planes = self.planes.iter().map(|p| dilate(p, by)).collect::<Result<_>>()?;
        let mut out = Self::new(onto.clone(), self.times.clone(), planes)?;
        out.reservations = self.reservations.as_ref().map(|rs| rs.iter().map(|r| r.widened(by)).collect());
        Ok(out)
    }

    fn bracket(&self, t: f64) -> Result<(usize, usize)> {
        let (lo, hi) = (self.times[0], *self.times.last().unwrap());
        if !(t >= lo - STAMP_TOL && t <= hi + STAMP_TOL) {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|s| *s < t - STAMP_TOL);
        if k < self.times.len() && (self.times[k] - t).abs() <= STAMP_TOL {
            Ok((k, k))
        } else {
            Ok((k - 1, k))
        }
    }

    /// Stamped plane at `t`, or the union of the two around it.
    pub fn stamped_plane_at(&self, t: f64) -> Result<ValueField> {
        let (a, b) = self.bracket(t)?;
        if a == b {
            Ok(self.planes[a].clone())
        } else {
            self.planes[a].zip_with(&self.planes[b], f32::min)
        }
    }

    /// Plane value at time `t`.
    pub fn plane_at(&self, t: f64) -> Result<ValueField> {
        let Some(rs) = &self.reservations else {
            return self.stamped_plane_at(t);
        };
        self.bracket(t)?;
        let plane = self.planes[0].grid().clone();
        let (xs, ys) = (plane.axis(0), plane.axis(1));
        let ny = ys.len();
        let values = (0..xs.len() * ny).map(|q| reserved_value(rs, xs[q / ny], ys[q % ny], t)).collect();
        ValueField::new(plane, values)
    }

    /// Value at position `(xy[0], xy[1])` and time `t`, interpolated
    /// between nodes when read from the stamped planes.
    pub fn value_at(&self, xy: &[f64], t: f64) -> Result<f64> {
        let (a, b) = self.bracket(t)?;
        if let Some(rs) = &self.reservations {
            return Ok(reserved_value(rs, xy[0], xy[1], t) as f64);
        }
        let pa = self.planes[a].interpolate(&xy[..2])?;
        Ok(if a == b { pa } else { pa.min(self.planes[b].interpolate(&xy[..2])?) })
    }

    /// Full-dimensional tube with the same stamps.
    pub fn to_value_tube(&self) -> Result<ValueTube> {
        let fields = self
            .times
            .iter()
            .map(|&t| {
                let mut out = vec![0f32; self.grid.len()];
                self.fill(t, &mut out)?;
                ValueField::new(self.grid.clone(), out)
            })
            .collect::<Result<_>>()?;
        ValueTube::new(self.times.clone(), fields)
    }
}

fn reserved_value(rs: &[Reservation], x: f64, y: f64, t: f64) -> f32 {
    let d = rs.iter().map(|r| r.value_at(x, y, t)).fold(f64::INFINITY, f64::min);
    if d.is_finite() {
        (d as f32).clamp(-FAR, FAR)
    } else {
        FAR
    }
}

impl TimeField for DangerSet {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn is_invariant(&self) -> bool {
        false
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        self.times[0] <= t0 + STAMP_TOL && t1 <= self.times.last().unwrap() + STAMP_TOL
    }

    fn combine_into(&self, t: f64, out: &mut [f32], op: Combine) -> Result<()> {
        let plane = self.plane_at(t)?;
        let plane = plane.values();
        let column = self.grid.strides()[1];
        out.par_chunks_mut(column).enumerate().for_each(|(q, chunk)| {
            let v = plane[q];
            for o in chunk {
                *o = op.apply(*o, v);
            }
        });
        Ok(())
    }
}

/// Projection onto the position plane: the minimum over all other
/// dimensions of each `(x, y)` column.
pub fn project_xy(field: &ValueField) -> Result<ValueField> {
    let plane = plane_grid(field.grid())?;
    let column = field.grid().strides()[1];
    let values = field.values().par_chunks(column).map(|c| c.iter().copied().fold(f32::INFINITY, f32::min)).collect();
    ValueField::new(plane, values)
}

/// Max-norm dilation of the sub-zero nodes of a plane by `radius`: the value
/// at each node is its distance to the nearest occupied node minus
/// `radius`, or [`FAR`] when nothing is occupied.
pub fn dilate(occupied: &ValueField, radius: f64) -> Result<ValueField> {
    let g = occupied.grid();
    if g.ndim() != 2 {
        return Err(Error::DimensionMismatch("dilation works on planes".into()));
    }
    let (nx, ny) = (g.shape()[0], g.shape()[1]);
    let (xs, ys) = (g.axis(0), g.axis(1));
    let occ = occupied.values();
    // Distance along y to the nearest occupied node of the same column.
    let mut dy = vec![f64::INFINITY; nx * ny];
    for i in 0..nx {
        let filled: Vec<f64> = (0..ny).filter(|&j| occ[i * ny + j] <= 0.0).map(|j| ys[j]).collect();
        for j in 0..ny {
            dy[i * ny + j] = filled.iter().map(|y| (ys[j] - y).abs()).fold(f64::INFINITY, f64::min);
        }
    }
    let values = (0..nx * ny)
        .into_par_iter()
        .map(|q| {
            let (k, j) = (q / ny, q % ny);
            let d = (0..nx).map(|i| (xs[k] - xs[i]).abs().max(dy[i * ny + j])).fold(f64::INFINITY, f64::min);
            if d.is_infinite() {
                return FAR;
            }
            let v = d - radius;
            // Snap rounding ties onto the boundary.
            if v.abs() < 1e-9 {
                0.0
            } else {
                (v as f32).clamp(-FAR, FAR)
            }
        })
        .collect();
    ValueField::new(g.clone(), values)
}

fn check_plane_compatible(a: &Grid, b: &Grid) -> Result<()> {
    let same = a.ndim() >= 2
        && b.ndim() >= 2
        && a.shape()[..2] == b.shape()[..2]
        && (0..2).all(|d| (a.lo()[d] - b.lo()[d]).abs() < 1e-12 && (a.hi()[d] - b.hi()[d]).abs() < 1e-12);
    if same {
        Ok(())
    } else {
        Err(Error::InvalidRequest("vehicle grids have incompatible x-y extents".into()))
    }
}

/// Danger set induced on `target_grid` by a higher-priority vehicle's tube:
/// projection onto the plane, dilation by `radius` (the sum of both
/// footprints) and cylindrical embedding.
pub fn danger_set(higher: &ValueTube, target_grid: &Arc<Grid>, radius: f64) -> Result<DangerSet> {
    check_plane_compatible(higher.grid(), target_grid)?;
    if higher.is_invariant() {
        return Err(Error::InvalidRequest("danger sets are built from time-varying tubes".into()));
    }
    let planes = higher.fields().iter().map(|f| dilate(&project_xy(f)?, radius)).collect::<Result<_>>()?;
    DangerSet::new(target_grid.clone(), higher.times().to_vec(), planes)
}

/// Occupancy of a committed trajectory: at stamp `t_k` the positions held
/// during `[t_k − h/2, t_k + h/2]` (`h` the local stamp gap), widened by
/// one cell.
pub fn reservation_planes(traj: &Trajectory, grid: &Grid, times: &[f64]) -> Result<Vec<ValueField>> {
    let plane = plane_grid(grid)?;
    let cell = plane.spacing()[0].max(plane.spacing()[1]);
    let (xs, ys) = (plane.axis(0), plane.axis(1));
    let ny = ys.len();
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let before = if k > 0 { 0.5 * (t - times[k - 1]) } else { 0.0 };
            let after = if k + 1 < times.len() { 0.5 * (times[k + 1] - t) } else { 0.0 };
            let held: Vec<&Vec<f64>> = traj
                .times
                .iter()
                .zip(&traj.states)
                .filter(|(s, _)| **s >= t - before - STAMP_TOL && **s <= t + after + STAMP_TOL)
                .map(|(_, z)| z)
                .collect();
            let values = (0..xs.len() * ny)
                .map(|q| {
                    let (x, y) = (xs[q / ny], ys[q % ny]);
                    let d = held.iter().map(|z| (z[0] - x).abs().max((z[1] - y).abs())).fold(f64::INFINITY, f64::min);
                    if d.is_finite() {
                        (d - cell) as f32
                    } else {
                        FAR
                    }
                })
                .collect();
            ValueField::new(plane.clone(), values)
        })
        .collect()
}

/// Offline tube `ℛ(𝒢ⱼ; 𝒞ⱼ)` over `t_span`.
pub fn offline_pass<M: Dynamics>(v: &VehicleSpec<M>, t_span: (f64, f64), opts: &SolverOptions) -> Result<Solution> {
    let req = BrtRequest { model: &v.model, grid: v.grid.clone(), target: &v.goal, constraint: &v.constraint, t_span };
    solve_brt_detailed(&req, opts)
}

/// Smallest stamp interval containing every stamp at which the danger set
/// meets the offline tube, or `None` when they never meet.
pub fn interaction_window(offline: &ValueTube, danger: &DangerSet) -> Result<Option<(f64, f64)>> {
    if offline.grid() != danger.grid() {
        return Err(Error::GridMismatch);
    }
    if offline.is_invariant() {
        return Err(Error::InvalidRequest("interaction windows need a time-varying tube".into()));
    }
    let column = offline.grid().strides()[1];
    let mut window: Option<(f64, f64)> = None;
    for (&t, field) in offline.times().iter().zip(offline.fields()) {
        let plane = danger.stamped_plane_at(t)?;
        let meets = field
            .values()
            .par_chunks(column)
            .zip(plane.values().par_iter())
            .any(|(c, d)| *d <= 0.0 && c.iter().any(|v| *v <= 0.0));
        if meets {
            window = Some(window.map_or((t, t), |(a, _)| (a, t)));
        }
    }
    Ok(window)
}

/// Online-pass result: the stitched tube and the re-solve bookkeeping.
#[derive(Debug, Clone)]
pub struct OnlineSolution {
    pub tube: ValueTube,
    pub stats: SolveStats,
}

/// Re-solves the offline tube over `t ≤ t_b` under `𝒞ⱼ ∩ 𝒟ⱼᶜ`.
///
/// The pass starts from the offline slice at `t_b` united with the goal and
/// restricted to `𝒞ⱼ ∩ 𝒟ⱼᶜ`. The offline tube is a lower envelope of the
/// result, so the online tube is contained in it; stamps after `t_b` are
/// copied unchanged.
pub fn online_pass<M: Dynamics>(offline: &ValueTube, v: &VehicleSpec<M>, danger: &DangerSet, t_b: f64, opts: &SolverOptions) -> Result<OnlineSolution> {
    let grid = &v.grid;
    if offline.grid() != grid || danger.grid() != grid || v.goal.grid() != grid || v.constraint.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let times = offline.times();
    let Some((lo, hi)) = offline.time_range().filter(|_| !offline.is_invariant()) else {
        return Err(Error::InvalidRequest("online passes need a time-varying offline tube".into()));
    };
    if !(t_b >= lo - STAMP_TOL && t_b <= hi + STAMP_TOL) {
        return Err(Error::TimeOutOfRange { t: t_b, lo, hi });
    }
    let k_b = times
        .iter()
        .position(|s| (s - t_b).abs() <= STAMP_TOL)
        .ok_or_else(|| Error::InvalidRequest(format!("t_b = {t_b} is not a stamp of the offline tube")))?;

    let not_danger = Negated(danger);
    let constraint = Intersection(vec![&v.constraint, &not_danger]);
    let mut initial = vec![0f32; grid.len()];
    v.goal.fill(t_b, &mut initial)?;
    offline.combine_into(t_b, &mut initial, Combine::Min)?;
    constraint.combine_into(t_b, &mut initial, Combine::Max)?;
    let pinned_raise = initial.iter().zip(offline.field(k_b).values()).map(|(a, b)| b - a).fold(0f32, f32::max);
    offline.combine_into(t_b, &mut initial, Combine::Max)?;

    let stamps = &times[..=k_b];
    let (mut fields, mut stats) = if k_b == 0 {
        (vec![ValueField::new(grid.clone(), initial)?], SolveStats::default())
    } else {
        BackwardPass {
            model: &v.model,
            grid,
            target: Some(&v.goal),
            constraint: &constraint,
            floor: Some(offline),
            stamps,
            initial,
            dt_max: lattice_step(&v.model, grid, stamps, opts)?,
            monotone: None,
            convergence_tol: None,
            dissipation: opts.dissipation,
            boundary: opts.boundary,
        }
        .run()?
    };
    stats.floor_correction = stats.floor_correction.max(pinned_raise as f64);
    fields.extend(offline.fields()[k_b + 1..].iter().cloned());
    Ok(OnlineSolution { tube: ValueTube::new(times.to_vec(), fields)?, stats })
}

/// Satisfiable when some declared entry state lies in the tube at `t0`.
pub fn entry_verdict(tube: &ValueTube, entry: &ValueField, t0: f64) -> Result<Verdict> {
    let slice = tube.omega_slice(t0)?;
    if !slice.same_grid(entry) {
        return Err(Error::GridMismatch);
    }
    let hit = slice.values().par_iter().zip(entry.values().par_iter()).any(|(v, e)| *v <= 0.0 && *e <= 0.0);
    Ok(if hit { Verdict::Satisfiable } else { Verdict::Unsatisfiable })
}

/// Entry node with the most negative tube value at `t0`.
pub fn safest_entry(tube: &ValueTube, entry: &ValueField, t0: f64) -> Result<Option<Vec<f64>>> {
    let slice = tube.omega_slice(t0)?;
    let best = slice
        .values()
        .iter()
        .zip(entry.values())
        .enumerate()
        .filter(|(_, (v, e))| **v <= 0.0 && **e <= 0.0)
        .min_by(|a, b| a.1 .0.total_cmp(b.1 .0))
        .map(|(i, _)| i);
    Ok(best.map(|i| tube.grid().node(i)))
}

/// Feedback settings for following `tube`: minimum-time slices are used
/// once the tube no longer depends on the danger set.
pub fn feedback_options(tube: &ValueTube, window: Option<(f64, f64)>, dt: f64) -> SimulationOptions {
    let t0 = tube.time_range().map_or(0.0, |r| r.0);
    SimulationOptions { dt, min_time_from: Some(window.map_or(t0, |w| w.1)) }
}

/// Closed-loop trajectory toward the goal, continued under
/// [`Dynamics::cruise_control`] until it leaves the grid or the horizon ends.
pub fn committed_trajectory<M: Dynamics>(v: &VehicleSpec<M>, tube: &ValueTube, z0: &[f64], t_span: (f64, f64), opts: &SimulationOptions) -> Result<Trajectory> {
    let dt = opts.dt;
    let mut traj = simulate(&v.model, tube, &v.goal, z0, t_span.0, opts)?;
    if traj.left_domain {
        return Ok(traj);
    }
    let mut t = *traj.times.last().unwrap();
    let mut z = traj.states.last().unwrap().clone();
    while t < t_span.1 - 1e-12 {
        let h = dt.min(t_span.1 - t);
        let u = v.model.cruise_control(&z);
        z = rk4_step(&v.model, &z, &u, h)?;
        v.model.saturate(&mut z);
        t += h;
        traj.controls.push(u);
        traj.times.push(t);
        match v.grid.canonical(&z) {
            Ok(c) => {
                z = c;
                traj.states.push(z.clone());
            }
            Err(_) => {
                traj.states.push(z.clone());
                break;
            }
        }
    }
    Ok(traj)
}

/// The conjunction `◊gⱼ ∧ □cⱼ ∧ □¬(dⱼ,₀ ∨ … ∨ dⱼ,ⱼ₋₁)` for the vehicle with
/// 1-based priority `j`; `dⱼ,₀` stands for the empty danger set.
pub fn vehicle_formula(j: usize) -> Formula {
    let danger = (1..j).fold(Formula::atom(&format!("d{j},0")), |acc, i| Formula::or(acc, Formula::atom(&format!("d{j},{i}"))));
    Formula::and(
        Formula::and(Formula::eventually(Formula::atom(&format!("g{j}"))), Formula::always(Formula::atom(&format!("c{j}")))),
        Formula::always(Formula::not(danger)),
    )
}

/// Atom bindings for [`vehicle_formula`]: goal, constraint and one danger
/// tube per higher-priority vehicle, in priority order.
pub fn vehicle_bindings<M: Dynamics>(j: usize, v: &VehicleSpec<M>, dangers: &[&DangerSet], times: &[f64]) -> Result<Bindings> {
    let mut b = Bindings::new();
    b.insert(format!("g{j}"), v.goal.clone());
    b.insert(format!("c{j}"), v.constraint.clone());
    b.insert(format!("d{j},0"), DangerSet::empty(&v.grid, times)?.to_value_tube()?);
    for (i, d) in dangers.iter().enumerate() {
        b.insert(format!("d{j},{}", i + 1), d.to_value_tube()?);
    }
    Ok(b)
}

/// Everything computed for one vehicle.
#[derive(Debug, Clone)]
pub struct VehiclePlan {
    pub name: String,
    pub offline: ValueTube,
    pub offline_stats: SolveStats,
    /// Union of the danger sets of all higher-priority vehicles.
    pub danger: DangerSet,
    pub window: Option<(f64, f64)>,
    pub online: ValueTube,
    /// `None` when there was nothing to re-solve.
    pub online_stats: Option<SolveStats>,
    pub verdict: Verdict,
    /// Where this vehicle is assumed to be (undilated).
    pub occupancy: DangerSet,
    /// The trajectory committed under [`DangerPolicy::Reservation`].
    pub committed: Option<Trajectory>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SppResult {
    pub vehicles: Vec<VehiclePlan>,
    pub policy: DangerPolicy,
}

impl SppResult {
    pub fn all_satisfiable(&self) -> bool {
        self.vehicles.iter().all(|v| v.verdict == Verdict::Satisfiable)
    }
}

/// Plans `vehicles` in priority order, computing offline tubes with
/// [`offline_pass`].
pub fn plan<M: Dynamics>(vehicles: &[VehicleSpec<M>], t_span: (f64, f64), opts: &PlanOptions) -> Result<SppResult> {
    plan_with(vehicles, t_span, opts, &mut |v| offline_pass(v, t_span, &opts.solver))
}

/// [`plan`] with a caller-supplied source of offline solutions (for
/// instance a cache).
pub fn plan_with<M: Dynamics>(
    vehicles: &[VehicleSpec<M>],
    t_span: (f64, f64),
    opts: &PlanOptions,
    offline: &mut dyn FnMut(&VehicleSpec<M>) -> Result<Solution>,
) -> Result<SppResult> {
    if vehicles.is_empty() {
        return Err(Error::InvalidRequest("nothing to plan".into()));
    }
    if !(opts.rollout_dt > 0.0) {
        return Err(Error::InvalidRequest("rollout step must be positive".into()));
    }
    for v in vehicles {
        check_plane_compatible(&v.grid, &vehicles[0].grid)?;
        if !(v.footprint >= 0.0) {
            return Err(Error::InvalidRequest(format!("vehicle `{}` has a negative footprint", v.name)));
        }
    }
    let mut plans: Vec<VehiclePlan> = Vec::with_capacity(vehicles.len());
    for v in vehicles {
        let start = Instant::now();
        let Solution { tube: offline, stats: offline_stats } = offline(v)?;
        let offline_seconds = start.elapsed().as_secs_f64();
        let times = offline.times().to_vec();

        let start = Instant::now();
        let mut danger = DangerSet::empty(&v.grid, &times)?;
        for (h, higher) in plans.iter().zip(vehicles) {
            danger = danger.union(&h.occupancy.dilated(higher.footprint + v.footprint, &v.grid)?)?;
        }
        let window = interaction_window(&offline, &danger)?;
        let (online, online_stats) = match window {
            None => (offline.clone(), None),
            Some((_, t_b)) => {
                let s = online_pass(&offline, v, &danger, t_b, &opts.solver)?;
                (s.tube, Some(s.stats))
            }
        };
        let verdict = entry_verdict(&online, &v.entry, t_span.0)?;
        let sim = feedback_options(&online, window, opts.rollout_dt);
        let (occupancy, committed) = occupancy_of(v, &online, &times, t_span, opts.danger, &sim)?;
        let online_seconds = start.elapsed().as_secs_f64();
        info!(
            "{}: {:?}, window {:?}, offline {:.1} s, online {:.1} s",
            v.name, verdict, window, offline_seconds, online_seconds
        );
        plans.push(VehiclePlan {
            name: v.name.clone(),
            offline,
            offline_stats,
            danger,
            window,
            online,
            online_stats,
            verdict,
            occupancy,
            committed,
            offline_seconds,
            online_seconds,
        });
    }
    Ok(SppResult { vehicles: plans, policy: opts.danger })
}

fn occupancy_of<M: Dynamics>(
    v: &VehicleSpec<M>,
    online: &ValueTube,
    times: &[f64],
    t_span: (f64, f64),
    policy: DangerPolicy,
    sim: &SimulationOptions,
) -> Result<(DangerSet, Option<Trajectory>)> {
    match policy {
        DangerPolicy::AdmissibleSet => {
            let planes = online.fields().iter().map(project_xy).collect::<Result<_>>()?;
            Ok((DangerSet::new(v.grid.clone(), times.to_vec(), planes)?, None))
        }
        DangerPolicy::Reservation => {
            let z0 = match &v.start {
                Some(z) if online.value_at(z, t_span.0)? <= 0.0 => Some(z.clone()),
                Some(z) => {
                    warn!("nominal start {z:?} of `{}` is outside its safe set; nothing is reserved", v.name);
                    None
                }
                None => safest_entry(online, &v.entry, t_span.0)?,
            };
            let Some(z0) = z0 else {
                return Ok((DangerSet::empty(&v.grid, times)?, None));
            };
            let traj = committed_trajectory(v, online, &z0, t_span, sim)?;
            let planes = reservation_planes(&traj, &v.grid, times)?;
            let plane = plane_grid(&v.grid)?;
            let cell = plane.spacing()[0].max(plane.spacing()[1]);
            let set = DangerSet::new(v.grid.clone(), times.to_vec(), planes)?.with_reservations(vec![Reservation::from_trajectory(&traj, cell)]);
            Ok((set, Some(traj)))
        }
    }
}

/// Sequential plan for every vehicle of a scenario.
pub fn plan_all(s: &Scenario, coarse: bool, opts: &PlanOptions) -> Result<SppResult> {
    let grid = s.grid(coarse)?;
    let vehicles = VehicleSpec::all_from_scenario(s, &grid)?;
    plan(&vehicles, s.t_span(), opts)
}

/// Closed-loop rollout with safety margins along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutReport {
    pub trajectory: Trajectory,
    pub reached_at: Option<f64>,
    /// Smallest `−V_𝒞` seen (negative means the constraint was violated).
    pub min_constraint_margin: f64,
    /// Smallest danger value seen (negative means inside the danger set).
    pub min_danger_margin: f64,
}

/// Follows the reach-optimal feedback of `tube` from `z0` at the start of
/// the tube's horizon.
pub fn rollout<M: Dynamics>(tube: &ValueTube, v: &VehicleSpec<M>, danger: Option<&DangerSet>, z0: &[f64], opts: &SimulationOptions) -> Result<RolloutReport> {
    let t0 = tube.time_range().map_or(0.0, |r| r.0);
    let trajectory = simulate(&v.model, tube, &v.goal, z0, t0, opts)?;
    let mut min_constraint_margin = f64::INFINITY;
    let mut min_danger_margin = f64::INFINITY;
    for (t, z) in trajectory.times.iter().zip(&trajectory.states) {
        if v.grid.canonical(z).is_err() {
            continue;
        }
        min_constraint_margin = min_constraint_margin.min(-v.constraint.value_at(z, *t)?);
        if let Some(d) = danger {
            min_danger_margin = min_danger_margin.min(d.value_at(z, *t)?);
        }
    }
    Ok(RolloutReport { reached_at: trajectory.reached_at, trajectory, min_constraint_margin, min_danger_margin })
}
