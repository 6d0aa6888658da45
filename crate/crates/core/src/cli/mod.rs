//! Commands behind the `tlt-reach` binary: offline passes with caching,
//! scenario verification, data export and rollouts.
//!
//! Every command is an ordinary function returning a value; the binary only
//! parses arguments, prints and maps errors to exit codes
//! ([`EXIT_OK`], [`EXIT_UNSATISFIABLE`], [`EXIT_ERROR`]).

mod audit;
pub mod cache;
mod export;
pub mod tubefile;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

pub use audit::{audit_rollouts, AuditFailure, AuditSummary};
pub use cache::{offline_key, KeyBuilder, TubeCache};
pub use export::{boundary_segments, xy_slice, ExportKind};
pub use tubefile::{load_tube, read_tube, save_tube, write_tube};

use crate::error::{Error, Result};
use crate::hjsolver::{Solution, SolveStats};
use crate::scenario::Scenario;
use crate::spp::{feedback_options, offline_pass, plan_with, rollout, DangerPolicy, DangerSet, PlanOptions, Reservation, RolloutReport, SppResult, VehicleSpec};
use crate::statespace::{Grid, ValueTube};
use crate::tlt::Verdict;

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSATISFIABLE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Bumped whenever the planning stage changes what it stores.
const PLAN_REVISION: u32 = 1;

/// Exit code for a command result.
pub fn exit_code<T>(r: &Result<T>, satisfied: impl Fn(&T) -> bool) -> i32 {
    match r {
        Ok(v) if satisfied(v) => EXIT_OK,
        Ok(_) | Err(Error::UnsafeStart { .. }) => EXIT_UNSATISFIABLE,
        Err(_) => EXIT_ERROR,
    }
}

/// Scenario, resolution, options and optional cache shared by all commands.
#[derive(Debug, Clone)]
pub struct Session {
    pub scenario: Scenario,
    pub coarse: bool,
    pub options: PlanOptions,
    pub cache: Option<TubeCache>,
}

impl Session {
    pub fn new(scenario: Scenario, coarse: bool, options: PlanOptions, cache_dir: Option<PathBuf>) -> Result<Self> {
        options.solver.validate()?;
        let cache = cache_dir.map(|d| TubeCache::open(&d)).transpose()?;
        Ok(Self { scenario, coarse, options, cache })
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        self.scenario.grid(self.coarse)
    }

    pub fn vehicles(&self) -> Result<Vec<VehicleSpec>> {
        VehicleSpec::all_from_scenario(&self.scenario, &self.grid()?)
    }

    fn offline_key(&self, v: &VehicleSpec) -> String {
        offline_key(&v.model, &v.goal, &v.constraint, self.scenario.t_span(), &self.options.solver)
    }

    /// Offline solution of `v`, read from or written to the cache.
    pub fn offline(&self, v: &VehicleSpec) -> Result<(Solution, bool)> {
        let key = self.offline_key(v);
        if let Some(c) = &self.cache {
            if let Some(tube) = c.get(&key)? {
                return Ok((Solution { tube, stats: SolveStats::default() }, true));
            }
        }
        let sol = offline_pass(v, self.scenario.t_span(), &self.options.solver)?;
        if let Some(c) = &self.cache {
            let p = c.put(&key, &sol.tube)?;
            info!("stored offline tube of `{}` at {}", v.name, p.display());
        }
        Ok((sol, false))
    }

    /// Key shared by all artifacts of one sequential plan.
    pub fn plan_key(&self) -> String {
        KeyBuilder::new("plan").bytes(&PLAN_REVISION.to_le_bytes()).json(&self.scenario).bytes(&[self.coarse as u8]).json(&self.options).finish()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflineOutcome {
    pub vehicle: String,
    pub key: String,
    pub path: Option<PathBuf>,
    pub cached: bool,
    pub seconds: f64,
    pub steps: usize,
}

/// Offline pass of vehicle `j` (0-based priority).
pub fn cmd_offline(session: &Session, j: usize) -> Result<OfflineOutcome> {
    let grid = session.grid()?;
    let v = VehicleSpec::from_scenario(&session.scenario, j, &grid)?;
    let start = Instant::now();
    let (sol, cached) = session.offline(&v)?;
    let key = session.offline_key(&v);
    Ok(OfflineOutcome {
        vehicle: v.name,
        path: session.cache.as_ref().map(|c| c.path(&key)),
        key,
        cached,
        seconds: start.elapsed().as_secs_f64(),
        steps: sol.stats.steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleReport {
    pub name: String,
    /// 1 is the highest priority.
    pub priority: usize,
    pub verdict: Verdict,
    pub window: Option<[f64; 2]>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    pub offline_cached: bool,
    /// Largest raise applied to keep the online tube inside the offline one.
    pub floor_correction: f64,
    pub offline_tube: Option<PathBuf>,
    pub online_tube: Option<PathBuf>,
    pub danger_tube: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub grid: Vec<usize>,
    pub horizon: [f64; 2],
    pub danger_policy: DangerPolicy,
    pub all_satisfiable: bool,
    pub vehicles: Vec<VehicleReport>,
}

impl VerifyReport {
    /// The report with every timing field zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for v in &mut r.vehicles {
            v.offline_seconds = 0.0;
            v.online_seconds = 0.0;
            v.offline_cached = false;
        }
        r
    }
}

fn artifact(session: &Session, plan_key: &str, j: usize, what: &str) -> Option<PathBuf> {
    session.cache.as_ref().map(|c| c.dir().join(format!("{plan_key}-{j}-{what}.vtub")))
}

fn planes_tube(d: &DangerSet) -> Result<ValueTube> {
    ValueTube::new(d.times().to_vec(), d.planes().to_vec())
}

/// Sequential plan of the whole scenario. With a cache, offline tubes are
/// reused and the online and danger tubes of every vehicle are stored.
pub fn cmd_verify(session: &Session) -> Result<(VerifyReport, SppResult)> {
    let vehicles = session.vehicles()?;
    let mut cached = Vec::new();
    let result = plan_with(&vehicles, session.scenario.t_span(), &session.options, &mut |v| {
        let (sol, hit) = session.offline(v)?;
        cached.push(hit);
        Ok(sol)
    })?;
    let plan_key = session.plan_key();
    let mut reports = Vec::new();
    for (j, (p, v)) in result.vehicles.iter().zip(&vehicles).enumerate() {
        let online_tube = artifact(session, &plan_key, j, "online");
        let danger_tube = artifact(session, &plan_key, j, "danger");
        if let Some(c) = &session.cache {
            c.put(&format!("{plan_key}-{j}-online"), &p.online)?;
            c.put(&format!("{plan_key}-{j}-danger"), &planes_tube(&p.danger)?)?;
            if let Some(rs) = p.danger.reservations() {
                let json = serde_json::to_vec(rs).map_err(|e| Error::Scenario(e.to_string()))?;
                std::fs::write(c.dir().join(format!("{plan_key}-{j}-reservations.json")), json)?;
            }
        }
        reports.push(VehicleReport {
            name: p.name.clone(),
            priority: j + 1,
            verdict: p.verdict,
            window: p.window.map(|(a, b)| [a, b]),
            offline_seconds: p.offline_seconds,
            online_seconds: p.online_seconds,
            offline_cached: cached[j],
            floor_correction: p.online_stats.as_ref().map_or(0.0, |s| s.floor_correction),
            offline_tube: session.cache.as_ref().map(|c| c.path(&session.offline_key(v))),
            online_tube,
            danger_tube,
        });
    }
    let report = VerifyReport {
        scenario: session.scenario.name.clone(),
        grid: session.grid()?.shape().to_vec(),
        horizon: session.scenario.horizon,
        danger_policy: session.options.danger,
        all_satisfiable: result.all_satisfiable(),
        vehicles: reports,
    };
    if let Some(c) = &session.cache {
        std::fs::write(c.dir().join(format!("{plan_key}-report.json")), serde_json::to_vec_pretty(&report).map_err(|e| Error::Scenario(e.to_string()))?)?;
    }
    Ok((report, result))
}

/// Per-vehicle wall-clock times as a small table.
pub fn timing_table(report: &VerifyReport) -> String {
    let mut s = format!("{:<10}| {:>16} | {:>15}\n", "Vehicle", "Offline Pass [s]", "Online Pass [s]");
    s.push_str(&format!("{}\n", "-".repeat(47)));
    for v in &report.vehicles {
        s.push_str(&format!("{:<10}| {:>16.2} | {:>15.2}\n", v.name, v.offline_seconds, v.online_seconds));
    }
    s
}

/// Writes `tube` at time `t` in the requested format and returns the
/// number of data rows.
pub fn cmd_export(tube: &ValueTube, kind: ExportKind, t: f64, fixed: Option<&[f64]>, out: &mut dyn Write) -> Result<usize> {
    export::export(tube, kind, t, fixed, out)
}

/// Vehicle, online tube, danger set and interaction window.
pub type PlanArtifacts = (VehicleSpec, ValueTube, DangerSet, Option<(f64, f64)>);

/// Online tube and danger set of vehicle `j`, from the cache when a
/// previous `verify` stored them and recomputed otherwise.
pub fn plan_artifacts(session: &Session, j: usize) -> Result<PlanArtifacts> {
    let vehicles = session.vehicles()?;
    let v = vehicles.get(j).cloned().ok_or_else(|| Error::Scenario(format!("no vehicle with index {j}")))?;
    let plan_key = session.plan_key();
    if let Some(c) = &session.cache {
        let report_path = c.dir().join(format!("{plan_key}-report.json"));
        let online = c.get(&format!("{plan_key}-{j}-online"))?;
        let planes = c.get(&format!("{plan_key}-{j}-danger"))?;
        if let (true, Some(online), Some(planes)) = (report_path.exists(), online, planes) {
            let report: VerifyReport = serde_json::from_slice(&std::fs::read(&report_path)?).map_err(|e| Error::Scenario(e.to_string()))?;
            let mut danger = DangerSet::new(v.grid.clone(), planes.times().to_vec(), planes.fields().to_vec())?;
            let reserved = c.dir().join(format!("{plan_key}-{j}-reservations.json"));
            if reserved.exists() {
                let rs: Vec<Reservation> = serde_json::from_slice(&std::fs::read(&reserved)?).map_err(|e| Error::Scenario(e.to_string()))?;
                danger = danger.with_reservations(rs);
            }
            let window = report.vehicles[j].window.map(|w| (w[0], w[1]));
            return Ok((v, online, danger, window));
        }
    }
    let (_, result) = cmd_verify(session)?;
    let p = &result.vehicles[j];
    Ok((v, p.online.clone(), p.danger.clone(), p.window))
}

/// Closed-loop rollout of vehicle `j` from `z0` under its online tube.
pub fn cmd_rollout(session: &Session, j: usize, z0: &[f64], dt: f64) -> Result<RolloutReport> {
    let (v, online, danger, window) = plan_artifacts(session, j)?;
    rollout(&online, &v, Some(&danger), z0, &feedback_options(&online, window, dt))
}

/// Trajectory CSV `t,x,y,theta,delta,v,s,a` followed by a commented footer
/// with the safety report.
pub fn write_rollout_csv(r: &RolloutReport, out: &mut dyn Write) -> Result<()> {
    let tr = &r.trajectory;
    let nz = tr.states.first().map_or(0, Vec::len);
    let nu = tr.controls.first().map_or(0, Vec::len);
    let names: Vec<String> = if nz == 5 && nu == 2 {
        ["x", "y", "theta", "delta", "v", "s", "a"].iter().map(|s| s.to_string()).collect()
    } else {
        (0..nz).map(|i| format!("z{i}")).chain((0..nu).map(|i| format!("u{i}"))).collect()
    };
    writeln!(out, "t,{}", names.join(","))?;
    for (k, (t, z)) in tr.times.iter().zip(&tr.states).enumerate() {
        let u: Vec<String> = match tr.controls.get(k) {
            Some(u) => u.iter().map(|x| x.to_string()).collect(),
            None => vec![String::new(); nu],
        };
        let zs: Vec<String> = z.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{t},{},{}", zs.join(","), u.join(","))?;
    }
    let goal = r.reached_at.map_or("none".to_string(), |t| t.to_string());
    writeln!(out, "# goal_time={goal}")?;
    writeln!(out, "# min_constraint_margin={}", r.min_constraint_margin)?;
    writeln!(out, "# min_danger_margin={}", r.min_danger_margin)?;
    Ok(())
}
