use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, ReachMode};
use crate::error::{Error, Result};
use crate::statespace::ValueTube;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Integration step; the control is held constant over each step.
    pub dt: f64,
    /// Time from which the tube solves a problem whose inputs no longer
    /// change. From then on the feedback follows the latest stamp whose set
    /// still contains the state, which forces progress toward the target
    /// once the tube has converged.
    #[serde(default)]
    pub min_time_from: Option<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { dt: 0.01, min_time_from: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `controls[k]` is applied on `[times[k], times[k + 1]]`.
    pub controls: Vec<Vec<f64>>,
    /// First sample time at which the target value is non-positive.
    pub reached_at: Option<f64>,
    /// The state left the grid before the target was reached.
    pub left_domain: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

/// Closed-loop simulation of `model` under the reach-optimal feedback of
/// `tube`, stopping once `target` holds or the tube's horizon ends.
///
/// See [`SimulationOptions::min_time_from`] for the slice the feedback reads.
///
/// Integration is classic fourth-order Runge–Kutta with the control frozen
/// over each step; physically bounded states are saturated after each step.
pub fn simulate<M: Dynamics>(model: &M, tube: &ValueTube, target: &ValueTube, z0: &[f64], t0: f64, opts: &SimulationOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidRequest(format!("simulation step {} must be positive", opts.dt)));
    }
    let grid = tube.grid().clone();
    let t_end = match tube.time_range() {
        Some((_, hi)) => hi,
        None => target.time_range().map(|r| r.1).unwrap_or(t0),
    };
    let mut z = grid.canonical(z0)?;
    let mut t = t0;
    let mut traj = Trajectory {
        times: vec![t],
        states: vec![z.clone()],
        controls: Vec::new(),
        reached_at: None,
        left_domain: false,
    };
    if target.value_at(&z, t)? <= 0.0 {
        traj.reached_at = Some(t);
        return Ok(traj);
    }
    let start_value = tube.value_at(&z, t)?;
    // Interpolating exactly at a node can leave rounding residue.
    if start_value > 1e-9 {
        return Err(Error::UnsafeStart { value: start_value });
    }

    while t < t_end - 1e-12 {
        let h = opts.dt.min(t_end - t);
        let p = tube.gradient(&z, feedback_time(tube, &z, t, opts.min_time_from)?)?;
        let u = model.optimal_control(&z, &p, ReachMode::Reach)?;

        z = rk4_step(model, &z, &u, h)?;
        model.saturate(&mut z);
        t += h;
        traj.controls.push(u);

        match grid.canonical(&z) {
            Ok(c) => z = c,
            Err(_) => {
                traj.times.push(t);
                traj.states.push(z.clone());
                traj.left_domain = true;
                break;
            }
        }
        traj.times.push(t);
        traj.states.push(z.clone());
        if target.value_at(&z, t.min(t_end))? <= 0.0 {
            traj.reached_at = Some(t);
            break;
        }
    }
    Ok(traj)
}

/// Latest stamp at or after `t` whose set contains `z`, or `t` itself.
fn feedback_time(tube: &ValueTube, z: &[f64], t: f64, from: Option<f64>) -> Result<f64> {
    match from {
        Some(s) if t >= s - 1e-9 && !tube.is_invariant() => {
            for &tk in tube.times().iter().rev() {
                if tk < t {
                    break;
                }
                if tube.value_at(z, tk)? <= 0.0 {
                    return Ok(tk);
                }
            }
            Ok(t)
        }
        _ => Ok(t),
    }
}

/// One classic fourth-order Runge–Kutta step with the control held fixed.
pub(crate) fn rk4_step<M: Dynamics>(model: &M, z: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = z.len();
    let mut probe = vec![0.0; n];
    let k1 = model.flow(z, u)?;
    for i in 0..n {
        probe[i] = z[i] + 0.5 * h * k1[i];
    }
    let k2 = model.flow(&probe, u)?;
    for i in 0..n {
        probe[i] = z[i] + 0.5 * h * k2[i];
    }
    let k3 = model.flow(&probe, u)?;
    for i in 0..n {
        probe[i] = z[i] + h * k3[i];
    }
    let k4 = model.flow(&probe, u)?;
    Ok((0..n).map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}
