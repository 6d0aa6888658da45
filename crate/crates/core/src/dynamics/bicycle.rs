use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{box_argument, box_extremum, box_extremum_f32, push_f64s, Dynamics, HamiltonianKernel, ReachMode};
use crate::error::{Error, Result};
use crate::statespace::Grid;

/// Kinematic bicycle with state `[x, y, theta, delta, v]` and control
/// `[steering rate, acceleration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleModel {
    pub wheelbase: f64,
    pub control_lo: [f64; 2],
    pub control_hi: [f64; 2],
    pub state_lo: [f64; 5],
    pub state_hi: [f64; 5],
}

impl VehicleModel {
    pub const DEFAULT_WHEELBASE: f64 = 0.32;

    pub fn new(wheelbase: f64, control_lo: [f64; 2], control_hi: [f64; 2], state_lo: [f64; 5], state_hi: [f64; 5]) -> Result<Self> {
        let m = Self { wheelbase, control_lo, control_hi, state_lo, state_hi };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return Err(Error::InvalidModel(format!("wheelbase must be positive, got {}", self.wheelbase)));
        }
        for i in 0..2 {
            if !(self.control_lo[i] < self.control_hi[i]) {
                return Err(Error::InvalidModel(format!("control bound {i} is empty")));
            }
        }
        for d in 0..5 {
            if !(self.state_lo[d] < self.state_hi[d]) {
                return Err(Error::InvalidModel(format!("state bound {d} is empty")));
            }
        }
        if self.state_lo[3].abs() >= FRAC_PI_2 || self.state_hi[3].abs() >= FRAC_PI_2 {
            return Err(Error::InvalidModel("steering bounds must stay inside (-pi/2, pi/2)".into()));
        }
        if self.state_lo[4] < 0.0 {
            return Err(Error::InvalidModel("velocity lower bound must be non-negative".into()));
        }
        Ok(())
    }

    fn check_steering(delta: f64) -> Result<()> {
        if delta.abs() >= FRAC_PI_2 || !delta.is_finite() {
            Err(Error::SingularSteering(delta))
        } else {
            Ok(())
        }
    }
}

/// Cached trigonometry along the heading, steering and speed axes.
pub struct BicycleKernel {
    cos: Vec<f32>,
    sin: Vec<f32>,
    tan_over_l: Vec<f32>,
    speed: Vec<f32>,
    s_lo: f32,
    s_hi: f32,
    a_lo: f32,
    a_hi: f32,
    /// Steering and speed control boxes at the low and high edge of each
    /// saturated axis, where the outward half of the control is inert.
    s_edges: [(f32, f32); 2],
    a_edges: [(f32, f32); 2],
    last: [usize; 2],
    mode: ReachMode,
}

impl BicycleKernel {
    #[inline]
    fn control_box(k: usize, last: usize, lo: f32, hi: f32, edges: &[(f32, f32); 2]) -> (f32, f32) {
        if k == 0 {
            edges[0]
        } else if k == last {
            edges[1]
        } else {
            (lo, hi)
        }
    }
}

impl HamiltonianKernel for BicycleKernel {
    #[inline]
    fn eval(&self, idx: &[usize], p: &[f32]) -> f32 {
        let v = self.speed[idx[4]];
        let (s_lo, s_hi) = Self::control_box(idx[3], self.last[0], self.s_lo, self.s_hi, &self.s_edges);
        let (a_lo, a_hi) = Self::control_box(idx[4], self.last[1], self.a_lo, self.a_hi, &self.a_edges);
        v * (p[0] * self.cos[idx[2]] + p[1] * self.sin[idx[2]] + p[2] * self.tan_over_l[idx[3]])
            + box_extremum_f32(p[3], s_lo, s_hi, self.mode)
            + box_extremum_f32(p[4], a_lo, a_hi, self.mode)
    }

    fn local_alpha(&self, idx: &[usize], alpha: &mut [f32]) {
        let v = self.speed[idx[4]];
        let (s_lo, s_hi) = Self::control_box(idx[3], self.last[0], self.s_lo, self.s_hi, &self.s_edges);
        let (a_lo, a_hi) = Self::control_box(idx[4], self.last[1], self.a_lo, self.a_hi, &self.a_edges);
        alpha[0] = v * self.cos[idx[2]].abs();
        alpha[1] = v * self.sin[idx[2]].abs();
        alpha[2] = v * self.tan_over_l[idx[3]].abs();
        alpha[3] = s_lo.abs().max(s_hi.abs());
        alpha[4] = a_lo.abs().max(a_hi.abs());
    }
}

impl Dynamics for VehicleModel {
    type Kernel = BicycleKernel;

    fn state_dim(&self) -> usize {
        5
    }

    fn control_lo(&self) -> &[f64] {
        &self.control_lo
    }

    fn control_hi(&self) -> &[f64] {
        &self.control_hi
    }

    fn flow(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Self::check_steering(z[3])?;
        let (theta, delta, v) = (z[2], z[3], z[4]);
        Ok(vec![v * theta.cos(), v * theta.sin(), v * delta.tan() / self.wheelbase, u[0], u[1]])
    }

    fn hamiltonian(&self, z: &[f64], p: &[f64], mode: ReachMode) -> Result<f64> {
        Self::check_steering(z[3])?;
        let (theta, delta, v) = (z[2], z[3], z[4]);
        Ok(p[0] * v * theta.cos()
            + p[1] * v * theta.sin()
            + p[2] * v * delta.tan() / self.wheelbase
            + box_extremum(p[3], self.control_lo[0], self.control_hi[0], mode)
            + box_extremum(p[4], self.control_lo[1], self.control_hi[1], mode))
    }

    fn optimal_control(&self, z: &[f64], p: &[f64], mode: ReachMode) -> Result<Vec<f64>> {
        Self::check_steering(z[3])?;
        Ok(vec![
            box_argument(p[3], self.control_lo[0], self.control_hi[0], mode),
            box_argument(p[4], self.control_lo[1], self.control_hi[1], mode),
        ])
    }

    fn dissipation_bounds(&self, _grid: &Grid) -> Vec<f64> {
        let v_max = self.state_lo[4].abs().max(self.state_hi[4].abs());
        let delta_max = self.state_lo[3].abs().max(self.state_hi[3].abs());
        vec![
            v_max,
            v_max,
            v_max * delta_max.tan() / self.wheelbase,
            self.control_lo[0].abs().max(self.control_hi[0].abs()),
            self.control_lo[1].abs().max(self.control_hi[1].abs()),
        ]
    }

    fn kernel(&self, grid: &Grid, mode: ReachMode) -> BicycleKernel {
        let theta = grid.axis(2);
        // Rollouts clamp delta and v to the model bounds, so a grid edge lying
        // on such a bound only admits controls that point back inside.
        let edges = |d: usize, c: usize| {
            let (lo, hi) = (self.control_lo[c] as f32, self.control_hi[c] as f32);
            let tol = 1e-9 * (self.state_hi[d] - self.state_lo[d]);
            let low = if grid.lo()[d] <= self.state_lo[d] + tol { (lo.max(0.0), hi) } else { (lo, hi) };
            let high = if grid.hi()[d] >= self.state_hi[d] - tol { (lo, hi.min(0.0)) } else { (lo, hi) };
            [low, high]
        };
        BicycleKernel {
            s_edges: edges(3, 0),
            a_edges: edges(4, 1),
            last: [grid.shape()[3] - 1, grid.shape()[4] - 1],
            cos: theta.iter().map(|t| t.cos() as f32).collect(),
            sin: theta.iter().map(|t| t.sin() as f32).collect(),
            tan_over_l: grid.axis(3).iter().map(|d| (d.tan() / self.wheelbase) as f32).collect(),
            speed: grid.axis(4).iter().map(|v| *v as f32).collect(),
            s_lo: self.control_lo[0] as f32,
            s_hi: self.control_hi[0] as f32,
            a_lo: self.control_lo[1] as f32,
            a_hi: self.control_hi[1] as f32,
            mode,
        }
    }

    fn saturate(&self, z: &mut [f64]) {
        z[3] = z[3].clamp(self.state_lo[3], self.state_hi[3]);
        z[4] = z[4].clamp(self.state_lo[4], self.state_hi[4]);
    }

    /// Straightens the wheels at constant speed.
    fn cruise_control(&self, z: &[f64]) -> Vec<f64> {
        vec![(-z[3] / 0.1).clamp(self.control_lo[0], self.control_hi[0]), 0.0f64.clamp(self.control_lo[1], self.control_hi[1])]
    }

    fn fingerprint(&self) -> Vec<u8> {
        let mut out = b"bicycle".to_vec();
        push_f64s(&mut out, &[self.wheelbase]);
        push_f64s(&mut out, &self.control_lo);
        push_f64s(&mut out, &self.control_hi);
        push_f64s(&mut out, &self.state_lo);
        push_f64s(&mut out, &self.state_hi);
        out
    }
}
