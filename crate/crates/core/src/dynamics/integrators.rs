use serde::{Deserialize, Serialize};

use super::{box_argument, box_extremum, box_extremum_f32, push_f64s, Dynamics, HamiltonianKernel, ReachMode};
use crate::error::{Error, Result};
use crate::statespace::Grid;

/// `ẋ = v, v̇ = a` with `a` in `[a_lo, a_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleIntegrator {
    pub control_lo: [f64; 1],
    pub control_hi: [f64; 1],
}

impl DoubleIntegrator {
    pub fn new(a_lo: f64, a_hi: f64) -> Result<Self> {
        if !(a_lo < a_hi) {
            return Err(Error::InvalidModel(format!("empty acceleration interval [{a_lo}, {a_hi}]")));
        }
        Ok(Self { control_lo: [a_lo], control_hi: [a_hi] })
    }
}

pub struct DoubleIntegratorKernel {
    speed: Vec<f32>,
    lo: f32,
    hi: f32,
    mode: ReachMode,
}

impl HamiltonianKernel for DoubleIntegratorKernel {
    #[inline]
    fn eval(&self, idx: &[usize], p: &[f32]) -> f32 {
        p[0] * self.speed[idx[1]] + box_extremum_f32(p[1], self.lo, self.hi, self.mode)
    }

    fn local_alpha(&self, idx: &[usize], alpha: &mut [f32]) {
        alpha[0] = self.speed[idx[1]].abs();
    }
}

impl Dynamics for DoubleIntegrator {
    type Kernel = DoubleIntegratorKernel;

    fn state_dim(&self) -> usize {
        2
    }

    fn control_lo(&self) -> &[f64] {
        &self.control_lo
    }

    fn control_hi(&self) -> &[f64] {
        &self.control_hi
    }

    fn flow(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![z[1], u[0]])
    }

    fn hamiltonian(&self, z: &[f64], p: &[f64], mode: ReachMode) -> Result<f64> {
        Ok(p[0] * z[1] + box_extremum(p[1], self.control_lo[0], self.control_hi[0], mode))
    }

    fn optimal_control(&self, _z: &[f64], p: &[f64], mode: ReachMode) -> Result<Vec<f64>> {
        Ok(vec![box_argument(p[1], self.control_lo[0], self.control_hi[0], mode)])
    }

    fn dissipation_bounds(&self, grid: &Grid) -> Vec<f64> {
        vec![
            grid.lo()[1].abs().max(grid.hi()[1].abs()),
            self.control_lo[0].abs().max(self.control_hi[0].abs()),
        ]
    }

    fn kernel(&self, grid: &Grid, mode: ReachMode) -> DoubleIntegratorKernel {
        DoubleIntegratorKernel {
            speed: grid.axis(1).iter().map(|v| *v as f32).collect(),
            lo: self.control_lo[0] as f32,
            hi: self.control_hi[0] as f32,
            mode,
        }
    }

    fn fingerprint(&self) -> Vec<u8> {
        let mut out = b"double-integrator".to_vec();
        push_f64s(&mut out, &self.control_lo);
        push_f64s(&mut out, &self.control_hi);
        out
    }
}

/// Planar point mass steered directly by its velocity, `ż = u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleIntegrator2D {
    pub control_lo: [f64; 2],
    pub control_hi: [f64; 2],
}

impl SingleIntegrator2D {
    pub fn new(control_lo: [f64; 2], control_hi: [f64; 2]) -> Result<Self> {
        for i in 0..2 {
            if !(control_lo[i] < control_hi[i]) {
                return Err(Error::InvalidModel(format!("control bound {i} is empty")));
            }
        }
        Ok(Self { control_lo, control_hi })
    }

    /// Unit-speed box controls.
    pub fn unit() -> Self {
        Self { control_lo: [-1.0, -1.0], control_hi: [1.0, 1.0] }
    }
}

pub struct SingleIntegratorKernel {
    lo: [f32; 2],
    hi: [f32; 2],
    mode: ReachMode,
}

impl HamiltonianKernel for SingleIntegratorKernel {
    #[inline]
    fn eval(&self, _idx: &[usize], p: &[f32]) -> f32 {
        box_extremum_f32(p[0], self.lo[0], self.hi[0], self.mode)
            + box_extremum_f32(p[1], self.lo[1], self.hi[1], self.mode)
    }
}

impl Dynamics for SingleIntegrator2D {
    type Kernel = SingleIntegratorKernel;

    fn state_dim(&self) -> usize {
        2
    }

    fn control_lo(&self) -> &[f64] {
        &self.control_lo
    }

    fn control_hi(&self) -> &[f64] {
        &self.control_hi
    }

    fn flow(&self, _z: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![u[0], u[1]])
    }

    fn hamiltonian(&self, _z: &[f64], p: &[f64], mode: ReachMode) -> Result<f64> {
        Ok((0..2).map(|i| box_extremum(p[i], self.control_lo[i], self.control_hi[i], mode)).sum())
    }

    fn optimal_control(&self, _z: &[f64], p: &[f64], mode: ReachMode) -> Result<Vec<f64>> {
        Ok((0..2).map(|i| box_argument(p[i], self.control_lo[i], self.control_hi[i], mode)).collect())
    }

    fn dissipation_bounds(&self, _grid: &Grid) -> Vec<f64> {
        (0..2).map(|i| self.control_lo[i].abs().max(self.control_hi[i].abs())).collect()
    }

    fn kernel(&self, _grid: &Grid, mode: ReachMode) -> SingleIntegratorKernel {
        SingleIntegratorKernel {
            lo: [self.control_lo[0] as f32, self.control_lo[1] as f32],
            hi: [self.control_hi[0] as f32, self.control_hi[1] as f32],
            mode,
        }
    }

    fn fingerprint(&self) -> Vec<u8> {
        let mut out = b"single-integrator-2d".to_vec();
        push_f64s(&mut out, &self.control_lo);
        push_f64s(&mut out, &self.control_hi);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrator_hamiltonian() {
        let m = DoubleIntegrator::new(-0.5, 0.5).unwrap();
        assert_eq!(m.hamiltonian(&[0.0, 0.3], &[1.0, 1.0], ReachMode::Reach).unwrap(), 0.3 - 0.5);
        assert_eq!(m.hamiltonian(&[0.0, 0.3], &[1.0, -1.0], ReachMode::Avoid).unwrap(), 0.3 + 0.5);
        assert_eq!(m.optimal_control(&[0.0, 0.0], &[0.0, 2.0], ReachMode::Reach).unwrap(), vec![-0.5]);
        let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[11, 11], &[false, false]).unwrap();
        assert_eq!(m.dissipation_bounds(&g), vec![1.0, 0.5]);
        let k = m.kernel(&g, ReachMode::Reach);
        assert!((k.eval(&[3, 8], &[1.0, 1.0]) - (0.6 - 0.5)).abs() < 1e-6);
    }

    #[test]
    fn single_integrator_hamiltonian() {
        let m = SingleIntegrator2D::unit();
        assert_eq!(m.hamiltonian(&[0.0, 0.0], &[0.6, -0.8], ReachMode::Reach).unwrap(), -1.4);
        assert_eq!(m.optimal_control(&[0.0, 0.0], &[0.6, -0.8], ReachMode::Reach).unwrap(), vec![-1.0, 1.0]);
        assert!(SingleIntegrator2D::new([1.0, 0.0], [0.0, 1.0]).is_err());
    }
}
