//! Control-affine dynamics and their reachability Hamiltonians.

mod bicycle;
mod integrators;

pub use bicycle::{BicycleKernel, VehicleModel};
pub use integrators::{DoubleIntegrator, SingleIntegrator2D};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::statespace::Grid;

/// Whether the control helps reach the zero sublevel set (minimizes the
/// Hamiltonian) or resists it (maximizes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReachMode {
    Reach,
    Avoid,
}

/// Per-node Hamiltonian evaluator with grid-dependent quantities cached.
pub trait HamiltonianKernel: Sync {
    /// `H(z_idx, p)` for the node with multi-index `idx`.
    fn eval(&self, idx: &[usize], p: &[f32]) -> f32;

    /// Overwrites `alpha` with node-local bounds on `|ż_d|`. The default
    /// keeps the global bounds.
    fn local_alpha(&self, _idx: &[usize], _alpha: &mut [f32]) {}
}

/// A control-affine system `ż = f(z) + g(z) u` with box-bounded controls.
pub trait Dynamics: Sync + Send {
    type Kernel: HamiltonianKernel;

    fn state_dim(&self) -> usize;

    fn control_lo(&self) -> &[f64];

    fn control_hi(&self) -> &[f64];

    fn flow(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>>;

    fn hamiltonian(&self, z: &[f64], p: &[f64], mode: ReachMode) -> Result<f64>;

    fn optimal_control(&self, z: &[f64], p: &[f64], mode: ReachMode) -> Result<Vec<f64>>;

    /// Upper bounds on `|ż_d|` over the grid domain and the control box.
    fn dissipation_bounds(&self, grid: &Grid) -> Vec<f64>;

    fn kernel(&self, grid: &Grid, mode: ReachMode) -> Self::Kernel;

    /// Saturates states at physical limits during forward simulation.
    fn saturate(&self, _z: &mut [f64]) {}

    /// Control that keeps the system moving without steering toward any
    /// goal; used to extend a trajectory past its target. Defaults to the
    /// centre of the control box.
    fn cruise_control(&self, _z: &[f64]) -> Vec<f64> {
        self.control_lo().iter().zip(self.control_hi()).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Stable byte encoding of the model parameters (used for cache keys).
    fn fingerprint(&self) -> Vec<u8>;
}

/// Extremum of `p * u` over `u in [lo, hi]`.
#[inline]
pub(crate) fn box_extremum(p: f64, lo: f64, hi: f64, mode: ReachMode) -> f64 {
    match mode {
        ReachMode::Reach => (p * lo).min(p * hi),
        ReachMode::Avoid => (p * lo).max(p * hi),
    }
}

#[inline]
pub(crate) fn box_extremum_f32(p: f32, lo: f32, hi: f32, mode: ReachMode) -> f32 {
    match mode {
        ReachMode::Reach => (p * lo).min(p * hi),
        ReachMode::Avoid => (p * lo).max(p * hi),
    }
}

/// Bang-bang minimizer/maximizer of `p * u`; zero coefficients pick the
/// interval midpoint.
#[inline]
pub(crate) fn box_argument(p: f64, lo: f64, hi: f64, mode: ReachMode) -> f64 {
    if p == 0.0 {
        return 0.5 * (lo + hi);
    }
    let pick_lo = match mode {
        ReachMode::Reach => p > 0.0,
        ReachMode::Avoid => p < 0.0,
    };
    if pick_lo {
        lo
    } else {
        hi
    }
}

pub(crate) fn push_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}
