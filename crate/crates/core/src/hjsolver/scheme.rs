use rayon::prelude::*;

use super::Boundary;
use crate::dynamics::{Dynamics, HamiltonianKernel, ReachMode};
use crate::error::{Error, Result};
use crate::statespace::{Grid, ValueField, MAX_DIM};

const BLOCK: usize = 4096;

/// Per-node ingredients of the Lax–Friedrichs flux.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeTerms {
    /// Current value at the node.
    pub value: f32,
    /// `H(z, (p⁻ + p⁺) / 2)`.
    pub hamiltonian: f32,
    /// `Σ_d α_d (p⁺_d − p⁻_d) / 2`.
    pub dissipation: f32,
}

/// Visits every node with its one-sided differences folded into
/// [`NodeTerms`] and writes `finish(flat, terms)` to `out`.
///
/// Each output depends only on `values`, so the result is independent of
/// the parallel split. With `local` set the kernel narrows `alpha` node by
/// node.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep<K, F>(grid: &Grid, kernel: &K, alpha: &[f64], local: bool, boundary: Boundary, values: &[f32], out: &mut [f32], finish: F)
where
    K: HamiltonianKernel,
    F: Fn(usize, NodeTerms) -> f32 + Sync,
{
    let nd = grid.ndim();
    let mut inv = [0f32; MAX_DIM];
    let mut half_alpha = [0f32; MAX_DIM];
    for d in 0..nd {
        inv[d] = (1.0 / grid.spacing()[d]) as f32;
        half_alpha[d] = (0.5 * alpha[d]) as f32;
    }
    let shape = grid.shape();
    let strides = grid.strides();
    let periodic = grid.periodic();

    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let start = b * BLOCK;
        let mut idx = [0usize; MAX_DIM];
        grid.unravel(start, &mut idx[..nd]);
        let mut p = [0f32; MAX_DIM];
        let mut node_alpha = [0f32; MAX_DIM];
        for (off, o) in chunk.iter_mut().enumerate() {
            let i = start + off;
            let c = values[i];
            let half = if local {
                kernel.local_alpha(&idx[..nd], &mut node_alpha[..nd]);
                for d in 0..nd {
                    node_alpha[d] = node_alpha[d].min(2.0 * half_alpha[d]) * 0.5;
                }
                &node_alpha
            } else {
                &half_alpha
            };
            let mut dissipation = 0.0f32;
            for d in 0..nd {
                let (k, s, n) = (idx[d], strides[d], shape[d]);
                let (pp, pm) = if periodic[d] {
                    let up = if k + 1 == n { i - k * s } else { i + s };
                    let dn = if k == 0 { i + (n - 1) * s } else { i - s };
                    ((values[up] - c) * inv[d], (c - values[dn]) * inv[d])
                } else if k == 0 {
                    let pp = (values[i + s] - c) * inv[d];
                    let pm = match boundary {
                        Boundary::CopyGradient => pp,
                        Boundary::AwayFromZero => -c.signum() * pp.abs(),
                    };
                    (pp, pm)
                } else if k + 1 == n {
                    let pm = (c - values[i - s]) * inv[d];
                    let pp = match boundary {
                        Boundary::CopyGradient => pm,
                        Boundary::AwayFromZero => c.signum() * pm.abs(),
                    };
                    (pp, pm)
                } else {
                    ((values[i + s] - c) * inv[d], (c - values[i - s]) * inv[d])
                };
                p[d] = 0.5 * (pp + pm);
                dissipation += half[d] * (pp - pm);
            }
            let hamiltonian = kernel.eval(&idx[..nd], &p[..nd]);
            *o = finish(i, NodeTerms { value: c, hamiltonian, dissipation });
            for d in (0..nd).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    });
}

/// Global Lax–Friedrichs numerical Hamiltonian
/// `Ĥ = H(z, p̄) − Σ_d α_d (p⁺_d − p⁻_d) / 2` at every node.
pub fn lax_friedrichs_update<M: Dynamics>(field: &ValueField, model: &M, alpha: &[f64], mode: ReachMode) -> Result<ValueField> {
    let grid = field.grid();
    if alpha.len() != grid.ndim() || model.state_dim() != grid.ndim() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} dimensions, model {}, alpha {}",
            grid.ndim(),
            model.state_dim(),
            alpha.len()
        )));
    }
    let kernel = model.kernel(grid, mode);
    let mut out = vec![0f32; grid.len()];
    sweep(grid, &kernel, alpha, false, Boundary::CopyGradient, field.values(), &mut out, |_, t| t.hamiltonian - t.dissipation);
    ValueField::new(grid.clone(), out)
}

/// Largest stable explicit step `cfl / Σ_d (α_d / Δ_d)`, or `None` when
/// every `α_d` is zero (nothing moves).
pub fn cfl_dt(grid: &Grid, alpha: &[f64], cfl: f64) -> Result<Option<f64>> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidRequest(format!("CFL number {cfl} is outside (0, 1]")));
    }
    if alpha.len() != grid.ndim() {
        return Err(Error::DimensionMismatch(format!("{} dissipation bounds for {} dimensions", alpha.len(), grid.ndim())));
    }
    let rate: f64 = alpha.iter().zip(grid.spacing()).map(|(a, h)| a.abs() / h).sum();
    Ok(if rate > 0.0 { Some(cfl / rate) } else { None })
}
