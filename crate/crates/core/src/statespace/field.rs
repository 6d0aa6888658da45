use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{circular_distance, Grid, MAX_DIM};
use crate::error::{Error, Result};

/// Magnitude used for "always satisfied" / "never satisfied" values.
///
/// Fields stay finite: the full set is `-FAR` everywhere and the empty set
/// `+FAR`.
pub const FAR: f32 = 1.0e3;

/// Level-set field on a grid; `value <= 0` means the node is in the set.
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: Arc<Grid>,
    values: Vec<f32>,
}

impl PartialEq for ValueField {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ValueField {
    pub fn new(grid: Arc<Grid>, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRequest(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, value: f32) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    /// The whole state space.
    pub fn full(grid: Arc<Grid>) -> Self {
        Self::constant(grid, -FAR)
    }

    /// The empty set.
    pub fn empty(grid: Arc<Grid>) -> Self {
        Self::constant(grid, FAR)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let g = grid.clone();
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let z = g.node(i);
                (f(&z) as f32).clamp(-FAR, FAR)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn same_grid(&self, other: &ValueField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Number of nodes inside the set.
    pub fn count_inside(&self) -> usize {
        self.values.iter().filter(|v| **v <= 0.0).count()
    }

    pub fn is_empty_set(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }

    pub fn min_value(&self) -> f32 {
        self.values.iter().cloned().fold(f32::INFINITY, f32::min)
    }

    /// Multilinear interpolation at `z` (periodic components are wrapped).
    pub fn interpolate(&self, z: &[f64]) -> Result<f64> {
        let z = self.grid.canonical(z)?;
        Ok(interpolate_canonical(&self.grid, &self.values, &z))
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ValueField, f: impl Fn(f32, f32) -> f32 + Sync) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> Self {
        let values = self.values.par_iter().map(|a| f(*a)).collect();
        Self { grid: self.grid.clone(), values }
    }
}

pub(crate) fn interpolate_canonical(grid: &Grid, values: &[f32], z: &[f64]) -> f64 {
    let nd = grid.ndim();
    let mut cells = [super::grid::AxisCell { lower: 0, upper: 0, weight: 0.0 }; MAX_DIM];
    for d in 0..nd {
        cells[d] = grid.locate(d, z[d]);
    }
    let strides = grid.strides();
    let mut acc = 0.0f64;
    for corner in 0..(1usize << nd) {
        let mut w = 1.0f64;
        let mut flat = 0usize;
        for d in 0..nd {
            let c = cells[d];
            if corner >> d & 1 == 1 {
                w *= c.weight;
                flat += c.upper * strides[d];
            } else {
                w *= 1.0 - c.weight;
                flat += c.lower * strides[d];
            }
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            acc += w * values[flat] as f64;
        }
    }
    acc
}

/// Pointwise minimum: union of the encoded sets.
pub fn set_union(a: &ValueField, b: &ValueField) -> Result<ValueField> {
    a.zip_with(b, f32::min)
}

/// Pointwise maximum: intersection of the encoded sets.
pub fn set_intersect(a: &ValueField, b: &ValueField) -> Result<ValueField> {
    a.zip_with(b, f32::max)
}

/// Pointwise negation: complement of the encoded set (up to the zero level).
pub fn set_complement(a: &ValueField) -> ValueField {
    a.map(|v| -v)
}

/// Max-norm signed distance to an axis-aligned box.
///
/// Each dimension contributes its one-dimensional signed distance
/// `max(lo - z, z - hi)`; the field is the maximum of the contributions,
/// negative inside. A dimension with `lo = -inf` and `hi = +inf` is
/// unconstrained. On periodic dimensions the interval is measured on the
/// circle and may extend past `hi` to express wrap-around (for instance
/// `[3pi/4, 5pi/4]` on `[-pi, pi)`).
pub fn signed_distance_box(grid: &Arc<Grid>, box_lo: &[f64], box_hi: &[f64]) -> Result<ValueField> {
    let nd = grid.ndim();
    if box_lo.len() != nd || box_hi.len() != nd {
        return Err(Error::DimensionMismatch(format!(
            "box has {}/{} bounds, grid has {} dimensions",
            box_lo.len(),
            box_hi.len(),
            nd
        )));
    }
    for d in 0..nd {
        if box_lo[d].is_nan() || box_hi[d].is_nan() || box_lo[d] > box_hi[d] {
            return Err(Error::InvalidBounds { dim: d, lo: box_lo[d], hi: box_hi[d] });
        }
    }
    let axes: Vec<Vec<f32>> = (0..nd)
        .map(|d| {
            grid.axis(d)
                .into_iter()
                .map(|z| axis_signed_distance(grid, d, z, box_lo[d], box_hi[d]))
                .collect()
        })
        .collect();
    Ok(ValueField::from_raw(grid.clone(), combine_axes_max(grid, &axes)))
}

/// One-dimensional signed distance contribution, `-FAR` when unconstrained.
fn axis_signed_distance(grid: &Grid, d: usize, z: f64, lo: f64, hi: f64) -> f32 {
    if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
        return -FAR;
    }
    let v = if grid.periodic()[d] {
        if !lo.is_finite() || !hi.is_finite() {
            return -FAR;
        }
        let period = grid.hi()[d] - grid.lo()[d];
        let half = 0.5 * (hi - lo);
        if half >= 0.5 * period {
            return -FAR;
        }
        circular_distance(z, 0.5 * (lo + hi), period) - half
    } else {
        let below = if lo.is_finite() { lo - z } else { f64::NEG_INFINITY };
        let above = if hi.is_finite() { z - hi } else { f64::NEG_INFINITY };
        below.max(above)
    };
    (v as f32).clamp(-FAR, FAR)
}

/// Builds `max_d axes[d][k_d]` over the full grid.
fn combine_axes_max(grid: &Grid, axes: &[Vec<f32>]) -> Vec<f32> {
    let nd = grid.ndim();
    (0..grid.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|flat| {
            let mut rem = flat;
            let mut m = f32::NEG_INFINITY;
            for d in 0..nd {
                let s = grid.strides()[d];
                let k = rem / s;
                rem %= s;
                m = m.max(axes[d][k]);
            }
            m
        })
        .collect()
}
