use std::sync::Arc;

use rayon::prelude::*;

use super::field::{interpolate_canonical, ValueField};
use super::grid::Grid;
use crate::error::{Error, Result};

const STAMP_TOL: f64 = 1e-9;

/// Time-indexed stack of value fields encoding a time-state set.
///
/// An all-time invariant set is stored as a single field with
/// `invariant = true`; slicing it at any time returns that field.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTube {
    grid: Arc<Grid>,
    times: Vec<f64>,
    fields: Vec<ValueField>,
    invariant: bool,
}

/// Position of a time inside the stamp list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Bracket {
    Exact(usize),
    Between { lower: usize, weight: f32 },
}

impl ValueTube {
    pub fn invariant(field: ValueField) -> Self {
        Self {
            grid: field.grid().clone(),
            times: Vec::new(),
            fields: vec![field],
            invariant: true,
        }
    }

    pub fn new(times: Vec<f64>, fields: Vec<ValueField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} stamps for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidRequest("tube stamps must be finite and strictly increasing".into()));
        }
        let grid = fields[0].grid().clone();
        if fields.iter().any(|f| !f.same_grid(&fields[0])) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, times, fields, invariant: false })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Stored stamps (empty for invariant tubes).
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ValueField] {
        &self.fields
    }

    pub fn field(&self, k: usize) -> &ValueField {
        &self.fields[k]
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        if self.invariant {
            None
        } else {
            Some((self.times[0], *self.times.last().unwrap()))
        }
    }

    /// True when slicing is defined on the whole of `[t0, t1]`.
    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        match self.time_range() {
            None => true,
            Some((a, b)) => a <= t0 + STAMP_TOL && t1 <= b + STAMP_TOL,
        }
    }

    pub(crate) fn bracket(&self, t: f64) -> Result<Bracket> {
        if self.invariant {
            return Ok(Bracket::Exact(0));
        }
        let (lo, hi) = self.time_range().unwrap();
        if !(t >= lo - STAMP_TOL && t <= hi + STAMP_TOL) {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|s| *s < t - STAMP_TOL);
        if k < self.times.len() && (self.times[k] - t).abs() <= STAMP_TOL {
            return Ok(Bracket::Exact(k));
        }
        let lower = k - 1;
        let w = (t - self.times[lower]) / (self.times[k] - self.times[lower]);
        Ok(Bracket::Between { lower, weight: w as f32 })
    }

    /// The state set at time `t` (linear interpolation between stamps).
    pub fn omega_slice(&self, t: f64) -> Result<ValueField> {
        match self.bracket(t)? {
            Bracket::Exact(k) => Ok(self.fields[k].clone()),
            Bracket::Between { lower, weight } => {
                let a = &self.fields[lower];
                let b = &self.fields[lower + 1];
                a.zip_with(b, |x, y| lerp(x, y, weight))
            }
        }
    }

    /// Interpolated value at state `z` and time `t`.
    pub fn value_at(&self, z: &[f64], t: f64) -> Result<f64> {
        let z = self.grid.canonical(z)?;
        self.value_at_canonical(&z, t)
    }

    pub(crate) fn value_at_canonical(&self, z: &[f64], t: f64) -> Result<f64> {
        Ok(match self.bracket(t)? {
            Bracket::Exact(k) => interpolate_canonical(&self.grid, self.fields[k].values(), z),
            Bracket::Between { lower, weight } => {
                let a = interpolate_canonical(&self.grid, self.fields[lower].values(), z);
                let b = interpolate_canonical(&self.grid, self.fields[lower + 1].values(), z);
                a + weight as f64 * (b - a)
            }
        })
    }

    /// Membership test `z in Omega(t)` together with the interpolated value.
    pub fn membership(&self, z: &[f64], t: f64) -> Result<(bool, f64)> {
        let v = self.value_at(z, t)?;
        Ok((v <= 0.0, v))
    }

    /// Centered-difference gradient of the interpolated value, one grid
    /// spacing wide (one-sided at non-periodic boundaries).
    pub fn gradient(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        let z = self.grid.canonical(z)?;
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.ndim());
        let mut probe = z.clone();
        for d in 0..g.ndim() {
            let h = g.spacing()[d];
            let (a, b) = if g.periodic()[d] {
                (g.wrap(d, z[d] - h), g.wrap(d, z[d] + h))
            } else {
                ((z[d] - h).max(g.lo()[d]), (z[d] + h).min(g.hi()[d]))
            };
            let width = if g.periodic()[d] { 2.0 * h } else { b - a };
            probe[d] = a;
            let va = self.value_at_canonical(&probe, t)?;
            probe[d] = b;
            let vb = self.value_at_canonical(&probe, t)?;
            probe[d] = z[d];
            out.push((vb - va) / width);
        }
        Ok(out)
    }

    /// Applies `f` stamp-wise to two tubes.
    ///
    /// Invariant operands broadcast over the other tube's stamps; two
    /// time-varying operands must share their stamps.
    pub fn zip_with(&self, other: &ValueTube, f: impl Fn(f32, f32) -> f32 + Sync + Copy) -> Result<Self> {
        match (self.invariant, other.invariant) {
            (true, true) => Ok(Self::invariant(self.fields[0].zip_with(&other.fields[0], f)?)),
            (true, false) => {
                let fields = other
                    .fields
                    .iter()
                    .map(|b| self.fields[0].zip_with(b, f))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(other.times.clone(), fields)
            }
            (false, true) => {
                let fields = self
                    .fields
                    .iter()
                    .map(|a| a.zip_with(&other.fields[0], f))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(self.times.clone(), fields)
            }
            (false, false) => {
                if self.times.len() != other.times.len()
                    || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > STAMP_TOL)
                {
                    return Err(Error::InvalidRequest("tubes have different stamps".into()));
                }
                let fields = self
                    .fields
                    .iter()
                    .zip(&other.fields)
                    .map(|(a, b)| a.zip_with(b, f))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(self.times.clone(), fields)
            }
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync + Copy) -> Self {
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            fields: self.fields.iter().map(|a| a.map(f)).collect(),
            invariant: self.invariant,
        }
    }

    /// The tube sliced at each of `times` (strictly increasing, inside the
    /// stored range).
    pub fn resample(&self, times: &[f64]) -> Result<Self> {
        let fields = times.iter().map(|t| self.omega_slice(*t)).collect::<Result<Vec<_>>>()?;
        Self::new(times.to_vec(), fields)
    }

    /// Stamps at which the encoded set is non-empty.
    pub fn nonempty_stamps(&self) -> Vec<usize> {
        (0..self.fields.len()).filter(|k| !self.fields[*k].is_empty_set()).collect()
    }
}

#[inline]
pub(crate) fn lerp(a: f32, b: f32, w: f32) -> f32 {
    (1.0 - w) * a + w * b
}

pub fn tube_union(a: &ValueTube, b: &ValueTube) -> Result<ValueTube> {
    a.zip_with(b, f32::min)
}

pub fn tube_intersect(a: &ValueTube, b: &ValueTube) -> Result<ValueTube> {
    a.zip_with(b, f32::max)
}

pub fn tube_complement(a: &ValueTube) -> ValueTube {
    a.map(|v| -v)
}

/// How a time-dependent field is merged into an accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Overwrite,
    Max,
    Min,
}

impl Combine {
    #[inline]
    pub(crate) fn apply(self, acc: f32, v: f32) -> f32 {
        match self {
            Combine::Overwrite => v,
            Combine::Max => acc.max(v),
            Combine::Min => acc.min(v),
        }
    }
}

/// Anything that can produce a value field on a grid at a given time.
///
/// The solver reads its target and constraint through this trait so that
/// compositions like `C ∩ Dᶜ` are evaluated lazily per time step.
pub trait TimeField: Sync {
    fn grid(&self) -> &Arc<Grid>;

    fn is_invariant(&self) -> bool;

    fn covers(&self, t0: f64, t1: f64) -> bool;

    /// `out[i] = op(out[i], self(t)[i])` for every node.
    fn combine_into(&self, t: f64, out: &mut [f32], op: Combine) -> Result<()>;

    fn fill(&self, t: f64, out: &mut [f32]) -> Result<()> {
        self.combine_into(t, out, Combine::Overwrite)
    }
}

impl TimeField for ValueTube {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn is_invariant(&self) -> bool {
        self.invariant
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        ValueTube::covers(self, t0, t1)
    }

    fn combine_into(&self, t: f64, out: &mut [f32], op: Combine) -> Result<()> {
        match self.bracket(t)? {
            Bracket::Exact(k) => {
                let src = self.fields[k].values();
                out.par_iter_mut()
                    .zip(src.par_iter())
                    .with_min_len(4096)
                    .for_each(|(o, v)| *o = op.apply(*o, *v));
            }
            Bracket::Between { lower, weight } => {
                let a = self.fields[lower].values();
                let b = self.fields[lower + 1].values();
                out.par_iter_mut()
                    .zip(a.par_iter().zip(b.par_iter()))
                    .with_min_len(4096)
                    .for_each(|(o, (x, y))| *o = op.apply(*o, lerp(*x, *y, weight)));
            }
        }
        Ok(())
    }
}

/// Lazy pointwise negation of a time field.
pub struct Negated<'a>(pub &'a dyn TimeField);

impl TimeField for Negated<'_> {
    fn grid(&self) -> &Arc<Grid> {
        self.0.grid()
    }

    fn is_invariant(&self) -> bool {
        self.0.is_invariant()
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        self.0.covers(t0, t1)
    }

    fn combine_into(&self, t: f64, out: &mut [f32], op: Combine) -> Result<()> {
        // -op'(-acc, v) with the dual operation keeps this allocation-free.
        let dual = match op {
            Combine::Overwrite => Combine::Overwrite,
            Combine::Max => Combine::Min,
            Combine::Min => Combine::Max,
        };
        out.par_iter_mut().with_min_len(4096).for_each(|o| *o = -*o);
        self.0.combine_into(t, out, dual)?;
        out.par_iter_mut().with_min_len(4096).for_each(|o| *o = -*o);
        Ok(())
    }
}

/// Lazy pointwise maximum (set intersection) of several time fields.
pub struct Intersection<'a>(pub Vec<&'a dyn TimeField>);

impl TimeField for Intersection<'_> {
    fn grid(&self) -> &Arc<Grid> {
        self.0[0].grid()
    }

    fn is_invariant(&self) -> bool {
        self.0.iter().all(|f| f.is_invariant())
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        self.0.iter().all(|f| f.covers(t0, t1))
    }

    fn combine_into(&self, t: f64, out: &mut [f32], op: Combine) -> Result<()> {
        match op {
            Combine::Overwrite => {
                self.0[0].fill(t, out)?;
                for f in &self.0[1..] {
                    f.combine_into(t, out, Combine::Max)?;
                }
                Ok(())
            }
            Combine::Max => {
                for f in &self.0 {
                    f.combine_into(t, out, Combine::Max)?;
                }
                Ok(())
            }
            Combine::Min => {
                let mut tmp = vec![0.0f32; out.len()];
                self.combine_into(t, &mut tmp, Combine::Overwrite)?;
                out.par_iter_mut()
                    .zip(tmp.par_iter())
                    .with_min_len(4096)
                    .for_each(|(o, v)| *o = o.min(*v));
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line() -> Arc<Grid> {
        Arc::new(Grid::new(&[0.0], &[1.0], &[3], &[false]).unwrap())
    }

    #[test]
    fn invariant_tube_slices_to_its_field() {
        let f = ValueField::new(line(), vec![-1.0, 0.5, 2.0]).unwrap();
        let tube = ValueTube::invariant(f.clone());
        assert_eq!(tube.omega_slice(-123.0).unwrap(), f);
        assert_eq!(tube.omega_slice(1e6).unwrap(), f);
    }

    #[test]
    fn linear_time_interpolation() {
        let a = ValueField::new(line(), vec![0.0, 1.0, 2.0]).unwrap();
        let b = ValueField::new(line(), vec![2.0, 3.0, -2.0]).unwrap();
        let tube = ValueTube::new(vec![0.0, 1.0], vec![a.clone(), b.clone()]).unwrap();
        let mid = tube.omega_slice(0.5).unwrap();
        assert_eq!(mid.values(), &[1.0, 2.0, 0.0]);
        assert_eq!(tube.omega_slice(1.0).unwrap(), b);
        assert!(matches!(tube.omega_slice(1.5), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn rejects_unsorted_stamps() {
        let a = ValueField::constant(line(), 0.0);
        assert!(ValueTube::new(vec![1.0, 0.0], vec![a.clone(), a]).is_err());
    }

    #[test]
    fn membership_on_node() {
        let f = ValueField::new(line(), vec![-0.2, 0.2, 1.0]).unwrap();
        let tube = ValueTube::invariant(f);
        let (inside, v) = tube.membership(&[0.0], 3.0).unwrap();
        assert!(inside);
        assert!((v + 0.2).abs() < 1e-7);
        let (inside, v) = tube.membership(&[0.25], 3.0).unwrap();
        assert!(inside && v.abs() < 1e-7);
        assert!(tube.membership(&[1.5], 0.0).is_err());
    }

    #[test]
    fn membership_is_periodic_in_heading() {
        let g = Arc::new(Grid::new(&[0.0, -PI], &[1.0, PI], &[5, 31], &[false, true]).unwrap());
        let f = ValueField::from_fn(g, |z| z[0] - 0.5 + 0.3 * z[1].sin());
        let tube = ValueTube::invariant(f);
        for k in -3..=3 {
            let a = tube.value_at(&[0.4, PI + 0.1 + 2.0 * PI * k as f64], 0.0).unwrap();
            let b = tube.value_at(&[0.4, -PI + 0.1], 0.0).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lazy_intersection_with_complement() {
        let g = line();
        let c = ValueTube::invariant(ValueField::new(g.clone(), vec![-1.0, -1.0, 1.0]).unwrap());
        let d = ValueTube::new(
            vec![0.0, 1.0],
            vec![
                ValueField::new(g.clone(), vec![1.0, -0.5, 1.0]).unwrap(),
                ValueField::new(g.clone(), vec![1.0, 1.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let neg = Negated(&d);
        let both = Intersection(vec![&c, &neg]);
        let mut out = vec![0.0f32; 3];
        both.fill(0.0, &mut out).unwrap();
        assert_eq!(out, vec![-1.0, 0.5, 1.0]);
        both.fill(0.5, &mut out).unwrap();
        assert_eq!(out, vec![-1.0, -0.25, 1.0]);
        assert!(!both.is_invariant());
    }
}
