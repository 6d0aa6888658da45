use crate::error::{Error, Result};

/// Maximum number of state dimensions handled by the stencil kernels.
pub const MAX_DIM: usize = 8;

/// Rectilinear grid over a box-shaped state space.
///
/// Node `k` of dimension `d` sits at `lo[d] + k * spacing[d]`. Periodic
/// dimensions do not duplicate the endpoint, so `hi[d]` is identified with
/// `lo[d]` and never stored.
#[derive(Debug, Clone)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.lo == other.lo
            && self.hi == other.hi
            && self.shape == other.shape
            && self.periodic == other.periodic
    }
}

/// Bracketing nodes and the weight of the upper one along one axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisCell {
    pub lower: usize,
    pub upper: usize,
    pub weight: f64,
}

impl Grid {
    pub fn new(lo: &[f64], hi: &[f64], shape: &[usize], periodic: &[bool]) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n || shape.len() != n || periodic.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "lo has {} entries, hi {}, shape {}, periodic {}",
                n,
                hi.len(),
                shape.len(),
                periodic.len()
            )));
        }
        if n == 0 || n > MAX_DIM {
            return Err(Error::DimensionMismatch(format!(
                "grids need between 1 and {MAX_DIM} dimensions, got {n}"
            )));
        }
        for d in 0..n {
            if !(lo[d].is_finite() && hi[d].is_finite() && lo[d] < hi[d]) {
                return Err(Error::InvalidBounds { dim: d, lo: lo[d], hi: hi[d] });
            }
            if shape[d] < 3 {
                return Err(Error::TooFewPoints { dim: d, count: shape[d] });
            }
        }
        let spacing = (0..n)
            .map(|d| {
                let cells = if periodic[d] { shape[d] } else { shape[d] - 1 };
                (hi[d] - lo[d]) / cells as f64
            })
            .collect();
        let mut strides = vec![1usize; n];
        for d in (0..n - 1).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        Ok(Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            shape: shape.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
        })
    }

    pub fn ndim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Row-major strides; the last dimension is contiguous.
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, dim: usize, k: usize) -> f64 {
        self.lo[dim] + k as f64 * self.spacing[dim]
    }

    /// Node coordinates along one axis.
    pub fn axis(&self, dim: usize) -> Vec<f64> {
        (0..self.shape[dim]).map(|k| self.coord(dim, k)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for d in 0..self.ndim() {
            idx[d] = flat / self.strides[d];
            flat %= self.strides[d];
        }
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = [0usize; MAX_DIM];
        self.unravel(flat, &mut idx);
        (0..self.ndim()).map(|d| self.coord(d, idx[d])).collect()
    }

    /// Largest spacing over all dimensions.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Wraps periodic coordinates into `[lo, hi)`.
    pub fn wrap(&self, dim: usize, x: f64) -> f64 {
        if !self.periodic[dim] {
            return x;
        }
        let period = self.hi[dim] - self.lo[dim];
        let mut r = (x - self.lo[dim]).rem_euclid(period);
        if r >= period {
            r = 0.0;
        }
        self.lo[dim] + r
    }

    /// Checks that `z` lies within the non-periodic bounds (with a tiny
    /// tolerance) and returns it with periodic components wrapped.
    pub fn canonical(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.ndim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} components, grid has {} dimensions",
                z.len(),
                self.ndim()
            )));
        }
        let mut out = Vec::with_capacity(z.len());
        for (d, &x) in z.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::StateOutOfBounds {
                    dim: d,
                    value: x,
                    lo: self.lo[d],
                    hi: self.hi[d],
                });
            }
            if self.periodic[d] {
                out.push(self.wrap(d, x));
            } else {
                let tol = 1e-9 * (self.hi[d] - self.lo[d]);
                if x < self.lo[d] - tol || x > self.hi[d] + tol {
                    return Err(Error::StateOutOfBounds {
                        dim: d,
                        value: x,
                        lo: self.lo[d],
                        hi: self.hi[d],
                    });
                }
                out.push(x.clamp(self.lo[d], self.hi[d]));
            }
        }
        Ok(out)
    }

    /// Bracketing cell along `dim` for a canonical coordinate.
    pub(crate) fn locate(&self, dim: usize, x: f64) -> AxisCell {
        let n = self.shape[dim];
        let s = (x - self.lo[dim]) / self.spacing[dim];
        if self.periodic[dim] {
            let k = (s.floor() as isize).rem_euclid(n as isize) as usize;
            let w = (s - s.floor()).clamp(0.0, 1.0);
            AxisCell { lower: k, upper: (k + 1) % n, weight: w }
        } else {
            let k = (s.floor().max(0.0) as usize).min(n - 2);
            let w = (s - k as f64).clamp(0.0, 1.0);
            AxisCell { lower: k, upper: k + 1, weight: w }
        }
    }

    /// Nearest node index along `dim` for a canonical coordinate.
    pub fn nearest(&self, dim: usize, x: f64) -> usize {
        let n = self.shape[dim];
        let s = ((x - self.lo[dim]) / self.spacing[dim]).round();
        if self.periodic[dim] {
            (s as isize).rem_euclid(n as isize) as usize
        } else {
            (s.max(0.0) as usize).min(n - 1)
        }
    }

    /// Same grid with every point count replaced (bounds and periodicity kept).
    pub fn with_shape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(&self.lo, &self.hi, shape, &self.periodic)
    }
}

/// Signed circular distance helper: shortest angular separation of `a` and
/// `b` on a circle of the given period, in `[0, period / 2]`.
pub(crate) fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let r = (a - b).rem_euclid(period);
    r.min(period - r)
}
