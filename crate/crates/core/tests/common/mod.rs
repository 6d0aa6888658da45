//! Oracles and fixtures shared by the integration tests and the acceptance
//! harness.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use tlt_reach::dynamics::SingleIntegrator2D;
use tlt_reach::hjsolver::{solve_brt, solve_rci, BrtRequest, SolverOptions};
use tlt_reach::ltl::{normalize, Formula};
use tlt_reach::spp::vehicle_formula;
use tlt_reach::statespace::{signed_distance_box, tube_complement, tube_intersect, tube_union, Grid, ValueField, ValueTube};
use tlt_reach::tlt::{build_tlt, Bindings, Tlt};

pub const INF: f64 = f64::INFINITY;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn square_grid(lo: f64, hi: f64, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&[lo, lo], &[hi, hi], &[n, n], &[false, false]).unwrap())
}

pub fn full_tube(grid: &Arc<Grid>) -> ValueTube {
    ValueTube::invariant(ValueField::full(grid.clone()))
}

/// Smallest position `x + v s + a s²/2` over `s ∈ [0, h]`.
fn min_position(x: f64, v: f64, a: f64, h: f64) -> f64 {
    let mut m = x.min(x + v * h + 0.5 * a * h * h);
    if a > 0.0 && v < 0.0 {
        let s = -v / a;
        if s < h {
            m = m.min(x + v * s + 0.5 * a * s * s);
        }
    }
    m
}

fn max_position(x: f64, v: f64, a: f64, h: f64) -> f64 {
    -min_position(-x, -v, -a, h)
}

/// Every bang-bang acceleration sequence with `pieces` equal pieces over
/// `horizon`, as bit patterns: bit `k` set means `+a_max` on piece `k`.
fn policies(pieces: usize) -> std::ops::Range<u32> {
    0..(1u32 << pieces)
}

/// Brute-force reach oracle for the double integrator: some bang-bang
/// policy drives `x` to `x ≤ 0` within `horizon`.
pub fn bang_bang_reaches(x: f64, v: f64, a_max: f64, horizon: f64, pieces: usize) -> bool {
    let h = horizon / pieces as f64;
    policies(pieces).any(|bits| {
        let (mut x, mut v) = (x, v);
        for k in 0..pieces {
            let a = if bits >> k & 1 == 1 { a_max } else { -a_max };
            if min_position(x, v, a, h) <= 0.0 {
                return true;
            }
            x += v * h + 0.5 * a * h * h;
            v += a * h;
        }
        false
    })
}

/// Brute-force invariance oracle for the double integrator: some bang-bang
/// policy keeps `|x| ≤ bound` over the whole horizon.
pub fn bang_bang_stays(x: f64, v: f64, a_max: f64, horizon: f64, pieces: usize, bound: f64) -> bool {
    let h = horizon / pieces as f64;
    policies(pieces).any(|bits| {
        let (mut x, mut v) = (x, v);
        for k in 0..pieces {
            let a = if bits >> k & 1 == 1 { a_max } else { -a_max };
            if min_position(x, v, a, h) < -bound || max_position(x, v, a, h) > bound {
                return false;
            }
            x += v * h + 0.5 * a * h * h;
            v += a * h;
        }
        true
    })
}

/// Exact reach set of `x ≤ 0` within one second at `|a| ≤ 1/2`:
/// `x ≤ max(0, 1/4 − v)`.
pub fn di_reach_exact(x: f64, v: f64) -> bool {
    x <= (0.25 - v).max(0.0)
}

/// Euclidean distance from `(x, v)` to the boundary of [`di_reach_exact`]:
/// the ray `x = 0, v ≥ 1/4` joined to the ray `x = 1/4 − v, v ≤ 1/4`.
pub fn di_reach_boundary_distance(x: f64, v: f64) -> f64 {
    let vertical = if v >= 0.25 { x.abs() } else { x.hypot(v - 0.25) };
    // Project onto the diagonal through (0, 1/4) with direction (1, −1)/√2.
    let s = ((x - 0.0) - (v - 0.25)) / 2.0;
    let diagonal = if s >= 0.0 { (x - s).hypot(v - 0.25 + s) } else { x.hypot(v - 0.25) };
    vertical.min(diagonal)
}

/// Exact invariant set of `|x| ≤ 1` at `|a| ≤ 1/2` when every stop fits in
/// the horizon: the stopping point `x + v|v|` stays inside.
pub fn di_invariant_exact(x: f64, v: f64) -> bool {
    x.abs() <= 1.0 && (x + v * v.abs()).abs() <= 1.0
}

/// Two vertical corridors on `[−1, 1]²` with the goal at the top of the
/// right one, for a unit-speed single integrator.
pub struct TwoCorridors {
    pub grid: Arc<Grid>,
    pub model: SingleIntegrator2D,
    pub goal: ValueTube,
    pub constraint: ValueTube,
    pub t_span: (f64, f64),
}

impl TwoCorridors {
    pub fn new(n: usize) -> Self {
        let grid = square_grid(-1.0, 1.0, n);
        let left = signed_distance_box(&grid, &[-0.9, -0.9], &[-0.5, 0.9]).unwrap();
        let right = signed_distance_box(&grid, &[0.5, -0.9], &[0.9, 0.9]).unwrap();
        let constraint = ValueTube::invariant(left.zip_with(&right, f32::min).unwrap());
        let goal = ValueTube::invariant(signed_distance_box(&grid, &[0.5, 0.6], &[0.9, 0.9]).unwrap());
        Self { grid, model: SingleIntegrator2D::unit(), goal, constraint, t_span: (0.0, 2.0) }
    }

    pub fn options() -> SolverOptions {
        SolverOptions { stamp_interval: None, ..SolverOptions::default() }
    }

    /// `ℛ(𝒢; 𝒞)`.
    pub fn fused(&self) -> ValueTube {
        let req = BrtRequest { model: &self.model, grid: self.grid.clone(), target: &self.goal, constraint: &self.constraint, t_span: self.t_span };
        solve_brt(&req, &Self::options()).unwrap()
    }

    /// `ℛ(𝒢; full) ∩ ℛ𝒞ℐ(𝒞)`.
    pub fn naive(&self) -> ValueTube {
        let full = full_tube(&self.grid);
        let req = BrtRequest { model: &self.model, grid: self.grid.clone(), target: &self.goal, constraint: &full, t_span: self.t_span };
        let reach = solve_brt(&req, &Self::options()).unwrap();
        let rci = solve_rci(&self.model, &self.grid, &self.constraint, self.t_span, &Self::options()).unwrap();
        tube_intersect(&reach, &rci).unwrap()
    }

    /// Nodes inside the naive set and outside the fused one at `t0`.
    pub fn leaking_nodes(&self) -> Vec<Vec<f64>> {
        let (fused, naive) = (self.fused(), self.naive());
        let (f, n) = (fused.field(0).values(), naive.field(0).values());
        (0..self.grid.len()).filter(|&i| n[i] <= 0.0 && f[i] > 0.0).map(|i| self.grid.node(i)).collect()
    }
}

/// A random field on `grid` whose values straddle zero.
pub fn random_field(rng: &mut impl Rng, grid: &Arc<Grid>) -> ValueField {
    ValueField::new(grid.clone(), (0..grid.len()).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

const ATOMS: [&str; 6] = ["p", "q", "goal_1", "c2", "d3,1", "Fx"];

/// A random formula with at most `depth` nested operators.
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    let leaf = depth == 0 || rng.gen_bool(0.2);
    if leaf {
        return match rng.gen_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(ATOMS[rng.gen_range(0..ATOMS.len())]),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => Formula::not(random_formula(rng, d)),
        1 => Formula::or(random_formula(rng, d), random_formula(rng, d)),
        2 => Formula::and(random_formula(rng, d), random_formula(rng, d)),
        3 => Formula::until(random_formula(rng, d), random_formula(rng, d)),
        4 => Formula::eventually(random_formula(rng, d)),
        _ => Formula::always(random_formula(rng, d)),
    }
}

/// The tree of the third vehicle's specification on a single integrator
/// with two blocking boxes, and the reach tube solved directly under
/// `𝒞 ∩ ¬(𝒟₀ ∪ 𝒟₁ ∪ 𝒟₂)`.
pub fn vehicle_tree_and_direct_solve() -> (Tlt, ValueTube) {
    let grid = square_grid(-1.0, 1.0, 41);
    let model = SingleIntegrator2D::unit();
    let goal = ValueTube::invariant(signed_distance_box(&grid, &[0.6, 0.6], &[0.9, 0.9]).unwrap());
    let constraint = ValueTube::invariant(signed_distance_box(&grid, &[-0.9, -0.9], &[0.9, 0.9]).unwrap());
    let times: Vec<f64> = (0..=4).map(|k| k as f64 * 0.5).collect();
    let empty = ValueTube::new(times.clone(), vec![ValueField::empty(grid.clone()); times.len()]).unwrap();
    let block = |lo: f64| ValueTube::invariant(signed_distance_box(&grid, &[lo, -0.2], &[lo + 0.3, 0.2]).unwrap());
    let mut bindings = Bindings::new();
    bindings.insert("g3".into(), goal.clone());
    bindings.insert("c3".into(), constraint.clone());
    bindings.insert("d3,0".into(), empty);
    bindings.insert("d3,1".into(), block(-0.5));
    bindings.insert("d3,2".into(), block(0.1));
    let opts = SolverOptions { stamp_interval: Some(0.5), ..SolverOptions::default() };

    let f = normalize(&vehicle_formula(3)).unwrap();
    let tree = build_tlt(&f, &bindings, &model, &grid, (0.0, 2.0), &opts).unwrap();

    let danger = ["d3,0", "d3,1", "d3,2"].iter().map(|k| bindings[*k].clone()).reduce(|a, b| tube_union(&a, &b).unwrap()).unwrap();
    let safe = tube_intersect(&constraint, &tube_complement(&danger)).unwrap();
    let req = BrtRequest { model: &model, grid: grid.clone(), target: &goal, constraint: &safe, t_span: (0.0, 2.0) };
    (tree, solve_brt(&req, &opts).unwrap())
}
