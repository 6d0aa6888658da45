//! Declarative intersection descriptions and the built-in T-intersection.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "t_intersection"
//! horizon = [0.0, 10.0]
//!
//! [grid]
//! lo = [-1.2, -1.2, -3.14159, -0.62832, 0.0]   # x, y, heading, steering, speed
//! hi = [1.2, 1.2, 3.14159, 0.62832, 1.0]
//! shape = [31, 31, 31, 7, 11]
//! periodic = [false, false, true, false, false]
//! coarse_shape = [21, 21, 21, 5, 7]               # optional
//!
//! [speed]
//! lower = 0.4
//! upper = 1.0
//!
//! [junction]                                      # headings unconstrained here
//! lo = [-0.5, -0.5]
//! hi = [0.5, 0.5]
//!
//! [[roads]]                                       # one entry per lane
//! box = { lo = [-inf, -0.5], hi = [inf, 0.0] }
//! heading_lo = -0.785
//! heading_hi = 0.785
//!
//! [[vehicles]]                                    # list order is priority
//! name = "v1"
//! entry = { lo = [0.7, 0.0], hi = [1.2, 0.5] }
//! goal = { lo = [-0.5, -inf], hi = [0.0, -0.7], heading = [-2.356, -0.785], speed = [0.4, 1.0] }
//! wheelbase = 0.32
//! footprint = 0.1
//! control = { lo = [-3.14159, -0.5], hi = [3.14159, 0.5] }
//! start = [1.1, 0.25, 3.14159, 0.0, 0.6]            # optional nominal start
//! ```
//!
//! Infinite box bounds leave that axis unconstrained. Finite bounds that
//! stick out of the grid domain are clipped with a warning.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleModel;
use crate::error::{Error, Result};
use crate::statespace::{set_intersect, signed_distance_box, Grid, ValueField, ValueTube};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon: [f64; 2],
    pub grid: GridSpec,
    pub speed: SpeedBand,
    pub junction: Area,
    pub roads: Vec<Road>,
    pub vehicles: Vec<VehicleSeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    pub periodic: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_shape: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedBand {
    pub lower: f64,
    pub upper: f64,
}

/// Axis-aligned box in the `(x, y)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Road {
    #[serde(rename = "box")]
    pub area: Area,
    pub heading_lo: f64,
    pub heading_hi: f64,
}

/// Position box with optional heading and speed intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSeed {
    pub name: String,
    pub entry: Region,
    pub goal: Region,
    pub wheelbase: f64,
    pub footprint: f64,
    pub control: ControlBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl Scenario {
    pub fn t_span(&self) -> (f64, f64) {
        (self.horizon[0], self.horizon[1])
    }

    /// The paper-fidelity grid, or the coarse one when requested and defined.
    pub fn grid(&self, coarse: bool) -> Result<Arc<Grid>> {
        let shape = match (&self.grid.coarse_shape, coarse) {
            (Some(s), true) => s,
            (None, true) => return Err(Error::Scenario("scenario defines no coarse grid".into())),
            (_, false) => &self.grid.shape,
        };
        Ok(Arc::new(Grid::new(&self.grid.lo, &self.grid.hi, shape, &self.grid.periodic)?))
    }

    pub fn model(&self, j: usize) -> Result<VehicleModel> {
        let v = self.vehicle(j)?;
        let lo: [f64; 5] = self.grid.lo.as_slice().try_into().map_err(|_| Error::Scenario("vehicle grids are five-dimensional".into()))?;
        let hi: [f64; 5] = self.grid.hi.as_slice().try_into().map_err(|_| Error::Scenario("vehicle grids are five-dimensional".into()))?;
        VehicleModel::new(v.wheelbase, v.control.lo, v.control.hi, lo, hi)
    }

    pub fn vehicle(&self, j: usize) -> Result<&VehicleSeed> {
        self.vehicles.get(j).ok_or_else(|| Error::Scenario(format!("no vehicle with index {j}")))
    }

    /// Checks the invariants and clips finite boxes to the domain.
    pub fn validate(mut self) -> Result<Self> {
        if !(self.horizon[0] < self.horizon[1]) {
            return Err(Error::Scenario(format!("horizon [{}, {}] is empty", self.horizon[0], self.horizon[1])));
        }
        if !(self.speed.lower < self.speed.upper) {
            return Err(Error::Scenario("speed.lower must be below speed.upper".into()));
        }
        if self.grid.lo.len() != 5 {
            return Err(Error::Scenario("vehicle grids are five-dimensional".into()));
        }
        Grid::new(&self.grid.lo, &self.grid.hi, &self.grid.shape, &self.grid.periodic)?;
        if let Some(c) = &self.grid.coarse_shape {
            Grid::new(&self.grid.lo, &self.grid.hi, c, &self.grid.periodic)?;
        }
        if self.vehicles.is_empty() {
            return Err(Error::Scenario("the vehicle list is empty".into()));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if self.vehicles[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::Scenario(format!("vehicle name `{}` is used twice", v.name)));
            }
            if !(v.footprint >= 0.0) {
                return Err(Error::Scenario(format!("vehicle `{}` has a negative footprint", v.name)));
            }
        }
        let (lo, hi) = ([self.grid.lo[0], self.grid.lo[1]], [self.grid.hi[0], self.grid.hi[1]]);
        let clip = |what: &str, r: &mut [f64; 2], s: &mut [f64; 2]| -> Result<()> {
            for d in 0..2 {
                if r[d] > s[d] {
                    return Err(Error::Scenario(format!("{what}: lower bound above upper bound")));
                }
                if s[d] < lo[d] || r[d] > hi[d] {
                    return Err(Error::Scenario(format!("{what} lies outside the grid domain")));
                }
                if r[d].is_finite() && r[d] < lo[d] {
                    warn!("{what}: clipping lower bound {} to {}", r[d], lo[d]);
                    r[d] = lo[d];
                }
                if s[d].is_finite() && s[d] > hi[d] {
                    warn!("{what}: clipping upper bound {} to {}", s[d], hi[d]);
                    s[d] = hi[d];
                }
            }
            Ok(())
        };
        for v in &mut self.vehicles {
            clip(&format!("entry box of `{}`", v.name), &mut v.entry.lo, &mut v.entry.hi)?;
            clip(&format!("goal box of `{}`", v.name), &mut v.goal.lo, &mut v.goal.hi)?;
            if let Some(z) = &v.start {
                if z.len() != 5 {
                    return Err(Error::Scenario(format!("start of `{}` needs five components", v.name)));
                }
            }
        }
        for (k, r) in self.roads.iter_mut().enumerate() {
            clip(&format!("road {k}"), &mut r.area.lo, &mut r.area.hi)?;
        }
        clip("junction", &mut self.junction.lo, &mut self.junction.hi)?;
        Ok(self)
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_string()))?;
    s.validate()
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario> {
    load_scenario(&std::fs::read_to_string(path)?)
}

pub fn to_toml(s: &Scenario) -> Result<String> {
    toml::to_string_pretty(s).map_err(|e| Error::Scenario(e.to_string()))
}

/// Three vehicles at a T-intersection whose stem points south.
///
/// The through road runs east-west with a westbound lane `0 ≤ y ≤ 0.5` and
/// an eastbound lane `−0.5 ≤ y ≤ 0`; the stem has a northbound lane
/// `0 ≤ x ≤ 0.5` and a southbound lane `−0.5 ≤ x ≤ 0`. `v1` comes from the
/// east and turns left into the stem, `v2` comes up the stem and turns left
/// to the west, `v3` comes from the west and turns right into the stem.
pub fn build_t_intersection() -> Scenario {
    let inf = f64::INFINITY;
    let lane = |lo: [f64; 2], hi: [f64; 2], heading: f64| Road {
        area: Area { lo, hi },
        heading_lo: heading - FRAC_PI_4,
        heading_hi: heading + FRAC_PI_4,
    };
    let heading = |h: f64| Some([h - FRAC_PI_4, h + FRAC_PI_4]);
    let exit_speed = Some([0.4, 1.0]);
    let vehicle = |name: &str, entry: Region, goal: Region| VehicleSeed {
        name: name.into(),
        entry,
        goal,
        wheelbase: VehicleModel::DEFAULT_WHEELBASE,
        footprint: 0.1,
        control: ControlBox { lo: [-PI, -0.5], hi: [PI, 0.5] },
        start: None,
    };
    let south_exit = Region { lo: [-0.5, -inf], hi: [0.0, -0.7], heading: heading(-FRAC_PI_2), speed: exit_speed };
    Scenario {
        name: "t_intersection".into(),
        horizon: [0.0, 10.0],
        grid: GridSpec {
            lo: vec![-1.2, -1.2, -PI, -PI / 5.0, 0.0],
            hi: vec![1.2, 1.2, PI, PI / 5.0, 1.0],
            shape: vec![31, 31, 31, 7, 11],
            periodic: vec![false, false, true, false, false],
            coarse_shape: Some(vec![21, 21, 21, 5, 7]),
        },
        speed: SpeedBand { lower: 0.4, upper: 1.0 },
        junction: Area { lo: [-0.5, -0.5], hi: [0.5, 0.5] },
        roads: vec![
            lane([-inf, 0.0], [inf, 0.5], PI),
            lane([-inf, -0.5], [inf, 0.0], 0.0),
            lane([0.0, -inf], [0.5, 0.5], FRAC_PI_2),
            lane([-0.5, -inf], [0.0, 0.5], -FRAC_PI_2),
        ],
        vehicles: vec![
            vehicle(
                "v1",
                Region { lo: [0.7, 0.0], hi: [1.2, 0.5], heading: None, speed: None },
                south_exit,
            ),
            vehicle(
                "v2",
                Region { lo: [0.0, -1.2], hi: [0.5, -0.7], heading: None, speed: None },
                Region { lo: [-inf, 0.0], hi: [-0.7, 0.5], heading: heading(PI), speed: exit_speed },
            ),
            vehicle(
                "v3",
                Region { lo: [-1.2, -0.5], hi: [-0.7, 0.0], heading: None, speed: None },
                south_exit,
            ),
        ],
    }
}

fn region_field(grid: &Arc<Grid>, r: &Region) -> Result<ValueField> {
    let inf = f64::INFINITY;
    let (h_lo, h_hi) = r.heading.map_or((-inf, inf), |h| (h[0], h[1]));
    let (v_lo, v_hi) = r.speed.map_or((-inf, inf), |v| (v[0], v[1]));
    signed_distance_box(grid, &[r.lo[0], r.lo[1], h_lo, -inf, v_lo], &[r.hi[0], r.hi[1], h_hi, inf, v_hi])
}

/// Traffic-rule set of vehicle `j`: the union of all lanes (heading-limited)
/// and the junction, intersected with the speed band.
pub fn constraint_field(s: &Scenario, grid: &Arc<Grid>) -> Result<ValueField> {
    let inf = f64::INFINITY;
    let mut road = signed_distance_box(grid, &[s.junction.lo[0], s.junction.lo[1], -inf, -inf, -inf], &[s.junction.hi[0], s.junction.hi[1], inf, inf, inf])?;
    for r in &s.roads {
        let lane = signed_distance_box(grid, &[r.area.lo[0], r.area.lo[1], r.heading_lo, -inf, -inf], &[r.area.hi[0], r.area.hi[1], r.heading_hi, inf, inf])?;
        road = road.zip_with(&lane, f32::min)?;
    }
    let band = signed_distance_box(grid, &[-inf, -inf, -inf, -inf, s.speed.lower], &[inf, inf, inf, inf, s.speed.upper])?;
    let c = set_intersect(&road, &band)?;
    if c.is_empty_set() {
        warn!("compiled constraint set of `{}` is empty; the specification is vacuous", s.name);
    }
    Ok(c)
}

/// `(𝒞ⱼ, 𝒢ⱼ)` as invariant tubes on `grid`.
pub fn compile_constraints(s: &Scenario, j: usize, grid: &Arc<Grid>) -> Result<(ValueTube, ValueTube)> {
    let v = s.vehicle(j)?;
    let c = constraint_field(s, grid)?;
    let g = region_field(grid, &v.goal)?;
    Ok((ValueTube::invariant(c), ValueTube::invariant(g)))
}

/// Declared entry states of vehicle `j` that also satisfy the traffic rules.
pub fn entry_field(s: &Scenario, j: usize, grid: &Arc<Grid>) -> Result<ValueField> {
    let v = s.vehicle(j)?;
    set_intersect(&region_field(grid, &v.entry)?, &constraint_field(s, grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIPPED: &str = include_str!("../scenarios/t_intersection.toml");

    fn coarse() -> (Scenario, Arc<Grid>) {
        let s = build_t_intersection();
        let g = s.grid(true).unwrap();
        (s, g)
    }

    #[test]
    fn shipped_file_matches_preset() {
        assert_eq!(load_scenario(SHIPPED).unwrap(), build_t_intersection());
        assert_eq!(build_t_intersection(), build_t_intersection());
    }

    #[test]
    fn preset_bounds() {
        let s = build_t_intersection();
        let m = s.model(0).unwrap();
        assert_eq!(m.state_lo, [-1.2, -1.2, -PI, -PI / 5.0, 0.0]);
        assert_eq!(m.state_hi, [1.2, 1.2, PI, PI / 5.0, 1.0]);
        assert_eq!(m.control_lo, [-PI, -0.5]);
        assert_eq!(m.control_hi, [PI, 0.5]);
        assert_eq!(s.vehicles[1].entry.lo, [0.0, -1.2]);
        assert_eq!(s.vehicles[1].entry.hi, [0.5, -0.7]);
        assert_eq!(s.grid(false).unwrap().shape(), &[31, 31, 31, 7, 11]);
    }

    #[test]
    fn constraint_examples() {
        let (s, g) = coarse();
        let (c, _) = compile_constraints(&s, 0, &g).unwrap();
        let inside = |z: [f64; 5]| c.value_at(&z, 0.0).unwrap() <= 0.0;
        assert!(inside([0.0, 0.0, 2.0, 0.0, 0.7]));
        assert!(inside([1.0, 0.25, PI, 0.0, 0.7]));
        assert!(!inside([1.0, 0.25, FRAC_PI_2, 0.0, 0.7]));
        assert!(!inside([0.0, 0.0, 0.0, 0.0, 0.2]));
        assert!(!inside([0.0, 1.0, 0.0, 0.0, 0.7]));
    }

    #[test]
    fn road_order_does_not_matter() {
        let (mut s, g) = coarse();
        let a = constraint_field(&s, &g).unwrap();
        s.roads.reverse();
        assert_eq!(a, constraint_field(&s, &g).unwrap());
    }

    #[test]
    fn every_entry_meets_the_rules() {
        let (s, g) = coarse();
        for j in 0..s.vehicles.len() {
            assert!(!entry_field(&s, j, &g).unwrap().is_empty_set());
        }
    }

    #[test]
    fn schema_errors() {
        let missing = SHIPPED.replace("horizon = [", "# horizon = [");
        match load_scenario(&missing) {
            Err(Error::Scenario(m)) => assert!(m.contains("horizon"), "{m}"),
            other => panic!("{other:?}"),
        }
        let mut s = build_t_intersection();
        s.vehicles[0].goal = Region { lo: [2.0, 2.0], hi: [3.0, 3.0], heading: None, speed: None };
        assert!(s.validate().is_err());
        let mut s = build_t_intersection();
        s.vehicles.clear();
        assert!(s.validate().is_err());
        let mut s = build_t_intersection();
        s.vehicles[1].name = "v1".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn clipping_keeps_infinite_sentinels() {
        let mut s = build_t_intersection();
        s.vehicles[0].entry.hi = [1.5, 0.5];
        let s = s.validate().unwrap();
        assert_eq!(s.vehicles[0].entry.hi, [1.2, 0.5]);
        assert_eq!(s.vehicles[0].goal.lo[1], f64::NEG_INFINITY);
    }
}
