//! Composing a reach set with an invariant set separately over-approximates
//! the set of states that can reach a goal while obeying a constraint.
//!
//! Two vertical corridors, goal at the top of the right one: the separate
//! composition keeps the left corridor (it can reach the goal if it may
//! cross the gap, and it can stay on the road if it does not move), while
//! the constrained reach set drops it.

use std::sync::Arc;

use tlt_reach::dynamics::SingleIntegrator2D;
use tlt_reach::hjsolver::{solve_brt, solve_rci, BrtRequest, SolverOptions};
use tlt_reach::statespace::{signed_distance_box, tube_intersect, Grid, ValueField, ValueTube};

fn main() -> tlt_reach::Result<()> {
    let grid = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[61, 61], &[false, false])?);
    let left = signed_distance_box(&grid, &[-0.9, -0.9], &[-0.5, 0.9])?;
    let right = signed_distance_box(&grid, &[0.5, -0.9], &[0.9, 0.9])?;
    let road = ValueTube::invariant(left.zip_with(&right, f32::min)?);
    let goal = ValueTube::invariant(signed_distance_box(&grid, &[0.5, 0.6], &[0.9, 0.9])?);
    let free = ValueTube::invariant(ValueField::full(grid.clone()));
    let model = SingleIntegrator2D::unit();
    let opts = SolverOptions::default();
    let span = (0.0, 2.0);

    let fused = solve_brt(&BrtRequest { model: &model, grid: grid.clone(), target: &goal, constraint: &road, t_span: span }, &opts)?;
    let reach = solve_brt(&BrtRequest { model: &model, grid: grid.clone(), target: &goal, constraint: &free, t_span: span }, &opts)?;
    let stay = solve_rci(&model, &grid, &road, span, &opts)?;
    let naive = tube_intersect(&reach, &stay)?;

    let (f, n) = (fused.field(0), naive.field(0));
    println!("constrained reach: {} nodes, separate composition: {} nodes", f.count_inside(), n.count_inside());
    for z in [[-0.7, 0.7], [-0.7, -0.7], [0.7, -0.7]] {
        println!("  {z:?}: constrained {:+.3}, separate {:+.3}", f.interpolate(&z)?, n.interpolate(&z)?);
    }
    Ok(())
}
