//! Backward reachable tube of a double integrator that must reach `x ≤ 0`
//! within one second, checked against the closed form and followed by a
//! closed-loop rollout.

use std::sync::Arc;

use tlt_reach::dynamics::DoubleIntegrator;
use tlt_reach::hjsolver::{simulate, solve_brt_detailed, BrtRequest, SimulationOptions, SolverOptions};
use tlt_reach::statespace::{signed_distance_box, Grid, ValueField, ValueTube};

fn main() -> tlt_reach::Result<()> {
    let grid = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[101, 101], &[false, false])?);
    let model = DoubleIntegrator::new(-0.5, 0.5)?;
    let inf = f64::INFINITY;
    let target = ValueTube::invariant(signed_distance_box(&grid, &[-inf, -inf], &[0.0, inf])?);
    let free = ValueTube::invariant(ValueField::full(grid.clone()));

    let req = BrtRequest { model: &model, grid: grid.clone(), target: &target, constraint: &free, t_span: (0.0, 1.0) };
    let sol = solve_brt_detailed(&req, &SolverOptions::default())?;
    println!("{} steps, {} stamps, {:.2} s", sol.stats.steps, sol.tube.len(), sol.stats.seconds);

    // Full braking reaches x ≤ 0 in time iff x ≤ max(0, 1/4 − v).
    let f = sol.tube.field(0);
    let wrong = (0..grid.len())
        .filter(|&i| {
            let z = grid.node(i);
            (z[0] <= (0.25 - z[1]).max(0.0)) != (f.values()[i] <= 0.0)
        })
        .count();
    println!("{wrong} of {} nodes differ from the closed form", grid.len());

    let z0 = [0.1, 0.05];
    let traj = simulate(&model, &sol.tube, &target, &z0, 0.0, &SimulationOptions::default())?;
    match traj.reached_at {
        Some(t) => println!("from {z0:?}: x ≤ 0 at t = {t:.2}, final state {:.3?}", traj.states.last().unwrap()),
        None => println!("from {z0:?}: target missed"),
    }
    Ok(())
}
