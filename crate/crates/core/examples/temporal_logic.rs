//! From a formula to a temporal logic tree: a point robot must reach a
//! goal while staying on a square and away from an obstacle.

use std::collections::HashMap;
use std::sync::Arc;

use tlt_reach::dynamics::SingleIntegrator2D;
use tlt_reach::hjsolver::SolverOptions;
use tlt_reach::ltl::{normalize, parse, to_text};
use tlt_reach::statespace::{signed_distance_box, Grid, ValueTube};
use tlt_reach::tlt::{audit, build_tlt, check_feasible, SetNode};

fn show(n: &SetNode, depth: usize) {
    let op = n.operator.as_ref().map_or(String::new(), |o| format!(" <- {:?}", o.operator));
    println!("{}{} ({} nodes inside at t0){op}", "  ".repeat(depth), n.label, n.tube.field(0).count_inside());
    if let Some(o) = &n.operator {
        for c in &o.children {
            show(c, depth + 1);
        }
    }
}

fn main() -> tlt_reach::Result<()> {
    let f = parse("F goal & G (room & !wall)")?;
    println!("parsed:     {}", to_text(&f));
    let f = normalize(&f)?;
    println!("normalized: {}", to_text(&f));

    let grid = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[61, 61], &[false, false])?);
    let boxed = |lo: [f64; 2], hi: [f64; 2]| signed_distance_box(&grid, &lo, &hi).map(ValueTube::invariant);
    let bindings = HashMap::from([
        ("goal".to_string(), boxed([0.5, 0.5], [0.9, 0.9])?),
        ("room".to_string(), boxed([-0.95, -0.95], [0.95, 0.95])?),
        ("wall".to_string(), boxed([-0.1, -1.0], [0.1, 0.6])?),
    ]);
    let model = SingleIntegrator2D::unit();
    let tree = build_tlt(&f, &bindings, &model, &grid, (0.0, 3.0), &SolverOptions::default())?;
    audit(&tree, &bindings)?;
    show(&tree.root, 0);

    for z0 in [[-0.6, -0.6], [-0.6, 0.9], [0.0, 0.0]] {
        println!("{z0:?}: {:?}", check_feasible(&tree, &z0, 0.0)?);
    }
    Ok(())
}
