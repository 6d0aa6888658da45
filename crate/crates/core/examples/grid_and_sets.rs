//! Level-set basics: a grid, two boxes as signed-distance fields, their
//! Boolean combinations and a time-varying tube.

use std::sync::Arc;

use tlt_reach::statespace::{set_complement, set_intersect, set_union, signed_distance_box, Grid, ValueTube};

fn main() -> tlt_reach::Result<()> {
    // Position and heading; heading wraps around.
    let pi = std::f64::consts::PI;
    let grid = Arc::new(Grid::new(&[-1.0, -1.0, -pi], &[1.0, 1.0, pi], &[41, 41, 24], &[false, false, true])?);
    println!("{} nodes, spacing {:.3?}", grid.len(), grid.spacing());

    let inf = f64::INFINITY;
    // An eastbound lane and a junction box that admits any heading.
    let lane = signed_distance_box(&grid, &[-inf, -0.5, -pi / 4.0], &[inf, 0.0, pi / 4.0])?;
    let junction = signed_distance_box(&grid, &[-0.3, -0.3, -inf], &[0.3, 0.3, inf])?;

    let road = set_union(&lane, &junction)?;
    let both = set_intersect(&lane, &junction)?;
    let off_road = set_complement(&road);
    println!("lane {} nodes, junction {}, union {}, intersection {}", lane.count_inside(), junction.count_inside(), road.count_inside(), both.count_inside());
    println!("off road: {} nodes", off_road.count_inside());

    // Membership through interpolation: facing west inside the lane is
    // only allowed inside the junction.
    for z in [[0.8, -0.25, 0.0], [0.8, -0.25, pi], [0.0, -0.25, pi]] {
        println!("  {z:?}: road value {:+.3}", road.interpolate(&z)?);
    }

    // A tube that shrinks from the road to the lane over one second.
    let tube = ValueTube::new(vec![0.0, 1.0], vec![road.clone(), lane.clone()])?;
    let z = [0.0, 0.2, 0.0];
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("  t = {t:.2}: value {:+.3}", tube.value_at(&z, t)?);
    }
    Ok(())
}
