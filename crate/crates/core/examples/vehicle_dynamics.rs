//! The kinematic bicycle: open-loop integration and the control that
//! extremizes the Hamiltonian for a given costate.

use tlt_reach::dynamics::{Dynamics, ReachMode, VehicleModel};

fn main() -> tlt_reach::Result<()> {
    let pi = std::f64::consts::PI;
    // Steering rate in [−π, π], acceleration in [−0.5, 0.5].
    let model = VehicleModel::new(0.32, [-pi, -0.5], [pi, 0.5], [-1.2, -1.2, -pi, -0.2 * pi, 0.0], [1.2, 1.2, pi, 0.2 * pi, 1.0])?;

    // Steer left while speeding up, then straighten out.
    let mut z = vec![-1.0, -0.25, 0.0, 0.0, 0.5];
    let dt = 0.01;
    for k in 0..200 {
        let u = if k < 50 { [1.0, 0.3] } else if k < 100 { [-1.0, 0.0] } else { [0.0, 0.0] };
        let dz = model.flow(&z, &u)?;
        for (zi, d) in z.iter_mut().zip(&dz) {
            *zi += dt * d;
        }
        model.saturate(&mut z);
        if k % 50 == 49 {
            println!("t = {:.1}: {:.3?}", (k + 1) as f64 * dt, z);
        }
    }

    // Reaching minimizes the Hamiltonian over the control box, avoiding
    // maximizes it.
    let p = [1.0, 0.0, -0.4, -0.2, 0.3];
    for mode in [ReachMode::Reach, ReachMode::Avoid] {
        println!("{mode:?}: H = {:+.3}, u* = {:.3?}", model.hamiltonian(&z, &p, mode)?, model.optimal_control(&z, &p, mode)?);
    }
    Ok(())
}
