use std::sync::Arc;

use super::*;
use crate::dynamics::{DoubleIntegrator, SingleIntegrator2D};
use crate::statespace::{signed_distance_box, ValueField, FAR};

fn di_grid(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[n, n], &[false, false]).unwrap())
}

fn di() -> DoubleIntegrator {
    DoubleIntegrator::new(-0.5, 0.5).unwrap()
}

fn half_line(grid: &Arc<Grid>) -> ValueTube {
    ValueTube::invariant(signed_distance_box(grid, &[f64::NEG_INFINITY, f64::NEG_INFINITY], &[0.0, f64::INFINITY]).unwrap())
}

fn full(grid: &Arc<Grid>) -> ValueTube {
    ValueTube::invariant(ValueField::full(grid.clone()))
}

fn opts() -> SolverOptions {
    SolverOptions { cfl: 0.9, save_stride: 5, convergence_tol: 1e-6, stamp_interval: None, ..SolverOptions::default() }
}

#[test]
fn full_target_is_reached_everywhere_inside_constraint() {
    let g = di_grid(41);
    let m = di();
    let target = full(&g);
    let constraint = ValueTube::invariant(signed_distance_box(&g, &[-0.5, -2.0], &[0.5, 2.0]).unwrap());
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 1.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    let c = constraint.field(0).values();
    for f in tube.fields() {
        for (v, cv) in f.values().iter().zip(c) {
            assert_eq!(*cv <= 0.0, *v <= 0.0);
        }
    }
}

#[test]
fn empty_target_stays_empty() {
    let g = di_grid(41);
    let m = di();
    let target = ValueTube::invariant(ValueField::empty(g.clone()));
    let constraint = full(&g);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 1.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    assert!(tube.fields().iter().all(|f| f.is_empty_set()));
}

#[test]
fn terminal_slice_is_exact_and_tube_is_nested() {
    let g = di_grid(61);
    let m = di();
    let target = half_line(&g);
    let constraint = ValueTube::invariant(signed_distance_box(&g, &[-0.9, -0.8], &[0.9, 0.8]).unwrap());
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 2.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    let last = tube.fields().last().unwrap().values();
    let gv = target.field(0).values();
    let cv = constraint.field(0).values();
    for i in 0..g.len() {
        assert_eq!(last[i], gv[i].max(cv[i]));
    }
    for k in 1..tube.len() {
        let (early, late) = (tube.field(k - 1).values(), tube.field(k).values());
        for i in 0..g.len() {
            assert!(early[i] <= late[i]);
            if early[i] <= 0.0 {
                assert!(cv[i] <= 0.0 || gv[i] <= 0.0);
            }
        }
    }
}

#[test]
fn reach_set_matches_closed_form_within_a_cell() {
    // Full braking reaches x ≤ 0 within one second iff x ≤ max(0, 1/4 − v).
    let g = di_grid(101);
    let m = di();
    let target = half_line(&g);
    let constraint = full(&g);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 1.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    let f = tube.field(0);
    let h = g.spacing()[0];
    let mut wrong = 0;
    for i in 0..g.len() {
        let z = g.node(i);
        let boundary = (0.25 - z[1]).max(0.0);
        let exact = z[0] <= boundary;
        if exact != (f.values()[i] <= 0.0) {
            wrong += 1;
            assert!((z[0] - boundary).abs() <= 1.5 * h, "node {z:?} misclassified");
        }
    }
    assert!(wrong * 100 <= g.len(), "{wrong} misclassified nodes");
}

#[test]
fn removing_a_full_constraint_changes_nothing() {
    let g = di_grid(41);
    let m = di();
    let target = half_line(&g);
    let c_far = full(&g);
    let c_none = ValueTube::invariant(ValueField::from_raw(g.clone(), vec![f32::MIN; g.len()]));
    let solve = |c: &ValueTube| {
        let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: c, t_span: (0.0, 1.0) };
        solve_brt(&req, &opts()).unwrap()
    };
    assert_eq!(solve(&c_far), solve(&c_none));
}

#[test]
fn invariance_is_free_for_a_full_constraint() {
    let g = di_grid(41);
    let tube = solve_rci(&di(), &g, &full(&g), (0.0, 1.0), &opts()).unwrap();
    assert!(tube.fields().iter().all(|f| f.values().iter().all(|v| *v <= 0.0)));
}

#[test]
fn speed_cap_is_invariant_under_braking() {
    let g = di_grid(41);
    let c = ValueTube::invariant(signed_distance_box(&g, &[f64::NEG_INFINITY, f64::NEG_INFINITY], &[f64::INFINITY, 0.5]).unwrap());
    let tube = solve_rci(&di(), &g, &c, (0.0, 2.0), &opts()).unwrap();
    for i in 0..g.len() {
        let z = g.node(i);
        assert_eq!(z[1] <= 0.5, tube.field(0).values()[i] <= 0.0, "node {z:?}");
    }
}

#[test]
fn invariant_set_shrinks_backward() {
    let g = di_grid(61);
    let c = ValueTube::invariant(signed_distance_box(&g, &[-0.6, -2.0], &[0.6, 2.0]).unwrap());
    let tube = solve_rci(&di(), &g, &c, (0.0, 2.0), &opts()).unwrap();
    assert_eq!(tube.fields().last().unwrap(), c.field(0));
    for k in 1..tube.len() {
        let (early, late) = (tube.field(k - 1).values(), tube.field(k).values());
        assert!(early.iter().zip(late).all(|(a, b)| a >= b));
    }
    assert!(tube.field(0).count_inside() < c.field(0).count_inside());
}

#[test]
fn rejects_bad_requests() {
    let g = di_grid(21);
    let m = di();
    let t = half_line(&g);
    let c = full(&g);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &t, constraint: &c, t_span: (1.0, 0.0) };
    assert!(solve_brt(&req, &opts()).is_err());
    let req = BrtRequest { model: &m, grid: g.clone(), target: &t, constraint: &c, t_span: (0.0, 1.0) };
    assert!(solve_brt(&req, &SolverOptions { cfl: 1.2, ..opts() }).is_err());

    let other = di_grid(31);
    let c_other = full(&other);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &t, constraint: &c_other, t_span: (0.0, 1.0) };
    assert!(matches!(solve_brt(&req, &opts()), Err(Error::GridMismatch)));

    let short = ValueTube::new(vec![0.0, 0.5], vec![ValueField::full(g.clone()), ValueField::full(g.clone())]).unwrap();
    let req = BrtRequest { model: &m, grid: g.clone(), target: &t, constraint: &short, t_span: (0.0, 1.0) };
    assert!(solve_brt(&req, &opts()).is_err());
}

#[test]
fn stamp_schedules() {
    let o = SolverOptions { save_stride: 4, ..opts() };
    let s = stamp_schedule((0.0, 1.0), Some(0.1), &o);
    // 10 steps round up to 12, three stamps intervals of four steps.
    assert_eq!(s.len(), 4);
    assert_eq!(*s.last().unwrap(), 1.0);
    let s = stamp_schedule((0.0, 10.0), Some(0.016), &SolverOptions { stamp_interval: Some(0.5), ..o });
    assert_eq!(s.len(), 21);
    assert!((s[1] - 0.5).abs() < 1e-12);
    assert_eq!(stamp_schedule((0.0, 2.0), None, &o), vec![0.0, 2.0]);
}

#[test]
fn parallel_split_does_not_change_bits() {
    let g = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[97, 89], &[false, true]).unwrap());
    let m = SingleIntegrator2D::unit();
    let target = ValueTube::invariant(signed_distance_box(&g, &[-0.2, -0.2], &[0.1, 0.3]).unwrap());
    let constraint = ValueTube::invariant(signed_distance_box(&g, &[-0.8, -2.0], &[0.8, 2.0]).unwrap());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 0.7) };
            solve_brt(&req, &opts()).unwrap()
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn rollouts_from_the_tube_reach_the_target() {
    use rand::{Rng, SeedableRng};
    let g = di_grid(101);
    let m = di();
    let target = half_line(&g);
    let constraint = full(&g);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 1.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut tried = 0;
    while tried < 100 {
        // Full braking for one second lowers v by 0.5; keep it on the grid.
        let z = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.45..0.9)];
        if tube.value_at(&z, 0.0).unwrap() > -0.05 {
            continue;
        }
        tried += 1;
        let traj = simulate(&m, &tube, &target, &z, 0.0, &SimulationOptions { dt: 0.005, ..Default::default() }).unwrap();
        assert!(traj.reached_at.is_some(), "start {z:?} never reached the target");
    }
}

#[test]
fn unsafe_start_is_reported() {
    let g = di_grid(41);
    let m = di();
    let target = half_line(&g);
    let constraint = full(&g);
    let req = BrtRequest { model: &m, grid: g.clone(), target: &target, constraint: &constraint, t_span: (0.0, 1.0) };
    let tube = solve_brt(&req, &opts()).unwrap();
    assert!(matches!(
        simulate(&m, &tube, &target, &[0.9, 0.5], 0.0, &SimulationOptions::default()),
        Err(Error::UnsafeStart { .. })
    ));
    let traj = simulate(&m, &tube, &target, &[-0.5, 0.0], 0.0, &SimulationOptions::default()).unwrap();
    assert_eq!(traj.steps(), 0);
    assert_eq!(traj.reached_at, Some(0.0));
    let _ = FAR;
}
