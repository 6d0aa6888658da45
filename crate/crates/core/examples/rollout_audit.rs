//! Monte-Carlo audit of the T-intersection plan: every vehicle is rolled
//! out from random states inside its online tube and checked against its
//! goal, constraint and danger set.
//!
//! ```text
//! cargo run --release --example rollout_audit -- [--coarse] [--runs N] [--cache DIR]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tlt_reach::cli::{audit_rollouts, Session};
use tlt_reach::scenario::build_t_intersection;
use tlt_reach::spp::PlanOptions;

fn main() -> tlt_reach::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let coarse = args.iter().any(|a| a == "--coarse");
    let flag = |name: &str| args.iter().position(|a| a == name).and_then(|i| args.get(i + 1)).cloned();
    let runs: usize = flag("--runs").map_or(100, |s| s.parse().expect("--runs takes a count"));
    let cache = flag("--cache").map(Into::into);

    let session = Session::new(build_t_intersection(), coarse, PlanOptions::default(), cache)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = 0;
    for j in 0..session.vehicles()?.len() {
        let s = audit_rollouts(&session, j, runs, 0.01, &mut rng)?;
        for f in &s.failures {
            println!("  {} from {:.3?}: reached {:?}, margins {:.3} / {:.3}", s.vehicle, f.z0, f.reached_at, f.constraint_margin, f.danger_margin);
        }
        failures += runs - s.reached;
        println!(
            "{}: {}/{} reached the goal ({} draws); worst constraint margin {:.3} (tolerance {:.3}), worst danger margin {:.3} (tolerance {:.3})",
            s.vehicle, s.reached, s.runs, s.draws, s.worst_constraint_margin, s.constraint_tolerance, s.worst_danger_margin, s.danger_tolerance
        );
    }
    println!("{failures} failed rollouts");
    Ok(())
}
