//! Sequential verification of three vehicles at a T-intersection.
//!
//! ```text
//! cargo run --release --example t_intersection -- [--fine] [--cache DIR]
//! ```
//!
//! The coarse grid runs in seconds; `--fine` uses the full resolution.

use tlt_reach::cli::{cmd_verify, timing_table, Session};
use tlt_reach::scenario::build_t_intersection;
use tlt_reach::spp::PlanOptions;

fn main() -> tlt_reach::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let fine = args.iter().any(|a| a == "--fine");
    let cache = args.iter().position(|a| a == "--cache").and_then(|i| args.get(i + 1)).map(Into::into);

    let session = Session::new(build_t_intersection(), !fine, PlanOptions::default(), cache)?;
    let (report, plan) = cmd_verify(&session)?;
    print!("{}", timing_table(&report));
    for (r, p) in report.vehicles.iter().zip(&plan.vehicles) {
        let window = r.window.map_or("none".to_string(), |w| format!("[{}, {}]", w[0], w[1]));
        println!(
            "{}: {:?}, interaction window {window}, {} states in the online tube at t0",
            r.name,
            r.verdict,
            p.online.field(0).count_inside()
        );
    }
    println!("all satisfiable: {}", report.all_satisfiable);
    Ok(())
}
