//! Writing a tube to disk and exporting plot-ready slices of it.
//!
//! ```text
//! cargo run --release --example tube_export -- [OUT_DIR]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use tlt_reach::cli::{cmd_export, load_tube, save_tube, ExportKind};
use tlt_reach::dynamics::SingleIntegrator2D;
use tlt_reach::hjsolver::{solve_brt, BrtRequest, SolverOptions};
use tlt_reach::statespace::{signed_distance_box, Grid, ValueTube};

fn main() -> tlt_reach::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("tlt-reach-export"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let grid = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[81, 81], &[false, false])?);
    let goal = ValueTube::invariant(signed_distance_box(&grid, &[0.4, 0.4], &[0.8, 0.8])?);
    let room = ValueTube::invariant(signed_distance_box(&grid, &[-0.9, -0.9], &[0.9, 0.9])?);
    let model = SingleIntegrator2D::unit();
    let opts = SolverOptions { stamp_interval: Some(0.25), ..SolverOptions::default() };
    let tube = solve_brt(&BrtRequest { model: &model, grid, target: &goal, constraint: &room, t_span: (0.0, 1.0) }, &opts)?;

    let path = out.join("reach.vtub");
    save_tube(&tube, &path)?;
    let back = load_tube(&path)?;
    assert_eq!(back, tube);
    println!("{} stamps written to {}", back.len(), path.display());

    for (kind, name) in [(ExportKind::XySlice, "slice"), (ExportKind::BoundaryPolyline, "boundary")] {
        for t in [0.0, 0.5, 1.0] {
            let file = out.join(format!("{name}-t{t}.csv"));
            let rows = cmd_export(&back, kind, t, None, &mut BufWriter::new(File::create(&file)?))?;
            println!("  {}: {rows} rows", file.display());
        }
    }
    Ok(())
}
