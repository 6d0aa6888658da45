use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use tlt_reach::cli::{
    cmd_export, cmd_offline, cmd_rollout, cmd_verify, exit_code, load_tube, timing_table, write_rollout_csv, ExportKind, Session, EXIT_ERROR,
    EXIT_OK, EXIT_UNSATISFIABLE,
};
use tlt_reach::scenario::{build_t_intersection, load_scenario_file};
use tlt_reach::spp::{DangerPolicy, PlanOptions};
use tlt_reach::{Error, Result};

#[derive(Parser)]
#[command(name = "tlt-reach", version, about = "Reachability-based verification of vehicles crossing an intersection")]
struct Cli {
    /// Scenario file; the built-in T-intersection when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for cached tubes.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Use the scenario's coarse grid.
    #[arg(long, global = true)]
    coarse: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// CFL number in (0, 1].
    #[arg(long, global = true)]
    cfl: Option<f64>,
    /// How higher-priority vehicles are turned into danger sets.
    #[arg(long, global = true, value_enum, default_value_t = Danger::Reservation)]
    danger: Danger,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Danger {
    Reservation,
    AdmissibleSet,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and cache the offline tube of one vehicle.
    Offline {
        /// Priority of the vehicle, starting at 1.
        #[arg(long)]
        vehicle: usize,
    },
    /// Plan every vehicle in priority order and report the verdicts.
    Verify {
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a slice of a tube file as plot-ready data.
    Export {
        tube: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: ExportKind,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Values of the dimensions after x and y, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        fixed: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one vehicle from a given state under its online tube.
    Rollout {
        /// Priority of the vehicle, starting at 1.
        #[arg(long)]
        vehicle: usize,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        z0: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ExportKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn session(cli: &Cli) -> Result<Session> {
    let scenario = match &cli.scenario {
        Some(p) => load_scenario_file(p)?,
        None => build_t_intersection(),
    };
    let mut options = PlanOptions::default();
    if let Some(cfl) = cli.cfl {
        options.solver.cfl = cfl;
    }
    options.danger = match cli.danger {
        Danger::Reservation => DangerPolicy::Reservation,
        Danger::AdmissibleSet => DangerPolicy::AdmissibleSet,
    };
    Session::new(scenario, cli.coarse, options, cli.cache.clone())
}

fn vehicle_index(priority: usize) -> Result<usize> {
    priority.checked_sub(1).ok_or_else(|| Error::Scenario("vehicle priorities start at 1".into()))
}

fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Offline { vehicle } => {
            let r = session(cli).and_then(|s| cmd_offline(&s, vehicle_index(*vehicle)?));
            match &r {
                Ok(o) => {
                    println!("{:<10}| {:>16} |", "Vehicle", "Offline Pass [s]");
                    println!("{:<10}| {:>16.2} |", o.vehicle, o.seconds);
                    if let Some(p) = &o.path {
                        println!("tube: {}{}", p.display(), if o.cached { " (cached)" } else { "" });
                    }
                }
                Err(e) => error!("{e}"),
            }
            exit_code(&r, |_| true)
        }
        Command::Verify { report } => {
            let r = session(cli).and_then(|s| cmd_verify(&s)).and_then(|(rep, _)| {
                let mut out = output(report)?;
                serde_json::to_writer_pretty(&mut out, &rep).map_err(|e| Error::Scenario(e.to_string()))?;
                writeln!(out)?;
                out.flush()?;
                eprint!("{}", timing_table(&rep));
                Ok(rep)
            });
            if let Err(e) = &r {
                error!("{e}");
            }
            exit_code(&r, |rep| rep.all_satisfiable)
        }
        Command::Export { tube, kind, t, fixed, out } => {
            let r = load_tube(tube).and_then(|tb| {
                let mut w = output(out)?;
                let rows = cmd_export(&tb, *kind, *t, fixed.as_deref(), &mut w)?;
                w.flush()?;
                Ok(rows)
            });
            if let Err(e) = &r {
                error!("{e}");
            }
            exit_code(&r, |_| true)
        }
        Command::Rollout { vehicle, z0, dt, out } => {
            let r = session(cli).and_then(|s| cmd_rollout(&s, vehicle_index(*vehicle)?, z0, *dt)).and_then(|rep| {
                let mut w = output(out)?;
                write_rollout_csv(&rep, &mut w)?;
                w.flush()?;
                Ok(rep)
            });
            match &r {
                Err(Error::UnsafeStart { value }) => eprintln!("initial state is outside the safe set (value {value})"),
                Err(e) => error!("{e}"),
                Ok(_) => {}
            }
            exit_code(&r, |rep| rep.reached_at.is_some())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("{e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    let code = run(&cli);
    debug_assert!([EXIT_OK, EXIT_UNSATISFIABLE, EXIT_ERROR].contains(&code));
    ExitCode::from(code as u8)
}
