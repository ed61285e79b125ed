//! `flatgen` command line.
//!
//! Exit codes: 0 success or feasible, 1 infeasible or numerical failure,
//! 2 usage or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{
    base_allocation, check_trajectory, circle_check, circle_max_speed, hover_to_hover_heatmap,
    knife_edge_speed_bound, min_feasible_scale, solve_scaled, yaw_grid, FeasibilityReport,
    ScanConfig, ScanPoint,
};
use crate::io::{ensure_dir, write_text};
use crate::maneuvers::{
    build_recipe, CircleMode, CircleSpec, Maneuver, ManeuverName, ManeuverRecipe,
};
use crate::minsnap::{to_csv, PiecewisePolynomialTrajectory};
use crate::simulator::{integrate_open_loop, tracking_metrics, windowed_round_trip, SimConfig};
use crate::vehicle::{ModelMode, VehicleParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "FLATGEN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "flatgen", version, about = "Aerobatic trajectory generation for tailsitter flying wings")]
pub struct Cli {
    /// Vehicle parameter file (defaults to the bundled nominal vehicle).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Sampling step of the feasibility check [s].
    #[arg(long, global = true, default_value_t = 0.005)]
    pub dt: f64,
    /// Integration step of the simulator [s].
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub step: f64,
    /// Force/moment model used by the simulator.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Consistent)]
    pub mode: ModeArg,
    /// Heatmap grid size per axis.
    #[arg(long, global = true, default_value_t = 9)]
    pub grid: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Consistent,
    Full,
}

impl From<ModeArg> for ModelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Consistent => ModelMode::FlatnessConsistent,
            ModeArg::Full => ModelMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CircleModeArg {
    Coordinated,
    KnifeEdge,
    Rolling,
}

impl From<CircleModeArg> for CircleMode {
    fn from(m: CircleModeArg) -> Self {
        match m {
            CircleModeArg::Coordinated => CircleMode::Coordinated,
            CircleModeArg::KnifeEdge => CircleMode::KnifeEdge,
            CircleModeArg::Rolling => CircleMode::Rolling,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a maneuver at its fastest feasible time scale and export it.
    Generate(GenerateArgs),
    /// Check a trajectory JSON file against the input envelope.
    Check(FileArgs),
    /// Minimum feasible hover-to-hover time over a start/end yaw grid.
    Heatmap(HeatmapArgs),
    /// Integrate a trajectory open loop and report windowed errors.
    Simulate(SimulateArgs),
    /// Maximum feasible speed on a horizontal circle, per yaw mode.
    Circle(CircleArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Built-in maneuver name.
    #[arg(long, required_unless_present = "recipe", conflicts_with = "recipe")]
    pub maneuver: Option<String>,
    /// Recipe JSON file.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    /// hover_to_hover distance [m].
    #[arg(long, default_value_t = 6.0)]
    pub dist: f64,
    /// hover_to_hover start yaw [rad].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub psi_start: f64,
    /// hover_to_hover end yaw [rad].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub psi_end: f64,
    /// circle radius [m].
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    /// circle speed [m/s].
    #[arg(long, default_value_t = 5.0)]
    pub speed: f64,
    #[arg(long, value_enum, default_value_t = CircleModeArg::Coordinated)]
    pub circle_mode: CircleModeArg,
    /// Fixed total time [s] instead of the fastest feasible one.
    #[arg(long)]
    pub time: Option<f64>,
    /// Lower bound of the time-scale scan.
    #[arg(long, default_value_t = 0.25)]
    pub c_lo: f64,
    /// Upper bound of the time-scale scan.
    #[arg(long, default_value_t = 4.0)]
    pub c_hi: f64,
}

#[derive(Debug, Args)]
pub struct FileArgs {
    /// Trajectory JSON written by `generate`.
    pub trajectory: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, default_value_t = 6.0)]
    pub dist: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub trajectory: PathBuf,
    /// Window length of the restarted comparison [s].
    #[arg(long, default_value_t = 0.5)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NothingFeasible { profile, .. } = &e {
                eprintln!("scan profile (c, feasible):");
                for (c, f) in profile {
                    eprintln!("  {c:.6} {f}");
                }
            }
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ParamFile { .. }
        | Error::InvalidParams(_)
        | Error::Io { .. }
        | Error::Format(_)
        | Error::UnknownManeuver(_)
        | Error::ManeuverParam(_)
        | Error::InvalidWaypoints(_)
        | Error::InvalidTimeAllocation(_) => EXIT_USAGE,
        _ => EXIT_INFEASIBLE,
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_params(cli: &Cli) -> Result<VehicleParams> {
    match &cli.params {
        Some(path) => VehicleParams::load(path),
        None => Ok(VehicleParams::nominal()),
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Format(format!("--{name} must be positive, got {v}")))
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    check_positive("dt", cli.dt)?;
    check_positive("step", cli.step)?;
    let p = load_params(cli)?;
    ensure_dir(&cli.out)?;
    match &cli.command {
        Command::Generate(a) => generate(cli, a, &p),
        Command::Check(a) => check(cli, a, &p),
        Command::Heatmap(a) => heatmap(cli, a, &p),
        Command::Simulate(a) => simulate(cli, a, &p),
        Command::Circle(a) => circle(cli, a, &p),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into())
}

fn print_report(r: &FeasibilityReport) {
    println!(
        "verdict: {}  ({} samples, dt = {} s, duration = {:.4} s)",
        if r.feasible { "feasible" } else { "infeasible" },
        r.n_samples,
        r.dt,
        r.duration
    );
    if let (Some(t), Some(why)) = (r.first_violation_time, &r.first_violation_reason) {
        println!("first violation at t = {t:.4} s: {why}");
    }
    println!(
        "margins: omega_min {:.3} rad/s, omega_max {:.3} rad/s, delta_max {:.5} rad{}",
        r.margins.omega_min,
        r.margins.omega_max,
        r.margins.delta_max,
        if r.near_limit { " (near limit; consider a smaller --dt)" } else { "" }
    );
    println!(
        "peaks: speed {:.3} m/s, load {:.3} g, rate {:.1} deg/s",
        r.peak_speed,
        r.peak_load,
        r.peak_rate.to_degrees()
    );
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    name: &'a str,
    c_star: f64,
    total_time: f64,
    at_lower_bound: bool,
    base_durations: &'a [f64],
    profile: &'a [ScanPoint],
}

fn generate(cli: &Cli, a: &GenerateArgs, p: &VehicleParams) -> Result<i32> {
    let maneuver = match (&a.maneuver, &a.recipe) {
        (_, Some(path)) => Maneuver::Waypoints(ManeuverRecipe::load(path)?),
        (Some(name), None) => {
            let name = match ManeuverName::parse(name)? {
                ManeuverName::HoverToHover { .. } => ManeuverName::HoverToHover {
                    dist: a.dist,
                    psi_start: a.psi_start,
                    psi_end: a.psi_end,
                },
                ManeuverName::Circle(_) => ManeuverName::Circle(CircleSpec {
                    radius: a.radius,
                    speed: a.speed,
                    mode: a.circle_mode.into(),
                }),
                other => other,
            };
            build_recipe(name)?
        }
        (None, None) => return Err(Error::Format("one of --maneuver or --recipe is required".into())),
    };
    let mut recipe = match maneuver {
        Maneuver::Circle(c) => {
            let r = circle_check(c.radius, c.speed, c.mode, p, cli.dt)?;
            write_text(&cli.out.join("circle_report.json"), &json(&r))?;
            print_report(&r);
            return Ok(if r.feasible { EXIT_OK } else { EXIT_INFEASIBLE });
        }
        Maneuver::Waypoints(r) => r,
    };
    if let Some(t) = a.time {
        check_positive("time", t)?;
        recipe.total_time = Some(t);
    }
    let name = recipe.name.clone();
    let scan = ScanConfig { c_lo: a.c_lo, c_hi: a.c_hi, dt: cli.dt, ..ScanConfig::default() };
    let traj = if recipe.total_time.is_some() {
        let base = base_allocation(&recipe, &scan.time)?;
        solve_scaled(&recipe, &base, 1.0)?
    } else {
        let found = min_feasible_scale(&recipe, p, &scan)?;
        write_text(
            &cli.out.join(format!("{name}_scan.json")),
            &json(&ScanOutput {
                name: &name,
                c_star: found.c_star,
                total_time: found.total_time,
                at_lower_bound: found.at_lower_bound,
                base_durations: found.base.durations(),
                profile: &found.profile,
            }),
        )?;
        println!(
            "time scale c* = {:.5} (total {:.4} s){}",
            found.c_star,
            found.total_time,
            if found.at_lower_bound { ", at the lower scan bound" } else { "" }
        );
        solve_scaled(&recipe, &found.base, found.c_star)?
    };
    let report = check_trajectory(&traj, p, cli.dt)?;
    write_text(&cli.out.join(format!("{name}.json")), &format!("{}\n", traj.to_json()))?;
    write_text(&cli.out.join(format!("{name}.csv")), &to_csv(&traj, cli.dt)?)?;
    write_text(&cli.out.join(format!("{name}_report.json")), &json(&report))?;
    print_report(&report);
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn check(cli: &Cli, a: &FileArgs, p: &VehicleParams) -> Result<i32> {
    let traj = PiecewisePolynomialTrajectory::load(&a.trajectory)?;
    let report = check_trajectory(&traj, p, cli.dt)?;
    write_text(&cli.out.join(format!("{}_report.json", stem(&a.trajectory))), &json(&report))?;
    print_report(&report);
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn heatmap(cli: &Cli, a: &HeatmapArgs, p: &VehicleParams) -> Result<i32> {
    if cli.grid == 0 {
        return Err(Error::Format("--grid must be at least 1".into()));
    }
    check_positive("dist", a.dist)?;
    let grid = yaw_grid(cli.grid);
    let scan = ScanConfig { dt: cli.dt, ..ScanConfig::default() };
    let map = hover_to_hover_heatmap(&grid, &grid, a.dist, p, &scan)?;
    write_text(&cli.out.join("heatmap.csv"), &map.to_csv())?;
    match map.argmin() {
        Some((i, j)) => println!(
            "fastest: {:.4} s at psi_start = {:.4}, psi_end = {:.4}",
            map.times[i][j], grid[i], grid[j]
        ),
        None => println!("no feasible cell"),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimOutput {
    mode: ModelMode,
    step: f64,
    max_res_trans: f64,
    max_res_rot: f64,
    max_quaternion_drift: f64,
    diverged_at: Option<f64>,
    metrics: crate::simulator::TrackingMetrics,
    windowed: crate::simulator::WindowedErrors,
}

fn simulate(cli: &Cli, a: &SimulateArgs, p: &VehicleParams) -> Result<i32> {
    let traj = PiecewisePolynomialTrajectory::load(&a.trajectory)?;
    let cfg = SimConfig {
        step: cli.step,
        mode: cli.mode.into(),
        window: a.window,
        ..SimConfig::default()
    };
    let trace = integrate_open_loop(&traj, p, &cfg)?;
    let windowed = windowed_round_trip(&traj, p, &cfg)?;
    let metrics = tracking_metrics(&trace, &traj, p)?;
    let out = SimOutput {
        mode: cfg.mode,
        step: trace.step,
        max_res_trans: trace.rows.iter().map(|r| r.res_trans).fold(0.0, f64::max),
        max_res_rot: trace.rows.iter().map(|r| r.res_rot).fold(0.0, f64::max),
        max_quaternion_drift: trace.max_quaternion_drift,
        diverged_at: trace.diverged_at,
        metrics,
        windowed,
    };
    let s = stem(&a.trajectory);
    write_text(&cli.out.join(format!("{s}_trace.csv")), &trace.to_csv())?;
    write_text(&cli.out.join(format!("{s}_metrics.json")), &json(&out))?;
    println!(
        "max speed {:.3} m/s, max load {:.3} g, max rate {:.1} deg/s",
        metrics.max_speed, metrics.max_load_g, metrics.max_rate_deg_s
    );
    println!(
        "windowed error ({} s windows): position {:.3e} m, attitude {:.3e} rad",
        cfg.window, out.windowed.max_position, out.windowed.max_attitude
    );
    println!("max residuals: translational {:.3e}, rotational {:.3e}", out.max_res_trans, out.max_res_rot);
    Ok(EXIT_OK)
}

fn circle(cli: &Cli, a: &CircleArgs, p: &VehicleParams) -> Result<i32> {
    check_positive("radius", a.radius)?;
    let limits = CircleMode::ALL
        .iter()
        .map(|m| circle_max_speed(a.radius, *m, p, cli.dt))
        .collect::<Result<Vec<_>>>()?;
    let bound = knife_edge_speed_bound(a.radius, p);
    let mut csv = String::from("mode,radius,v_max,capped\n");
    for l in &limits {
        csv.push_str(&format!("{},{:?},{:?},{}\n", l.mode.as_str(), l.radius, l.v_max, l.capped));
        println!("{:<12} v_max = {:.4} m/s", l.mode.as_str(), l.v_max);
    }
    println!("thrust-only knife-edge bound: {bound:.4} m/s");
    write_text(&cli.out.join("circle_limits.csv"), &csv)?;
    Ok(EXIT_OK)
}
