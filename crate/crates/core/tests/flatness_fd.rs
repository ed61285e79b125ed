//! Angular rates from the flat transform against finite differences of the
//! attitude it produces.

mod common;

use flatgen::rotation::vee;
use flatgen::{flat_to_full, BranchState, FullStateInput, PiecewisePolynomialTrajectory, VehicleParams};
use nalgebra::Vector3;

const H: f64 = 1e-4;
const DT: f64 = 0.005;
const OMEGA_TOL: f64 = 1e-3;
const OMEGA_DOT_TOL: f64 = 1e-2;

fn full_at(
    traj: &PiecewisePolynomialTrajectory,
    t: f64,
    p: &VehicleParams,
    branch: &BranchState,
) -> FullStateInput {
    let mut b = *branch;
    flat_to_full(&traj.sample(t).unwrap(), p, &mut b).unwrap()
}

/// Largest (Ω error, Ω̇ error) over interior samples.
fn fd_errors(traj: &PiecewisePolynomialTrajectory, p: &VehicleParams) -> (f64, f64) {
    let mut branch = BranchState::new();
    let (mut e_w, mut e_wd) = (0.0f64, 0.0f64);
    for t in traj.sample_times(DT) {
        let here = flat_to_full(&traj.sample(t).unwrap(), p, &mut branch).unwrap();
        if t < H || t > traj.duration() - H {
            continue;
        }
        let minus = full_at(traj, t - H, p, &branch);
        let plus = full_at(traj, t + H, p, &branch);
        let r_dot = (plus.rotation - minus.rotation) / (2.0 * H);
        let omega_fd: Vector3<f64> = vee(&(here.rotation.transpose() * r_dot));
        let omega_dot_fd = (plus.omega - minus.omega) / (2.0 * H);
        e_w = e_w.max((omega_fd - here.omega).norm());
        e_wd = e_wd.max((omega_dot_fd - here.omega_dot).norm());
    }
    (e_w, e_wd)
}

#[test]
fn angular_rates_match_finite_differences_on_all_recipes() {
    let p = common::nominal();
    for r in common::recipes_at_min_scale() {
        let (e_w, e_wd) = fd_errors(&r.traj, &p);
        assert!(e_w <= OMEGA_TOL, "{}: omega error {e_w:e}", r.name);
        assert!(e_wd <= OMEGA_DOT_TOL, "{}: omega_dot error {e_wd:e}", r.name);
    }
}

#[test]
fn angular_rates_match_finite_differences_on_race_course() {
    use flatgen::maneuvers::{race_course, race_recipe};
    use flatgen::minsnap::{initial_time_estimate, solve_min_snap, TimeConfig};
    let p = common::nominal();
    let r = race_recipe(&race_course()).unwrap();
    let t = initial_time_estimate(&r.waypoints, &TimeConfig::default()).unwrap();
    let traj = solve_min_snap(&r.waypoints, &t.allocation, 1.0).unwrap();
    let (e_w, e_wd) = fd_errors(&traj, &p);
    assert!(e_w <= OMEGA_TOL, "omega error {e_w:e}");
    assert!(e_wd <= OMEGA_DOT_TOL, "omega_dot error {e_wd:e}");
}
