//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use flatgen::feasibility::{
    circle_max_speed, circle_sample, feasible_runs, hover_to_hover_heatmap, knife_edge_speed_bound,
    min_feasible_scale, solve_scaled, yaw_grid, ScanConfig,
};
use flatgen::maneuvers::{
    hover_to_hover, race_course, race_recipe, recipe, CircleMode, ManeuverName, ManeuverRecipe, MANEUVER_NAMES,
};
use flatgen::minsnap::{initial_time_estimate, solve_min_snap, TimeConfig, VelocityConstraint};
use flatgen::rotation::vee;
use flatgen::simulator::eom_residual;
use flatgen::vehicle::ModelMode;
use flatgen::{flat_to_full, BranchState, FlatSample, TimeAllocation, VehicleParams, Waypoint};
use nalgebra::{Matrix3, Vector3};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const RESIDUAL_REL_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;
const OMEGA_TOL: f64 = 1e-3;
const OMEGA_DOT_TOL: f64 = 1e-2;
const ORACLE_REL_TOL: f64 = 1e-8;
const CONSTRAINT_REL_TOL: f64 = 1e-9;
const CONTINUITY_REL_TOL: f64 = 1e-6;
const KNIFE_EDGE_SETS: usize = 100;
const KNIFE_EDGE_GAP: f64 = 0.10;
const MIRROR_REL_TOL: f64 = 0.01;
const SCALE_REL_TOL: f64 = 1e-6;
const SAMPLE_DT: f64 = 0.005;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A flat output signal on `[0, duration]`.
struct Signal {
    name: String,
    duration: f64,
    sample: Box<dyn Fn(f64) -> FlatSample + Sync>,
}

fn signals(p: &VehicleParams) -> Vec<Signal> {
    let mut out: Vec<Signal> = common::recipes_at_min_scale()
        .iter()
        .map(|r| Signal {
            name: r.name.clone(),
            duration: r.traj.duration(),
            sample: Box::new(move |t| r.traj.sample(t).unwrap()),
        })
        .collect();
    for rec in [hover_to_hover(6.0, 0.0, 0.0).unwrap(), race_recipe(&race_course()).unwrap()] {
        let s = min_feasible_scale(&rec, p, &ScanConfig::default()).unwrap();
        let traj = solve_scaled(&rec, &s.base, s.c_star).unwrap();
        out.push(Signal {
            name: rec.name.clone(),
            duration: traj.duration(),
            sample: Box::new(move |t| traj.sample(t).unwrap()),
        });
    }
    for mode in CircleMode::ALL {
        let r = 3.0;
        let v = circle_max_speed(r, mode, p, SAMPLE_DT).unwrap().v_max;
        out.push(Signal {
            name: format!("circle/{}", mode.as_str()),
            duration: 2.0 * PI * r / v,
            sample: Box::new(move |t| circle_sample(r, v, mode, t)),
        });
    }
    out
}

fn grid(duration: f64, dt: f64) -> Vec<f64> {
    let n = (duration / dt).ceil() as usize;
    (0..=n).map(|i| (i as f64 * dt).min(duration)).collect()
}

fn eom_identity(p: &VehicleParams, sigs: &[Signal]) -> Outcome {
    let (mut worst_t, mut worst_r) = (0.0f64, 0.0f64);
    let mut n = 0usize;
    let mut worst = "";
    for s in sigs {
        let qs: Vec<FlatSample> = grid(s.duration, SAMPLE_DT).into_iter().map(&s.sample).collect();
        let mut probe = BranchState::new();
        let (mut f_max, mut wd_max) = (1.0f64, 1.0f64);
        for q in &qs {
            let full = flat_to_full(q, p, &mut probe).unwrap();
            f_max = f_max.max((q.a - Vector3::new(0.0, 0.0, p.g)).norm());
            wd_max = wd_max.max(full.omega_dot.norm());
        }
        let mut branch = BranchState::new();
        for q in &qs {
            let (et, er) = eom_residual(q, p, &mut branch, ModelMode::FlatnessConsistent).unwrap();
            if et / f_max > worst_t.max(worst_r) || er / wd_max > worst_t.max(worst_r) {
                worst = &s.name;
            }
            worst_t = worst_t.max(et / f_max);
            worst_r = worst_r.max(er / wd_max);
            n += 1;
        }
    }
    outcome(
        worst_t <= RESIDUAL_REL_TOL && worst_r <= RESIDUAL_REL_TOL,
        format!(
            "{} signals, {n} samples: max relative residual trans {worst_t:.2e}, rot {worst_r:.2e} \
             (tol {RESIDUAL_REL_TOL:e}), largest on {worst}",
            sigs.len()
        ),
    )
}

fn finite_differences(p: &VehicleParams, sigs: &[Signal]) -> Outcome {
    let (mut e_w, mut e_wd) = (0.0f64, 0.0f64);
    for s in sigs {
        let mut branch = BranchState::new();
        for t in grid(s.duration, SAMPLE_DT) {
            let here = flat_to_full(&(s.sample)(t), p, &mut branch).unwrap();
            if t < FD_STEP || t > s.duration - FD_STEP {
                continue;
            }
            let at = |t: f64| {
                let mut b = branch;
                flat_to_full(&(s.sample)(t), p, &mut b).unwrap()
            };
            let (minus, plus) = (at(t - FD_STEP), at(t + FD_STEP));
            let r_dot: Matrix3<f64> = (plus.rotation - minus.rotation) / (2.0 * FD_STEP);
            let omega_fd = vee(&(here.rotation.transpose() * r_dot));
            e_w = e_w.max((omega_fd - here.omega).norm());
            e_wd = e_wd.max(((plus.omega - minus.omega) / (2.0 * FD_STEP) - here.omega_dot).norm());
        }
    }
    outcome(
        e_w <= OMEGA_TOL && e_wd <= OMEGA_DOT_TOL,
        format!(
            "h = {FD_STEP:e} s: max |omega error| {e_w:.2e} rad/s (tol {OMEGA_TOL:e}), \
             max |omega_dot error| {e_wd:.2e} rad/s^2 (tol {OMEGA_DOT_TOL:e})"
        ),
    )
}

fn jerk_rest(x: Vector3<f64>) -> Waypoint {
    let mut w = Waypoint::new(x, 0.0).with_velocity(Vector3::zeros()).with_acceleration(Vector3::zeros());
    w.jerk = Some(Vector3::zeros());
    w
}

fn all_recipes() -> Vec<ManeuverRecipe> {
    let mut out: Vec<ManeuverRecipe> = MANEUVER_NAMES
        .iter()
        .map(|n| ManeuverName::parse(n).unwrap())
        .filter(|n| !matches!(n, ManeuverName::Circle(_)))
        .map(|n| recipe(n).unwrap())
        .collect();
    out.push(race_recipe(&race_course()).unwrap());
    out
}

fn minsnap_oracle() -> Outcome {
    // Rest to rest with snap free: x(tau) = x0 + d (35 tau^4 - 84 tau^5 + 70 tau^6 - 20 tau^7).
    let closed = [
        |t: f64| 35.0 * t.powi(4) - 84.0 * t.powi(5) + 70.0 * t.powi(6) - 20.0 * t.powi(7),
        |t: f64| 140.0 * t.powi(3) - 420.0 * t.powi(4) + 420.0 * t.powi(5) - 140.0 * t.powi(6),
        |t: f64| 420.0 * t.powi(2) - 1680.0 * t.powi(3) + 2100.0 * t.powi(4) - 840.0 * t.powi(5),
    ];
    let x0 = Vector3::new(1.0, -2.0, 0.5);
    let d = Vector3::new(3.0, 1.5, -2.0);
    let t_seg = 2.3;
    let traj = solve_min_snap(&[jerk_rest(x0), jerk_rest(x0 + d)], &TimeAllocation::new(vec![t_seg]).unwrap(), 1.0)
        .unwrap();
    let mut oracle_err = 0.0f64;
    for i in 0..=500 {
        let tau = i as f64 / 500.0;
        let q = traj.sample(tau * t_seg).unwrap();
        for (k, got) in [q.x - x0, q.v, q.a].iter().enumerate() {
            let scale = t_seg.powi(k as i32);
            let want = d * closed[k](tau) / scale;
            oracle_err = oracle_err.max((got - want).norm() * scale / d.norm());
        }
    }

    let mut constraint_err = 0.0f64;
    let mut continuity_err = 0.0f64;
    for r in all_recipes() {
        let est = initial_time_estimate(&r.waypoints, &TimeConfig::default()).unwrap();
        let traj = solve_min_snap(&r.waypoints, &est.allocation, r.mu_psi).unwrap();
        let mut peak = [1.0f64; 8];
        for t in traj.sample_times(1e-3) {
            let q = traj.sample(t).unwrap();
            let m = [q.x.norm(), q.v.norm(), q.a.norm(), q.j.norm(), q.s.norm(), q.psi.abs(), q.psi_d.abs(), q.psi_dd.abs()];
            for (p, v) in peak.iter_mut().zip(m) {
                *p = p.max(v);
            }
        }
        let b = traj.boundaries();
        for (i, w) in r.waypoints.iter().enumerate() {
            let q = traj.sample(b[i]).unwrap();
            let mut e = vec![(q.x - w.position).norm() / peak[0], (q.psi - w.yaw).abs() / peak[5]];
            match w.velocity {
                VelocityConstraint::Fixed { value } => e.push((q.v - value).norm() / peak[1]),
                VelocityConstraint::Direction { unit } => e.push(q.v.cross(&unit).norm() / peak[1]),
                VelocityConstraint::Free => {}
            }
            for (k, got, want) in [(2, q.a, w.acceleration), (3, q.j, w.jerk), (4, q.s, w.snap)] {
                if let Some(want) = want {
                    e.push((got - want).norm() / peak[k]);
                }
            }
            if let Some(v) = w.yaw_rate {
                e.push((q.psi_d - v).abs() / peak[6]);
            }
            if let Some(v) = w.yaw_acceleration {
                e.push((q.psi_dd - v).abs() / peak[7]);
            }
            constraint_err = e.into_iter().fold(constraint_err, f64::max);
        }
        let segs = traj.segments();
        for k in 0..segs.len() - 1 {
            let (a, c) = (segs[k].sample(1.0), segs[k + 1].sample(0.0));
            let pos = [(a.x, c.x), (a.v, c.v), (a.a, c.a), (a.j, c.j), (a.s, c.s)];
            for (o, (u, v)) in pos.iter().enumerate() {
                continuity_err = continuity_err.max((u - v).norm() / peak[o]);
            }
            let yaw = [(a.psi, c.psi), (a.psi_d, c.psi_d), (a.psi_dd, c.psi_dd)];
            for (o, (u, v)) in yaw.iter().enumerate() {
                continuity_err = continuity_err.max((u - v).abs() / peak[5 + o]);
            }
        }
    }
    outcome(
        oracle_err <= ORACLE_REL_TOL && constraint_err <= CONSTRAINT_REL_TOL && continuity_err <= CONTINUITY_REL_TOL,
        format!(
            "degree-7 rest-to-rest error {oracle_err:.2e} (tol {ORACLE_REL_TOL:e}), \
             waypoint constraints {constraint_err:.2e} (tol {CONSTRAINT_REL_TOL:e}), \
             C4 position / C2 yaw junctions {continuity_err:.2e} (tol {CONTINUITY_REL_TOL:e})"
        ),
    )
}

/// Random vehicles with thrust loss coefficients in [0, 1].
fn random_vehicle() -> impl Strategy<Value = (VehicleParams, f64)> {
    (
        (0.3..1.5f64, 5e-7..3e-6f64, 1500.0..3500.0f64, 50.0..300.0f64, 0.5..2.0f64),
        (0.0..0.9f64, 0.0..1.0f64, 0.0..0.2f64, 0.0..0.4f64, 0.2..1.2f64, 0.0..0.1f64),
        (0.0..0.25f64, -0.1..0.1f64, 0.7..1.3f64, 0.3..0.7f64, 1.5..6.0f64),
    )
        .prop_map(|((m, c_t, w_max, w_min, j), (c_dt, c_lt, c_dv, c_lv, c_dlt, c_dlv), (a0, at, l, dmax, r))| {
            let mut p = VehicleParams::nominal();
            p.m = m;
            p.c_t = c_t;
            p.omega_max = w_max;
            p.omega_min = w_min;
            p.j *= j * m / 0.5;
            p.c_dt = c_dt;
            p.c_lt = c_lt;
            p.c_dv = c_dv;
            p.c_lv = c_lv;
            p.c_dlt = c_dlt;
            p.c_dlv = c_dlv;
            p.alpha0 = a0;
            p.alpha_t = at;
            p.l_ty *= l;
            p.l_dy *= l;
            p.l_dx *= l;
            p.delta_max = dmax;
            (p, r)
        })
}

fn knife_edge_bound(p: &VehicleParams) -> Outcome {
    let mut runner = TestRunner::new_with_rng(
        Config::with_cases(KNIFE_EDGE_SETS as u32),
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let strategy = random_vehicle();
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..KNIFE_EDGE_SETS {
        let (q, r) = strategy.new_tree(&mut runner).unwrap().current();
        q.validate().unwrap();
        let limit = circle_max_speed(r, CircleMode::KnifeEdge, &q, SAMPLE_DT).unwrap();
        let ratio = limit.v_max / knife_edge_speed_bound(r, &q);
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    let bound = knife_edge_speed_bound(3.0, p);
    let nominal = circle_max_speed(3.0, CircleMode::KnifeEdge, p, SAMPLE_DT).unwrap().v_max;
    let gap = 1.0 - nominal / bound;
    outcome(
        violations == 0 && (0.0..=KNIFE_EDGE_GAP).contains(&gap),
        format!(
            "{KNIFE_EDGE_SETS} random vehicles: {violations} above bound, largest limit/bound {worst_ratio:.4}; \
             nominal r = 3 m: limit {nominal:.3} m/s, bound {bound:.3} m/s, gap {:.1}% (max {:.0}%)",
            100.0 * gap,
            100.0 * KNIFE_EDGE_GAP
        ),
    )
}

fn heatmap(p: &VehicleParams) -> Outcome {
    let g = yaw_grid(9);
    let map = hover_to_hover_heatmap(&g, &g, 6.0, p, &ScanConfig::default()).unwrap();
    let n = g.len();
    let Some((i, j)) = map.argmin() else {
        return outcome(false, "no feasible cell".into());
    };
    let mut mirror = 0.0f64;
    let mut nan_mismatch = 0;
    for a in 0..n {
        for b in 0..n {
            let (u, v) = (map.times[a][b], map.times[n - 1 - a][n - 1 - b]);
            match (u.is_finite(), v.is_finite()) {
                (true, true) => mirror = mirror.max((u - v).abs() / u.min(v)),
                (false, false) => {}
                _ => nan_mismatch += 1,
            }
        }
    }
    let centre = map.times[n / 2][n / 2];
    let runner_up = map
        .times
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite() && *v != centre)
        .fold(f64::INFINITY, f64::min);
    outcome(
        (i, j) == (n / 2, n / 2) && mirror <= MIRROR_REL_TOL && nan_mismatch == 0,
        format!(
            "9x9, 6 m: minimum {:.4} s at ({:.3}, {:.3}), next {runner_up:.4} s; mirror asymmetry {:.3}% (max {:.0}%), \
             {nan_mismatch} feasibility mismatches",
            map.times[i][j],
            g[i],
            g[j],
            100.0 * mirror,
            100.0 * MIRROR_REL_TOL
        ),
    )
}

fn circle_ordering(p: &VehicleParams) -> Outcome {
    let v: Vec<f64> = [CircleMode::Coordinated, CircleMode::KnifeEdge, CircleMode::Rolling]
        .iter()
        .map(|m| circle_max_speed(3.0, *m, p, SAMPLE_DT).unwrap().v_max)
        .collect();
    outcome(
        v[0] > v[1] && v[1] > v[2],
        format!("r = 3 m: coordinated {:.3} > knife-edge {:.3} > rolling {:.3} m/s", v[0], v[1], v[2]),
    )
}

fn loop_band(p: &VehicleParams) -> Outcome {
    let r = recipe(ManeuverName::Loop).unwrap();
    let s = min_feasible_scale(&r, p, &ScanConfig::default()).unwrap();
    let runs = feasible_runs(&s.profile);
    let shown: Vec<String> = runs.iter().map(|(a, b)| format!("[{a:.3}, {b:.3}]")).collect();
    outcome(
        runs.len() >= 2,
        format!("feasible scale runs {} (c* = {:.4}); needs an infeasible band between two", shown.join(" "), s.c_star),
    )
}

fn scale_and_determinism(p: &VehicleParams) -> Outcome {
    // Direction-only and rest constraints: re-solving at c t equals time-scaling.
    let mut cov = 0.0f64;
    let mut cost = 0.0f64;
    for r in [hover_to_hover(5.0, 0.4, -1.1).unwrap(), race_recipe(&race_course()).unwrap()] {
        let est = initial_time_estimate(&r.waypoints, &TimeConfig::default()).unwrap();
        let base = solve_min_snap(&r.waypoints, &est.allocation, 1.0).unwrap();
        for c in [0.5, 1.7, 3.0] {
            let t: Vec<f64> = est.allocation.durations().iter().map(|v| v * c).collect();
            let resolved = solve_min_snap(&r.waypoints, &TimeAllocation::new(t).unwrap(), 1.0).unwrap();
            let scaled = base.scaled(c).unwrap();
            for tb in base.sample_times(0.01) {
                let tc = (c * tb).min(resolved.duration());
                let (u, v) = (resolved.sample(tc).unwrap(), scaled.sample(tc).unwrap());
                cov = cov.max((u.x - v.x).norm() / u.x.norm().max(1.0));
                cov = cov.max((u.v - v.v).norm() / u.v.norm().max(1.0));
            }
            let (j0, jc) = (base.snap_cost(0.0), resolved.snap_cost(0.0));
            cost = cost.max((jc * c.powi(7) - j0).abs() / j0);
        }
    }
    let run = || {
        let r = recipe(ManeuverName::ClimbingTurn).unwrap();
        let s = min_feasible_scale(&r, p, &ScanConfig::default()).unwrap();
        solve_scaled(&r, &s.base, s.c_star).unwrap().to_json()
    };
    let same_lib = run() == run();
    let cli_runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::TempDir::new().unwrap();
            let st = Command::new(env!("CARGO_BIN_EXE_flatgen"))
                .args(["generate", "--maneuver", "loop", "--out"])
                .arg(dir.path())
                .output()
                .unwrap();
            assert!(st.status.success());
            let mut bytes = std::fs::read(dir.path().join("loop.json")).unwrap();
            bytes.extend(std::fs::read(dir.path().join("loop.csv")).unwrap());
            bytes.extend(std::fs::read(dir.path().join("loop_report.json")).unwrap());
            bytes
        })
        .collect();
    let same_cli = cli_runs[0] == cli_runs[1];
    outcome(
        cov <= SCALE_REL_TOL && cost <= SCALE_REL_TOL && same_lib && same_cli,
        format!(
            "re-solve vs time-scale {cov:.2e}, snap cost c^7 law {cost:.2e} (tol {SCALE_REL_TOL:e}); \
             library rerun identical {same_lib}, CLI rerun byte-identical {same_cli}"
        ),
    )
}

fn main() {
    let p = common::nominal();
    let started = Instant::now();
    let sigs = signals(&p);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 EOM residual identity", Box::new(|| eom_identity(&p, &sigs))),
        ("2 finite-difference rates", Box::new(|| finite_differences(&p, &sigs))),
        ("3 min-snap oracle", Box::new(minsnap_oracle)),
        ("4 knife-edge speed bound", Box::new(|| knife_edge_bound(&p))),
        ("5 hover-to-hover heatmap", Box::new(|| heatmap(&p))),
        ("6 circle ordering", Box::new(|| circle_ordering(&p))),
        ("7 loop infeasible band", Box::new(|| loop_band(&p))),
        ("8 scale covariance and determinism", Box::new(|| scale_and_determinism(&p))),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t0 = Instant::now();
        let o = f();
        println!(
            "{} criterion {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
