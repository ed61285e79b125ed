//! Input-envelope certification and the feasibility studies built on it:
//! minimal time scale, hover-to-hover heatmap and circular flight limits.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatness::{flat_to_full, BranchState, FlatSample, FullStateInput};
use crate::maneuvers::{hover_to_hover, minimal_rotation_end, CircleMode, ManeuverRecipe};
use crate::minsnap::{
    initial_time_estimate, optimize_segment_times, MinSnapProblem, PiecewisePolynomialTrajectory,
    TimeAllocation, TimeConfig,
};
use crate::vehicle::{ControlInput, VehicleParams};

pub const DEFAULT_DT: f64 = 0.005;
/// Margins closer than this fraction of a limit are reported as near-limit.
pub const NEAR_LIMIT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub t: f64,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ControlInput>,
    pub negative_thrust: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Smallest distance to each limit over all samples; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub omega_min: f64,
    pub omega_max: f64,
    pub delta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub duration: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub first_violation_time: Option<f64>,
    pub first_violation_reason: Option<String>,
    pub margins: Margins,
    pub negative_thrust_events: usize,
    pub transform_errors: usize,
    /// Some margin is within 5% of its limit; a finer `dt` is advisable.
    pub near_limit: bool,
    pub peak_speed: f64,
    /// Peak of `|a - g i_z| / g`.
    pub peak_load: f64,
    pub peak_rate: f64,
    pub samples: Vec<SampleVerdict>,
}

impl FeasibilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Admissible-input test for a single input.
pub fn input_violation(u: &ControlInput, p: &VehicleParams) -> Option<String> {
    for (name, w) in [("omega1", u.omega1), ("omega2", u.omega2)] {
        if !(w >= p.omega_min) {
            return Some(format!("{name} = {w:.3} below omega_min"));
        }
        if w > p.omega_max {
            return Some(format!("{name} = {w:.3} above omega_max"));
        }
    }
    for (name, d) in [("delta1", u.delta1), ("delta2", u.delta2)] {
        if !(d.abs() <= p.delta_max) {
            return Some(format!("|{name}| = {:.4} above delta_max", d.abs()));
        }
    }
    None
}

/// Runs the flatness transform along `samples` (in time order) and checks
/// every input against the envelope.
pub fn check_samples<I>(samples: I, p: &VehicleParams, dt: f64) -> FeasibilityReport
where
    I: IntoIterator<Item = (f64, FlatSample)>,
{
    let mut branch = BranchState::new();
    let mut report = FeasibilityReport {
        feasible: true,
        duration: 0.0,
        dt,
        n_samples: 0,
        first_violation_time: None,
        first_violation_reason: None,
        margins: Margins {
            omega_min: f64::INFINITY,
            omega_max: f64::INFINITY,
            delta_max: f64::INFINITY,
        },
        negative_thrust_events: 0,
        transform_errors: 0,
        near_limit: false,
        peak_speed: 0.0,
        peak_load: 0.0,
        peak_rate: 0.0,
        samples: Vec::new(),
    };
    for (t, q) in samples {
        report.n_samples += 1;
        report.duration = report.duration.max(t);
        report.peak_speed = report.peak_speed.max(q.v.norm());
        report.peak_load = report.peak_load.max((q.a - Vector3::new(0.0, 0.0, p.g)).norm() / p.g);
        let verdict = match flat_to_full(&q, p, &mut branch) {
            Ok(full) => sample_verdict(t, &full, p, &mut report),
            Err(e) => {
                report.transform_errors += 1;
                branch = BranchState::new();
                SampleVerdict {
                    t,
                    feasible: false,
                    input: None,
                    negative_thrust: false,
                    reason: Some(format!("transform failed: {e}")),
                }
            }
        };
        if !verdict.feasible && report.feasible {
            report.feasible = false;
            report.first_violation_time = Some(t);
            report.first_violation_reason = verdict.reason.clone();
        }
        report.samples.push(verdict);
    }
    let m = &report.margins;
    let near = |margin: f64, limit: f64| margin >= 0.0 && margin < NEAR_LIMIT_FRACTION * limit;
    report.near_limit = near(m.omega_max, p.omega_max)
        || near(m.omega_min, p.omega_max - p.omega_min)
        || near(m.delta_max, p.delta_max);
    report
}

fn sample_verdict(
    t: f64,
    full: &FullStateInput,
    p: &VehicleParams,
    report: &mut FeasibilityReport,
) -> SampleVerdict {
    let u = full.input;
    report.peak_rate = report.peak_rate.max(full.omega.norm());
    let m = &mut report.margins;
    m.omega_min = m.omega_min.min(u.omega1.min(u.omega2) - p.omega_min);
    m.omega_max = m.omega_max.min(p.omega_max - u.omega1.max(u.omega2));
    m.delta_max = m.delta_max.min(p.delta_max - u.delta1.abs().max(u.delta2.abs()));
    if full.negative_thrust {
        report.negative_thrust_events += 1;
    }
    let reason = if full.negative_thrust {
        Some("negative motor thrust required".to_string())
    } else {
        input_violation(&u, p)
    };
    SampleVerdict {
        t,
        feasible: reason.is_none(),
        input: Some(u),
        negative_thrust: full.negative_thrust,
        reason,
    }
}

/// Samples the trajectory every `dt` seconds (plus the final time) and
/// checks the inputs.
pub fn check_trajectory(
    traj: &PiecewisePolynomialTrajectory,
    p: &VehicleParams,
    dt: f64,
) -> Result<FeasibilityReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let samples = traj
        .sample_times(dt)
        .into_iter()
        .map(|t| traj.sample(t).map(|q| (t, q)))
        .collect::<Result<Vec<_>>>()?;
    Ok(check_samples(samples, p, dt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub c_lo: f64,
    pub c_hi: f64,
    /// Ratio between consecutive grid points.
    pub factor: f64,
    /// Relative width at which bisection stops.
    pub rel_tol: f64,
    pub dt: f64,
    pub time: TimeConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            c_lo: 0.25,
            c_hi: 4.0,
            factor: 1.05,
            rel_tol: 1e-4,
            dt: DEFAULT_DT,
            time: TimeConfig::default(),
        }
    }
}

impl ScanConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.c_hi / self.c_lo).ln() / self.factor.ln()).floor() as i32;
        (0..=n).map(|i| self.c_lo * self.factor.powi(i)).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_lo > 0.0 && self.c_hi >= self.c_lo && self.factor > 1.0 && self.rel_tol > 0.0 && self.dt > 0.0) {
            return Err(Error::Domain(format!("invalid scan configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub c: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSearch {
    /// Smallest feasible scale found.
    pub c_star: f64,
    pub total_time: f64,
    /// Feasible already at the lower scan bound (the true minimum may be lower).
    pub at_lower_bound: bool,
    /// Durations at `c = 1`.
    pub base: TimeAllocation,
    pub profile: Vec<ScanPoint>,
}

/// Segment durations the recipe is scaled from: the fixed total if given,
/// otherwise the chord-based estimate, redistributed by the time optimizer.
pub fn base_allocation(recipe: &ManeuverRecipe, cfg: &TimeConfig) -> Result<TimeAllocation> {
    let total = match recipe.total_time {
        Some(t) => t,
        None => initial_time_estimate(&recipe.waypoints, cfg)?.total,
    };
    Ok(optimize_segment_times(&recipe.waypoints, total, recipe.mu_psi, cfg)?.allocation)
}

/// The recipe's minimum-snap trajectory on `base`, time-scaled by `c`.
///
/// Waypoint derivative constraints refer to `c = 1` and scale with the
/// trajectory (velocities by `1/c`), so the geometric path is the same for
/// every `c`. For direction-only and rest constraints this equals re-solving
/// with durations `c * base`.
pub fn solve_scaled(
    recipe: &ManeuverRecipe,
    base: &TimeAllocation,
    c: f64,
) -> Result<PiecewisePolynomialTrajectory> {
    let traj = MinSnapProblem::new(&recipe.waypoints, base, recipe.mu_psi)?.solve()?.0;
    traj.scaled(c)
}

fn feasible_at(traj: &PiecewisePolynomialTrajectory, c: f64, p: &VehicleParams, dt: f64) -> bool {
    traj.scaled(c)
        .and_then(|tr| check_trajectory(&tr, p, dt))
        .map_or(false, |r| r.feasible)
}

/// Smallest time scale `c` for which the scaled trajectory is feasible.
///
/// Feasibility need not be monotone in `c`, so a geometric grid is scanned
/// first; the first feasible grid point is then refined by bisection
/// against its infeasible neighbour.
pub fn min_feasible_scale(recipe: &ManeuverRecipe, p: &VehicleParams, cfg: &ScanConfig) -> Result<ScaleSearch> {
    cfg.validate()?;
    let base = base_allocation(recipe, &cfg.time)?;
    min_feasible_scale_from(recipe, &base, p, cfg)
}

pub fn min_feasible_scale_from(
    recipe: &ManeuverRecipe,
    base: &TimeAllocation,
    p: &VehicleParams,
    cfg: &ScanConfig,
) -> Result<ScaleSearch> {
    cfg.validate()?;
    let traj = solve_scaled(recipe, base, 1.0)?;
    let grid = cfg.grid();
    let profile: Vec<ScanPoint> = grid
        .par_iter()
        .map(|&c| ScanPoint { c, feasible: feasible_at(&traj, c, p, cfg.dt) })
        .collect();
    let first = profile.iter().position(|s| s.feasible).ok_or_else(|| Error::NothingFeasible {
        lo: cfg.c_lo,
        hi: cfg.c_hi,
        profile: profile.iter().map(|s| (s.c, s.feasible)).collect(),
    })?;
    let mut hi = profile[first].c;
    if first > 0 {
        let mut lo = profile[first - 1].c;
        while hi - lo > cfg.rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if feasible_at(&traj, mid, p, cfg.dt) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(ScaleSearch {
        c_star: hi,
        total_time: base.total() * hi,
        at_lower_bound: first == 0,
        base: base.clone(),
        profile,
    })
}

/// Feasible regions of a scan: maximal runs of consecutive feasible points.
pub fn feasible_runs(profile: &[ScanPoint]) -> Vec<(f64, f64)> {
    let mut runs = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for s in profile {
        match (s.feasible, start) {
            (true, None) => start = Some(s.c),
            (false, Some(a)) => {
                runs.push((a, last));
                start = None;
            }
            _ => {}
        }
        last = s.c;
    }
    if let Some(a) = start {
        runs.push((a, last));
    }
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub dist: f64,
    pub psi_start: Vec<f64>,
    pub psi_end: Vec<f64>,
    /// `times[i][j]` for `(psi_start[i], psi_end[j])`; NaN where nothing is feasible.
    pub times: Vec<Vec<f64>>,
}

pub fn yaw_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Minimum feasible time of a rest-to-rest flight over `dist` meters for
/// every start/end yaw pair, using the minimal yaw rotation.
pub fn hover_to_hover_heatmap(
    psi_start: &[f64],
    psi_end: &[f64],
    dist: f64,
    p: &VehicleParams,
    cfg: &ScanConfig,
) -> Result<Heatmap> {
    let cells: Vec<(usize, usize)> = (0..psi_start.len())
        .flat_map(|i| (0..psi_end.len()).map(move |j| (i, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let (s, e) = (psi_start[i], psi_end[j]);
            let r = hover_to_hover(dist, s, minimal_rotation_end(s, e))?;
            match min_feasible_scale(&r, p, cfg) {
                Ok(found) => Ok(found.total_time),
                Err(Error::NothingFeasible { .. }) => Ok(f64::NAN),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let times = values.chunks(psi_end.len().max(1)).map(|c| c.to_vec()).collect();
    Ok(Heatmap {
        dist,
        psi_start: psi_start.to_vec(),
        psi_end: psi_end.to_vec(),
        times,
    })
}

impl Heatmap {
    /// First row: end-yaw axis values; first column: start-yaw axis values.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# minimum feasible time [s], {} m hover to hover; rows psi_start [rad], columns psi_end [rad]",
            self.dist
        );
        let head: Vec<String> = self.psi_end.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "psi_start\\psi_end,{}", head.join(","));
        for (ps, row) in self.psi_start.iter().zip(&self.times) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{ps:?},{}", cells.join(","));
        }
        s
    }

    /// Index of the smallest finite entry.
    pub fn argmin(&self) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, row) in self.times.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_finite() && best.map_or(true, |(_, b)| *v < b) {
                    best = Some(((i, j), *v));
                }
            }
        }
        best.map(|(ij, _)| ij)
    }
}

/// Flat output on a horizontal circle of radius `r` flown at speed `v`,
/// at time `t` (starting at the origin heading along x, turning left).
pub fn circle_sample(r: f64, v: f64, mode: CircleMode, t: f64) -> FlatSample {
    use std::f64::consts::FRAC_PI_2;
    let w = v / r;
    let chi = -w * t;
    let e = Vector3::new(chi.cos(), chi.sin(), 0.0);
    let en = Vector3::new(-chi.sin(), chi.cos(), 0.0);
    let (psi, psi_d) = match mode {
        CircleMode::Coordinated => (chi, -w),
        CircleMode::KnifeEdge => (chi + FRAC_PI_2, -w),
        CircleMode::Rolling => (w * t, w),
    };
    FlatSample {
        x: r * Vector3::new((w * t).sin(), (w * t).cos() - 1.0, 0.0),
        v: v * e,
        a: -w * v * en,
        j: -w * w * v * e,
        s: w.powi(3) * v * en,
        psi,
        psi_d,
        psi_dd: 0.0,
    }
}

/// Samples per revolution never exceed this (slow circles would otherwise
/// need millions of samples at the default step).
pub const MAX_CIRCLE_SAMPLES: usize = 4000;

/// Checks one full revolution.
pub fn circle_check(r: f64, v: f64, mode: CircleMode, p: &VehicleParams, dt: f64) -> Result<FeasibilityReport> {
    if !(r > 0.0 && v >= 0.0 && r.is_finite() && v.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("circle needs r > 0, v >= 0, dt > 0; got {r}, {v}, {dt}")));
    }
    if v == 0.0 {
        return Ok(check_samples([(0.0, circle_sample(r, 0.0, mode, 0.0))], p, dt));
    }
    let period = 2.0 * std::f64::consts::PI * r / v;
    let n = ((period / dt).ceil() as usize).clamp(8, MAX_CIRCLE_SAMPLES);
    let h = period / n as f64;
    let samples = (0..=n).map(|i| {
        let t = i as f64 * h;
        (t, circle_sample(r, v, mode, t))
    });
    Ok(check_samples(samples, p, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleLimit {
    pub mode: CircleMode,
    pub radius: f64,
    /// Largest speed such that every scanned speed up to it is feasible.
    pub v_max: f64,
    /// `v_max` reached the scan ceiling.
    pub capped: bool,
}

/// Upper end of the first feasible speed interval starting from hover.
pub fn circle_max_speed(r: f64, mode: CircleMode, p: &VehicleParams, dt: f64) -> Result<CircleLimit> {
    let ok = |v: f64| circle_check(r, v, mode, p, dt).map(|rep| rep.feasible);
    let limit = |v_max, capped| CircleLimit { mode, radius: r, v_max, capped };
    if !ok(0.0)? {
        return Ok(limit(0.0, false));
    }
    let step = 0.1;
    let ceiling = 2.0 * knife_edge_speed_bound(r, p).max(10.0);
    let mut lo = 0.0;
    let mut hi = None;
    while lo < ceiling {
        let v = lo + step;
        if ok(v)? {
            lo = v;
        } else {
            hi = Some(v);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(limit(lo, true));
    };
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(limit(lo, false))
}

/// Circle speed limit from the collective thrust ceiling alone, ignoring
/// aerodynamics and gravity: `sqrt(2 c_t w_max^2 r / m)`.
pub fn knife_edge_speed_bound(r: f64, p: &VehicleParams) -> f64 {
    (2.0 * p.c_t * p.omega_max * p.omega_max * r / p.m).sqrt()
}
