//! Closed-form minimum-snap trajectories over the flat output `(x, psi)`.
//!
//! Every segment carries a degree-9 polynomial per channel in normalized
//! time `tau = (t - t_i) / T_i`. Node derivatives (orders 0 through 4) are
//! shared between adjacent segments, so position and yaw are C4 at every
//! junction. Unconstrained node derivatives are the free variables of an
//! unconstrained quadratic program which is solved by a Cholesky factorization.
//!
//! Node derivatives are scaled by `tc^k` with `tc` the mean segment
//! duration so that the reduced Hessian stays well conditioned.

mod basis;
mod time;

use std::path::Path;

use nalgebra::{DMatrix, DVector, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatness::FlatSample;

pub use basis::{eval_derivs, Coeffs, DEGREE, N_COEFFS, N_DERIVS};
pub use time::{
    initial_time_estimate, optimize_segment_times, TimeConfig, TimeEstimate, TimeOptimization,
};

use basis::{basis, coeffs_from_nodes, derivative_energy, Mat10};

/// Default yaw weight in the objective.
pub const DEFAULT_MU_PSI: f64 = 1.0;
/// Tolerance on the norm of direction constraints.
pub const DIRECTION_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityConstraint {
    #[default]
    Free,
    Fixed { value: Vector3<f64> },
    /// Velocity parallel to a unit vector, magnitude (and sign) free.
    Direction { unit: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    /// Unwrapped yaw [rad].
    pub yaw: f64,
    #[serde(default)]
    pub velocity: VelocityConstraint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<Vector3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jerk: Option<Vector3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snap: Option<Vector3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_acceleration: Option<f64>,
}

impl Waypoint {
    /// Position and yaw only.
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            yaw,
            velocity: VelocityConstraint::Free,
            acceleration: None,
            jerk: None,
            snap: None,
            yaw_rate: None,
            yaw_acceleration: None,
        }
    }

    /// Static hover: zero velocity through snap, zero yaw rate and acceleration.
    pub fn rest(position: Vector3<f64>, yaw: f64) -> Self {
        let z = Some(Vector3::zeros());
        Self {
            velocity: VelocityConstraint::Fixed { value: Vector3::zeros() },
            acceleration: z,
            jerk: z,
            snap: z,
            yaw_rate: Some(0.0),
            yaw_acceleration: Some(0.0),
            ..Self::new(position, yaw)
        }
    }

    pub fn with_velocity(mut self, v: Vector3<f64>) -> Self {
        self.velocity = VelocityConstraint::Fixed { value: v };
        self
    }

    /// Direction-only velocity constraint; `d` is normalized here.
    pub fn with_direction(mut self, d: Vector3<f64>) -> Self {
        self.velocity = VelocityConstraint::Direction { unit: d.normalize() };
        self
    }

    pub fn with_acceleration(mut self, a: Vector3<f64>) -> Self {
        self.acceleration = Some(a);
        self
    }

    pub fn with_yaw_rate(mut self, r: f64) -> Self {
        self.yaw_rate = Some(r);
        self
    }

    pub fn is_rest(&self) -> bool {
        let zero = |o: &Option<Vector3<f64>>| o.map_or(false, |v| v == Vector3::zeros());
        matches!(self.velocity, VelocityConstraint::Fixed { value } if value == Vector3::zeros())
            && zero(&self.acceleration)
            && zero(&self.jerk)
            && zero(&self.snap)
            && self.yaw_rate == Some(0.0)
            && self.yaw_acceleration == Some(0.0)
    }

    fn validate(&self, i: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWaypoints(format!("waypoint {i}: {m}")));
        let vecs = [Some(self.position), self.acceleration, self.jerk, self.snap];
        let finite = vecs.iter().flatten().all(|v| v.iter().all(|c| c.is_finite()))
            && self.yaw.is_finite()
            && self.yaw_rate.map_or(true, f64::is_finite)
            && self.yaw_acceleration.map_or(true, f64::is_finite);
        if !finite {
            return bad("non-finite value".into());
        }
        match self.velocity {
            VelocityConstraint::Fixed { value } if !value.iter().all(|c| c.is_finite()) => {
                bad("non-finite velocity".into())
            }
            VelocityConstraint::Direction { unit } if (unit.norm() - 1.0).abs() > DIRECTION_NORM_TOL => {
                bad(format!("direction has norm {}", unit.norm()))
            }
            _ => Ok(()),
        }
    }
}

/// Segment durations [s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeAllocation(Vec<f64>);

impl TimeAllocation {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidTimeAllocation("no segments".into()));
        }
        if let Some(bad) = t.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidTimeAllocation(format!(
                "durations must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(t))
    }

    pub fn durations(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Every duration multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|t| t * c).collect())
    }
}

/// One polynomial piece; coefficients are in normalized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub x: Coeffs,
    pub y: Coeffs,
    pub z: Coeffs,
    pub psi: Coeffs,
}

impl Segment {
    fn channels(&self) -> [&Coeffs; 4] {
        [&self.x, &self.y, &self.z, &self.psi]
    }

    /// Flat sample at normalized time `tau`.
    pub fn sample(&self, tau: f64) -> FlatSample {
        let inv = 1.0 / self.duration;
        let scale = [1.0, inv, inv * inv, inv.powi(3), inv.powi(4)];
        let d = self.channels().map(|c| {
            let mut e = eval_derivs(c, tau);
            for (k, v) in e.iter_mut().enumerate() {
                *v *= scale[k];
            }
            e
        });
        let v3 = |k: usize| Vector3::new(d[0][k], d[1][k], d[2][k]);
        FlatSample {
            x: v3(0),
            v: v3(1),
            a: v3(2),
            j: v3(3),
            s: v3(4),
            psi: d[3][0],
            psi_d: d[3][1],
            psi_dd: d[3][2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewisePolynomialTrajectory {
    segments: Vec<Segment>,
    boundaries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTrajectory {
    segments: Vec<Segment>,
    boundaries: Vec<f64>,
}

impl<'de> Deserialize<'de> for PiecewisePolynomialTrajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTrajectory::deserialize(d)?;
        Self::from_parts(raw.segments, raw.boundaries).map_err(serde::de::Error::custom)
    }
}

impl PiecewisePolynomialTrajectory {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let mut boundaries = Vec::with_capacity(segments.len() + 1);
        let mut t = 0.0;
        boundaries.push(t);
        for s in &segments {
            t += s.duration;
            boundaries.push(t);
        }
        Self::from_parts(segments, boundaries)
    }

    fn from_parts(segments: Vec<Segment>, boundaries: Vec<f64>) -> Result<Self> {
        if segments.is_empty() || boundaries.len() != segments.len() + 1 {
            return Err(Error::Format(format!(
                "{} segments need {} boundary times, got {}",
                segments.len(),
                segments.len() + 1,
                boundaries.len()
            )));
        }
        TimeAllocation::new(segments.iter().map(|s| s.duration).collect())?;
        if boundaries[0] != 0.0 || boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("boundary times must start at 0 and increase".into()));
        }
        let finite = segments
            .iter()
            .all(|s| s.channels().iter().all(|c| c.iter().all(|v| v.is_finite())));
        if !finite {
            return Err(Error::Format("non-finite coefficient".into()));
        }
        Ok(Self { segments, boundaries })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn duration(&self) -> f64 {
        *self.boundaries.last().expect("at least one segment")
    }

    pub fn allocation(&self) -> TimeAllocation {
        TimeAllocation(self.segments.iter().map(|s| s.duration).collect())
    }

    /// Flat output and derivatives at `t` in `[0, duration]`.
    pub fn sample(&self, t: f64) -> Result<FlatSample> {
        let end = self.duration();
        if !(0.0..=end).contains(&t) {
            return Err(Error::TimeOutOfRange { time: t, duration: end });
        }
        let i = self.boundaries[1..].partition_point(|b| *b <= t).min(self.segments.len() - 1);
        let seg = &self.segments[i];
        let tau = ((t - self.boundaries[i]) / seg.duration).clamp(0.0, 1.0);
        Ok(seg.sample(tau))
    }

    /// Uniform grid `0, dt, 2 dt, ...` closed with the final time.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let end = self.duration();
        let n = (end / dt + 1e-9).floor() as usize;
        let mut ts: Vec<f64> = (0..=n).map(|i| i as f64 * dt).filter(|t| *t <= end).collect();
        if end - ts.last().copied().unwrap_or(0.0) > 1e-9 * end.max(1.0) {
            ts.push(end);
        }
        ts
    }

    /// `integral |x''''|^2 + mu_psi * psi''^2 dt`.
    pub fn snap_cost(&self, mu_psi: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let pos: f64 = [&s.x, &s.y, &s.z].iter().map(|c| derivative_energy(c, 4)).sum();
                pos * s.duration.powi(-7) + mu_psi * derivative_energy(&s.psi, 2) * s.duration.powi(-3)
            })
            .sum()
    }

    /// Same path with every duration multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("time scale must be positive, got {c}")));
        }
        let segs = self
            .segments
            .iter()
            .map(|s| Segment { duration: s.duration * c, ..s.clone() })
            .collect();
        Self::from_segments(segs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("trajectory json: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn solve_min_snap(
    wps: &[Waypoint],
    t: &TimeAllocation,
    mu_psi: f64,
) -> Result<PiecewisePolynomialTrajectory> {
    MinSnapProblem::new(wps, t, mu_psi)?.solve().map(|(traj, _)| traj)
}

pub fn scale_time(traj: &PiecewisePolynomialTrajectory, c: f64) -> Result<PiecewisePolynomialTrajectory> {
    traj.scaled(c)
}

pub fn sample_flat(traj: &PiecewisePolynomialTrajectory, time: f64) -> Result<FlatSample> {
    traj.sample(time)
}

/// Node derivatives written as `d = B z + d0`, with `z` the free variables.
#[derive(Debug, Clone)]
struct Channel {
    h: DMatrix<f64>,
    b: DMatrix<f64>,
    d0: DVector<f64>,
}

impl Channel {
    fn reduced(&self) -> (DMatrix<f64>, DVector<f64>) {
        let hb = &self.h * &self.b;
        let hr = self.b.transpose() * &hb;
        let rhs = -(self.b.transpose() * (&self.h * &self.d0));
        (hr, rhs)
    }

    fn optimum(&self, what: &str) -> Result<DVector<f64>> {
        if self.b.ncols() == 0 {
            return Ok(DVector::zeros(0));
        }
        let (hr, rhs) = self.reduced();
        let chol = hr
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularConstraints(format!("{what}: reduced Hessian not positive definite")))?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
        if !(lo > 0.0) || (lo / hi).powi(2) < 1e-14 {
            return Err(Error::SingularConstraints(format!(
                "{what}: reduced Hessian is numerically singular"
            )));
        }
        Ok(chol.solve(&rhs))
    }

    fn nodes(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.b * z + &self.d0
    }

    fn cost(&self, z: &DVector<f64>) -> f64 {
        let d = self.nodes(z);
        d.dot(&(&self.h * &d))
    }
}

/// Minimum-snap problem for fixed waypoints and segment durations.
///
/// Exposes the free-variable parameterization (scaled units) so that
/// optimality can be probed directly.
#[derive(Debug, Clone)]
pub struct MinSnapProblem {
    durations: Vec<f64>,
    tc: f64,
    mu_psi: f64,
    n_nodes: usize,
    pos: Channel,
    yaw: Channel,
}

fn segment_block(g: &Mat10, rho: f64, power: i32) -> Mat10 {
    let s = SVector::<f64, N_COEFFS>::from_fn(|i, _| rho.powi((i % N_DERIVS) as i32));
    let sd = Mat10::from_diagonal(&s);
    sd * g * sd * rho.powi(-power)
}

impl MinSnapProblem {
    pub fn new(wps: &[Waypoint], t: &TimeAllocation, mu_psi: f64) -> Result<Self> {
        if wps.len() < 2 {
            return Err(Error::InvalidWaypoints(format!("need at least 2 waypoints, got {}", wps.len())));
        }
        if t.len() != wps.len() - 1 {
            return Err(Error::InvalidTimeAllocation(format!(
                "{} waypoints need {} durations, got {}",
                wps.len(),
                wps.len() - 1,
                t.len()
            )));
        }
        if !(mu_psi.is_finite() && mu_psi >= 0.0) {
            return Err(Error::Domain(format!("yaw weight must be nonnegative, got {mu_psi}")));
        }
        for (i, w) in wps.iter().enumerate() {
            w.validate(i)?;
        }
        let durations = t.durations().to_vec();
        let tc = t.total() / t.len() as f64;
        let n_nodes = wps.len();
        let bs = basis();

        let n_pos = 3 * n_nodes * N_DERIVS;
        let pidx = |c: usize, node: usize, k: usize| (c * n_nodes + node) * N_DERIVS + k;
        let mut h = DMatrix::zeros(n_pos, n_pos);
        let mut hy = DMatrix::zeros(n_nodes * N_DERIVS, n_nodes * N_DERIVS);
        for (s, dur) in durations.iter().enumerate() {
            let rho = dur / tc;
            let blk = segment_block(&bs.snap_cost, rho, 7);
            let blk_y = segment_block(&bs.accel_cost, rho, 3);
            let local = |i: usize| (s + i / N_DERIVS, i % N_DERIVS);
            for i in 0..N_COEFFS {
                for j in 0..N_COEFFS {
                    let ((ni, ki), (nj, kj)) = (local(i), local(j));
                    for c in 0..3 {
                        h[(pidx(c, ni, ki), pidx(c, nj, kj))] += blk[(i, j)];
                    }
                    hy[(ni * N_DERIVS + ki, nj * N_DERIVS + kj)] += blk_y[(i, j)];
                }
            }
        }

        let mut d0 = DVector::zeros(n_pos);
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        for (node, w) in wps.iter().enumerate() {
            for c in 0..3 {
                d0[pidx(c, node, 0)] = w.position[c];
            }
            match w.velocity {
                VelocityConstraint::Fixed { value } => {
                    for c in 0..3 {
                        d0[pidx(c, node, 1)] = value[c] * tc;
                    }
                }
                VelocityConstraint::Direction { unit } => {
                    cols.push((0..3).map(|c| (pidx(c, node, 1), unit[c])).collect());
                }
                VelocityConstraint::Free => {
                    cols.extend((0..3).map(|c| vec![(pidx(c, node, 1), 1.0)]));
                }
            }
            for (k, fixed) in [(2, w.acceleration), (3, w.jerk), (4, w.snap)] {
                match fixed {
                    Some(val) => {
                        for c in 0..3 {
                            d0[pidx(c, node, k)] = val[c] * tc.powi(k as i32);
                        }
                    }
                    None => cols.extend((0..3).map(|c| vec![(pidx(c, node, k), 1.0)])),
                }
            }
        }
        let pos = Channel { h, b: selection(n_pos, &cols), d0 };

        let n_yaw = n_nodes * N_DERIVS;
        let mut d0 = DVector::zeros(n_yaw);
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        for (node, w) in wps.iter().enumerate() {
            let base = node * N_DERIVS;
            d0[base] = w.yaw;
            for (k, fixed) in [(1, w.yaw_rate), (2, w.yaw_acceleration), (3, None), (4, None)] {
                match fixed {
                    Some(val) => d0[base + k] = val * tc.powi(k as i32),
                    None => cols.push(vec![(base + k, 1.0)]),
                }
            }
        }
        let yaw = Channel { h: hy, b: selection(n_yaw, &cols), d0 };

        Ok(Self { durations, tc, mu_psi, n_nodes, pos, yaw })
    }

    /// Number of free position variables followed by free yaw variables.
    pub fn n_free(&self) -> (usize, usize) {
        (self.pos.b.ncols(), self.yaw.b.ncols())
    }

    /// Minimizer of the objective over the free variables (position, yaw).
    ///
    /// The yaw channel is decoupled from position; its minimizer does not
    /// depend on `mu_psi` and is computed with unit weight, so `mu_psi = 0`
    /// still yields a well-defined yaw profile.
    pub fn optimal_free(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((self.pos.optimum("position")?, self.yaw.optimum("yaw")?))
    }

    /// Objective in physical units at the given free variables.
    pub fn cost_at(&self, z_pos: &DVector<f64>, z_yaw: &DVector<f64>) -> f64 {
        self.pos.cost(z_pos) * self.tc.powi(-7) + self.mu_psi * self.yaw.cost(z_yaw) * self.tc.powi(-3)
    }

    pub fn trajectory_at(
        &self,
        z_pos: &DVector<f64>,
        z_yaw: &DVector<f64>,
    ) -> Result<PiecewisePolynomialTrajectory> {
        let dp = self.pos.nodes(z_pos);
        let dy = self.yaw.nodes(z_yaw);
        let n = self.n_nodes;
        let segs = self
            .durations
            .iter()
            .enumerate()
            .map(|(s, dur)| {
                let rho = dur / self.tc;
                let local = |src: &DVector<f64>, off: usize| {
                    let v = SVector::<f64, N_COEFFS>::from_fn(|i, _| {
                        let node = s + i / N_DERIVS;
                        let k = i % N_DERIVS;
                        src[off + node * N_DERIVS + k] * rho.powi(k as i32)
                    });
                    coeffs_from_nodes(&v)
                };
                let stride = n * N_DERIVS;
                Segment {
                    duration: *dur,
                    x: local(&dp, 0),
                    y: local(&dp, stride),
                    z: local(&dp, 2 * stride),
                    psi: local(&dy, 0),
                }
            })
            .collect();
        PiecewisePolynomialTrajectory::from_segments(segs)
    }

    /// Optimal trajectory and its cost.
    pub fn solve(&self) -> Result<(PiecewisePolynomialTrajectory, f64)> {
        let (zp, zy) = self.optimal_free()?;
        Ok((self.trajectory_at(&zp, &zy)?, self.cost_at(&zp, &zy)))
    }
}

fn selection(n: usize, cols: &[Vec<(usize, f64)>]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            b[(i, j)] = v;
        }
    }
    b
}

/// Trajectory export with every derivative, one row per sample.
pub const CSV_HEADER: &str = "t,x,y,z,psi,vx,vy,vz,psi_d,ax,ay,az,jx,jy,jz,sx,sy,sz,psi_dd";

pub fn to_csv(traj: &PiecewisePolynomialTrajectory, dt: f64) -> Result<String> {
    use std::fmt::Write as _;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("sample step must be positive, got {dt}")));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in traj.sample_times(dt) {
        let q = traj.sample(t)?;
        let row = [
            t, q.x.x, q.x.y, q.x.z, q.psi, q.v.x, q.v.y, q.v.z, q.psi_d, q.a.x, q.a.y, q.a.z,
            q.j.x, q.j.y, q.j.z, q.s.x, q.s.y, q.s.z, q.psi_dd,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest_to_rest(d: f64, t: f64) -> PiecewisePolynomialTrajectory {
        let wps = [
            Waypoint::rest(Vector3::zeros(), 0.0),
            Waypoint::rest(Vector3::new(d, 0.0, 0.0), 0.0),
        ];
        solve_min_snap(&wps, &TimeAllocation::new(vec![t]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn rest_to_rest_boundaries() {
        let tr = rest_to_rest(6.0, 2.0);
        let q0 = tr.sample(0.0).unwrap();
        let q1 = tr.sample(2.0).unwrap();
        assert!(q0.v.norm() + q0.a.norm() + q0.j.norm() < 1e-12);
        assert!((q1.x - Vector3::new(6.0, 0.0, 0.0)).norm() < 1e-9);
        assert!(tr.sample(2.0 + 1e-6).is_err());
        assert!(tr.sample(-1e-9).is_err());
    }

    #[test]
    fn identical_waypoints_give_constant() {
        let p = Vector3::new(1.0, 2.0, -3.0);
        let wps = vec![Waypoint::rest(p, 0.5); 3];
        let tr = solve_min_snap(&wps, &TimeAllocation::new(vec![1.0, 0.7]).unwrap(), 1.0).unwrap();
        assert!(tr.snap_cost(1.0).abs() < 1e-20);
        for t in [0.0, 0.4, 1.0, 1.6] {
            let q = tr.sample(t).unwrap();
            assert!((q.x - p).norm() < 1e-12 && (q.psi - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = Waypoint::rest(Vector3::zeros(), 0.0);
        let t1 = TimeAllocation::new(vec![1.0]).unwrap();
        assert!(solve_min_snap(&[w.clone()], &t1, 1.0).is_err());
        assert!(solve_min_snap(&[w.clone(), w.clone(), w.clone()], &t1, 1.0).is_err());
        assert!(TimeAllocation::new(vec![1.0, 0.0]).is_err());
        let mut d = Waypoint::new(Vector3::x(), 0.0);
        d.velocity = VelocityConstraint::Direction { unit: Vector3::new(1.0, 1.0, 0.0) };
        assert!(matches!(
            solve_min_snap(&[w.clone(), d, w], &TimeAllocation::new(vec![1.0, 1.0]).unwrap(), 1.0),
            Err(Error::InvalidWaypoints(_))
        ));
    }

    #[test]
    fn underdetermined_problem_is_singular() {
        let wps = [Waypoint::new(Vector3::zeros(), 0.0), Waypoint::new(Vector3::x(), 0.0)];
        let r = solve_min_snap(&wps, &TimeAllocation::new(vec![1.0]).unwrap(), 1.0);
        assert!(matches!(r, Err(Error::SingularConstraints(_))));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let wps = [
            Waypoint::rest(Vector3::zeros(), 0.0),
            Waypoint::new(Vector3::new(1.0, 1.0, -0.5), 0.3).with_direction(Vector3::new(1.0, 2.0, 0.0)),
            Waypoint::rest(Vector3::new(2.0, 0.0, 0.0), 1.0),
        ];
        let tr = solve_min_snap(&wps, &TimeAllocation::new(vec![0.9, 1.3]).unwrap(), 1.0).unwrap();
        let back = PiecewisePolynomialTrajectory::from_json(&tr.to_json()).unwrap();
        assert_eq!(tr, back);
    }

    #[test]
    fn csv_layout() {
        let tr = rest_to_rest(1.0, 1.0);
        let csv = to_csv(&tr, 0.25).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().all(|l| l.split(',').count() == 19));
        assert!(lines[5].starts_with("1.0,"));
    }

    #[test]
    fn sample_times_close_with_end() {
        let tr = rest_to_rest(1.0, 1.01);
        let ts = tr.sample_times(0.25);
        assert_eq!(ts.len(), 6);
        assert_eq!(*ts.last().unwrap(), 1.01);
    }
}
