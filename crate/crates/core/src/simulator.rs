//! Fixed-step RK4 integration of the equations of motion, driven open loop
//! by the inputs recovered from a flat trajectory.
//!
//! The open-loop plant is unstable, so transform correctness is judged by
//! short windows that restart from the reference state, and by the
//! pointwise residual between the model's accelerations and the
//! trajectory's.

use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatness::{flat_to_full, BranchState, FlatSample};
use crate::minsnap::PiecewisePolynomialTrajectory;
use crate::vehicle::{state_derivative, ControlInput, ModelMode, VehicleParams, VehicleState};

/// Position magnitude at which integration is abandoned [m].
pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Largest integration step [s]; the actual step divides the duration evenly.
    pub step: f64,
    pub mode: ModelMode,
    /// Window length for the windowed round trip [s].
    pub window: f64,
    /// Record every n-th step in the trace.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            mode: ModelMode::FlatnessConsistent,
            window: 0.5,
            record_every: 10,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite() && self.window >= self.step && self.record_every > 0) {
            return Err(Error::Domain(format!("invalid simulation config {self:?}")));
        }
        Ok(())
    }
}

/// Reference state, input and accelerations on the half-step grid.
#[derive(Debug, Clone)]
struct Reference {
    h: f64,
    n_steps: usize,
    flat: Vec<FlatSample>,
    state: Vec<VehicleState>,
    input: Vec<ControlInput>,
    omega_dot: Vec<Vector3<f64>>,
}

impl Reference {
    fn build(traj: &PiecewisePolynomialTrajectory, p: &VehicleParams, step: f64) -> Result<Self> {
        let duration = traj.duration();
        let n_steps = ((duration / step).ceil() as usize).max(1);
        let h = duration / n_steps as f64;
        let mut branch = BranchState::new();
        let n = 2 * n_steps + 1;
        let mut r = Self {
            h,
            n_steps,
            flat: Vec::with_capacity(n),
            state: Vec::with_capacity(n),
            input: Vec::with_capacity(n),
            omega_dot: Vec::with_capacity(n),
        };
        for i in 0..n {
            let t = if i == n - 1 { duration } else { i as f64 * 0.5 * h };
            let q = traj.sample(t)?;
            let full = flat_to_full(&q, p, &mut branch)?;
            r.state.push(full.state(&q));
            r.input.push(full.input);
            r.omega_dot.push(full.omega_dot);
            r.flat.push(q);
        }
        Ok(r)
    }

    fn time(&self, step: usize) -> f64 {
        step as f64 * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub state: VehicleState,
    pub input: ControlInput,
    /// `|v_dot(model) - a(flat)|` at the reference state.
    pub res_trans: f64,
    /// `|omega_dot(model) - omega_dot(flat)|` at the reference state.
    pub res_rot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub step: f64,
    pub mode: ModelMode,
    pub rows: Vec<TraceRow>,
    /// Largest `| |q| - 1 |` removed by renormalization.
    pub max_quaternion_drift: f64,
    /// Time at which the position left the divergence limit, if it did.
    pub diverged_at: Option<f64>,
}

fn add(s: &VehicleState, d: &Deriv, h: f64) -> VehicleState {
    VehicleState {
        x: s.x + d.x * h,
        v: s.v + d.v * h,
        // Unnormalized on purpose inside a step; renormalized after.
        xi: UnitQuaternion::new_unchecked(s.xi.into_inner() + d.q * h),
        omega: s.omega + d.w * h,
    }
}

#[derive(Debug, Clone, Copy)]
struct Deriv {
    x: Vector3<f64>,
    v: Vector3<f64>,
    q: Quaternion<f64>,
    w: Vector3<f64>,
}

fn deriv(s: &VehicleState, u: &ControlInput, p: &VehicleParams, mode: ModelMode) -> Result<Deriv> {
    // Stage states are slightly off the unit sphere; evaluate the
    // dynamics on the normalized attitude and keep the raw kinematics.
    let unit = VehicleState {
        xi: UnitQuaternion::new_normalize(s.xi.into_inner()),
        ..*s
    };
    let d = state_derivative(&unit, u, p, mode)?;
    Ok(Deriv {
        x: d.x_dot,
        v: d.v_dot,
        q: s.xi.into_inner() * Quaternion::from_parts(0.0, s.omega) * 0.5,
        w: d.omega_dot,
    })
}

/// One RK4 step from reference index `i` (half-step grid) with inputs held
/// at the grid values for the start, midpoint and end.
fn rk4(
    s: &VehicleState,
    r: &Reference,
    k: usize,
    p: &VehicleParams,
    mode: ModelMode,
) -> Result<(VehicleState, f64)> {
    let h = r.h;
    let (u0, um, u1) = (&r.input[2 * k], &r.input[2 * k + 1], &r.input[2 * k + 2]);
    let k1 = deriv(s, u0, p, mode)?;
    let k2 = deriv(&add(s, &k1, 0.5 * h), um, p, mode)?;
    let k3 = deriv(&add(s, &k2, 0.5 * h), um, p, mode)?;
    let k4 = deriv(&add(s, &k3, h), u1, p, mode)?;
    let comb = |a: Vector3<f64>, b, c, d| (a + b * 2.0 + c * 2.0 + d) * (h / 6.0);
    let q = s.xi.into_inner() + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (h / 6.0);
    let drift = (q.norm() - 1.0).abs();
    Ok((
        VehicleState {
            x: s.x + comb(k1.x, k2.x, k3.x, k4.x),
            v: s.v + comb(k1.v, k2.v, k3.v, k4.v),
            xi: UnitQuaternion::new_normalize(q),
            omega: s.omega + comb(k1.w, k2.w, k3.w, k4.w),
        },
        drift,
    ))
}

/// Residuals of the model at the reference state of half-grid index `i`.
fn residual(r: &Reference, i: usize, p: &VehicleParams, mode: ModelMode) -> Result<(f64, f64)> {
    let d = state_derivative(&r.state[i], &r.input[i], p, mode)?;
    Ok(((d.v_dot - r.flat[i].a).norm(), (d.omega_dot - r.omega_dot[i]).norm()))
}

/// Integrates the whole trajectory from its initial reference state.
pub fn integrate_open_loop(
    traj: &PiecewisePolynomialTrajectory,
    p: &VehicleParams,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate()?;
    let r = Reference::build(traj, p, cfg.step)?;
    let mut trace = SimTrace {
        step: r.h,
        mode: cfg.mode,
        rows: Vec::new(),
        max_quaternion_drift: 0.0,
        diverged_at: None,
    };
    let mut s = r.state[0];
    for k in 0..=r.n_steps {
        if k % cfg.record_every == 0 || k == r.n_steps {
            let (res_trans, res_rot) = residual(&r, 2 * k, p, cfg.mode)?;
            trace.rows.push(TraceRow {
                t: r.time(k),
                state: s,
                input: r.input[2 * k],
                res_trans,
                res_rot,
            });
        }
        if k == r.n_steps {
            break;
        }
        let (next, drift) = rk4(&s, &r, k, p, cfg.mode)?;
        trace.max_quaternion_drift = trace.max_quaternion_drift.max(drift);
        s = next;
        if !(s.x.norm() <= DIVERGENCE_LIMIT) {
            trace.diverged_at = Some(r.time(k + 1));
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub t0: f64,
    pub t1: f64,
    /// Largest position error in the window [m].
    pub position: f64,
    /// Largest attitude error angle in the window [rad].
    pub attitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedErrors {
    pub step: f64,
    pub window: f64,
    pub windows: Vec<WindowError>,
    pub max_position: f64,
    pub max_attitude: f64,
}

/// Restarts from the reference state at the start of every window and
/// records the largest deviation inside each window.
pub fn windowed_round_trip(
    traj: &PiecewisePolynomialTrajectory,
    p: &VehicleParams,
    cfg: &SimConfig,
) -> Result<WindowedErrors> {
    cfg.validate()?;
    let r = Reference::build(traj, p, cfg.step)?;
    let per_window = ((cfg.window / r.h).round() as usize).max(1);
    let mut windows = Vec::new();
    let mut k0 = 0;
    while k0 < r.n_steps {
        let k1 = (k0 + per_window).min(r.n_steps);
        let mut s = r.state[2 * k0];
        let mut w = WindowError { t0: r.time(k0), t1: r.time(k1), position: 0.0, attitude: 0.0 };
        for k in k0..k1 {
            s = rk4(&s, &r, k, p, cfg.mode)?.0;
            let reference = &r.state[2 * (k + 1)];
            w.position = w.position.max((s.x - reference.x).norm());
            w.attitude = w.attitude.max(s.xi.angle_to(&reference.xi));
            if !(s.x.norm() <= DIVERGENCE_LIMIT) {
                break;
            }
        }
        windows.push(w);
        k0 = k1;
    }
    let max_position = windows.iter().map(|w| w.position).fold(0.0, f64::max);
    let max_attitude = windows.iter().map(|w| w.attitude).fold(0.0, f64::max);
    Ok(WindowedErrors { step: r.h, window: cfg.window, windows, max_position, max_attitude })
}

/// Reference and tracking metrics in the layout of the maneuver table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub max_position_error: f64,
    pub rms_position_error: f64,
    /// Reference maxima.
    pub max_speed: f64,
    pub max_load_g: f64,
    pub max_rate_deg_s: f64,
}

pub fn tracking_metrics(
    trace: &SimTrace,
    traj: &PiecewisePolynomialTrajectory,
    p: &VehicleParams,
) -> Result<TrackingMetrics> {
    if trace.rows.is_empty() {
        return Err(Error::MisalignedGrids("empty trace".into()));
    }
    let mut branch = BranchState::new();
    let mut m = TrackingMetrics {
        max_position_error: 0.0,
        rms_position_error: 0.0,
        max_speed: 0.0,
        max_load_g: 0.0,
        max_rate_deg_s: 0.0,
    };
    let mut sq = 0.0;
    for row in &trace.rows {
        let q = traj.sample(row.t).map_err(|_| {
            Error::MisalignedGrids(format!("trace time {} outside trajectory [0, {}]", row.t, traj.duration()))
        })?;
        let full = flat_to_full(&q, p, &mut branch)?;
        let e = (q.x - row.state.x).norm();
        m.max_position_error = m.max_position_error.max(e);
        sq += e * e;
        m.max_speed = m.max_speed.max(q.v.norm());
        m.max_load_g = m.max_load_g.max((q.a - Vector3::new(0.0, 0.0, p.g)).norm() / p.g);
        m.max_rate_deg_s = m.max_rate_deg_s.max(full.omega.norm().to_degrees());
    }
    m.rms_position_error = (sq / trace.rows.len() as f64).sqrt();
    Ok(m)
}

pub const TRACE_HEADER: &str =
    "t,x,y,z,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,omega1,omega2,delta1,delta2,res_trans,res_rot";

impl SimTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let q = r.state.xi.into_inner();
            let v = [
                r.t, r.state.x.x, r.state.x.y, r.state.x.z, r.state.v.x, r.state.v.y, r.state.v.z,
                q.w, q.i, q.j, q.k, r.state.omega.x, r.state.omega.y, r.state.omega.z,
                r.input.omega1, r.input.omega2, r.input.delta1, r.input.delta2, r.res_trans, r.res_rot,
            ];
            let cells: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Residual oracle at one flat sample: returns the translational and
/// rotational mismatch between the model (at the transform's state and
/// inputs) and the flat trajectory.
pub fn eom_residual(
    q: &FlatSample,
    p: &VehicleParams,
    branch: &mut BranchState,
    mode: ModelMode,
) -> Result<(f64, f64)> {
    let full = flat_to_full(q, p, branch)?;
    let d = state_derivative(&full.state(q), &full.input, p, mode)?;
    Ok(((d.v_dot - q.a).norm(), (d.omega_dot - full.omega_dot).norm()))
}
