//! Tailsitter flying-wing force/moment model and 6DOF equations of motion.
//!
//! Frame conventions used throughout the crate:
//!
//! * World frame `i`: x north, y east, z **down**. Gravity is `+g i_z`.
//! * Body frame `b`: x along the thrust line, y along the right wing.
//!   Attitude is the body-to-world rotation `R^i_b`, stored as a unit
//!   quaternion `xi` (nalgebra convention, `R(xi) v_b = v_i`).
//! * Zero-lift frame `alpha`: the body frame rotated by `-alpha0` about body
//!   y, so `R^b_alpha = rot_y(-alpha0)` and `R^i_alpha = R^i_b rot_y(-alpha0)`.
//! * Flaps: positive deflection produces force along `-z` of the zero-lift
//!   frame when the flap is in propeller wash (trailing edge down).
//! * Motor 1 is the left motor (negative body y); it produces torque
//!   `+c_mu w1^2` about the thrust axis, motor 2 produces `-c_mu w2^2`.
//!
//! The model has no lateral force; moments due to freestream velocity and
//! angular rate are not modelled.

mod params;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::rot_y;

pub use params::VehicleParams;

/// Regularization of the speed norm: `|v|_eps = sqrt(v.v + eps^2)`.
pub const SPEED_EPS: f64 = 1e-6;

/// Smoothed speed used by every aerodynamic term.
pub fn smoothed_speed(v: &Vector3<f64>) -> f64 {
    (v.norm_squared() + SPEED_EPS * SPEED_EPS).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Position, world frame [m].
    pub x: Vector3<f64>,
    /// Velocity, world frame [m/s].
    pub v: Vector3<f64>,
    /// Body-to-world attitude.
    pub xi: UnitQuaternion<f64>,
    /// Angular velocity, body frame [rad/s].
    pub omega: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub x_dot: Vector3<f64>,
    pub v_dot: Vector3<f64>,
    pub xi_dot: Quaternion<f64>,
    pub omega_dot: Vector3<f64>,
}

/// Motor speeds and flap deflections. Membership in the admissible input set
/// is checked separately, so out-of-range values are representable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// Force in the zero-lift frame and moment in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyWrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorForces {
    pub t1: f64,
    pub t2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

/// Which terms of the force/moment model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelMode {
    /// Drops the direct flap force and the flap yaw moment, exactly the terms
    /// the flatness transform neglects.
    FlatnessConsistent,
    /// Every modelled term.
    Full,
}

impl ModelMode {
    fn flap_force(self) -> bool {
        matches!(self, ModelMode::Full)
    }
    fn flap_yaw_moment(self) -> bool {
        matches!(self, ModelMode::Full)
    }
}

pub fn motor_forces(omega1: f64, omega2: f64, p: &VehicleParams) -> Result<MotorForces> {
    if !(omega1 >= 0.0 && omega2 >= 0.0) {
        return Err(Error::Domain(format!(
            "motor speeds must be nonnegative, got ({omega1}, {omega2})"
        )));
    }
    let (s1, s2) = (omega1 * omega1, omega2 * omega2);
    Ok(MotorForces {
        t1: p.c_t * s1,
        t2: p.c_t * s2,
        mu1: p.c_mu * s1,
        mu2: -p.c_mu * s2,
    })
}

/// `R^b_alpha`, the fixed rotation from the zero-lift frame to the body frame.
pub fn zero_lift_to_body(p: &VehicleParams) -> Matrix3<f64> {
    rot_y(-p.alpha0)
}

/// Thrust force of one motor in the zero-lift frame.
pub fn thrust_force_single(t: f64, p: &VehicleParams) -> Vector3<f64> {
    Vector3::new(p.thrust_forward_gain() * t, 0.0, p.thrust_normal_gain() * t)
}

/// Scalar `nu` such that the flap force of flap `i` is `(0, 0, nu_i delta_i)`.
pub fn flap_effectiveness(v_alpha: &Vector3<f64>, speed: f64, t: f64, p: &VehicleParams) -> f64 {
    -p.c_dlt * p.alpha_bar().cos() * t - p.c_dlv * speed * v_alpha.x
}

pub fn wing_force(v_alpha: &Vector3<f64>, speed: f64, p: &VehicleParams) -> Vector3<f64> {
    -Vector3::new(p.c_dv * v_alpha.x, 0.0, p.c_lv * v_alpha.z) * speed
}

/// Total force in the zero-lift frame: thrust + flaps + wing.
pub fn aero_force(
    v_alpha: &Vector3<f64>,
    speed: f64,
    t1: f64,
    t2: f64,
    delta1: f64,
    delta2: f64,
    p: &VehicleParams,
) -> Vector3<f64> {
    aero_force_with(v_alpha, speed, t1, t2, delta1, delta2, p, ModelMode::Full)
}

#[allow(clippy::too_many_arguments)]
fn aero_force_with(
    v_alpha: &Vector3<f64>,
    speed: f64,
    t1: f64,
    t2: f64,
    delta1: f64,
    delta2: f64,
    p: &VehicleParams,
    mode: ModelMode,
) -> Vector3<f64> {
    let mut f = thrust_force_single(t1 + t2, p) + wing_force(v_alpha, speed, p);
    if mode.flap_force() {
        let nu1 = flap_effectiveness(v_alpha, speed, t1, p);
        let nu2 = flap_effectiveness(v_alpha, speed, t2, p);
        f.z += nu1 * delta1 + nu2 * delta2;
    }
    f
}

/// Moment due to the thrust of the two motors (body frame).
pub fn thrust_moment(t1: f64, t2: f64, p: &VehicleParams) -> Vector3<f64> {
    let r = zero_lift_to_body(p);
    let diff_b = r * (thrust_force_single(t1, p) - thrust_force_single(t2, p));
    Vector3::new(-p.l_ty * diff_b.z, p.c_mu_t * (t1 + t2), p.l_ty * diff_b.x)
}

/// Moment due to propeller torque (body frame).
pub fn torque_moment(mu1: f64, mu2: f64, p: &VehicleParams) -> Vector3<f64> {
    Vector3::new(p.alpha_t.cos(), 0.0, -p.alpha_t.sin()) * (mu1 + mu2)
}

/// Moment due to the flap forces `f1 = nu1 delta1`, `f2 = nu2 delta2` (z-components).
pub fn flap_moment(f1: f64, f2: f64, p: &VehicleParams) -> Vector3<f64> {
    let (s0, c0) = p.alpha0.sin_cos();
    Vector3::new(p.l_dy * c0 * (f2 - f1), p.l_dx * (f1 + f2), p.l_dy * s0 * (f2 - f1))
}

/// Total body moment: thrust + propeller torque + flaps.
pub fn aero_moment(
    v_alpha: &Vector3<f64>,
    speed: f64,
    t1: f64,
    t2: f64,
    delta1: f64,
    delta2: f64,
    p: &VehicleParams,
) -> Vector3<f64> {
    aero_moment_with(v_alpha, speed, t1, t2, delta1, delta2, p, ModelMode::Full)
}

#[allow(clippy::too_many_arguments)]
fn aero_moment_with(
    v_alpha: &Vector3<f64>,
    speed: f64,
    t1: f64,
    t2: f64,
    delta1: f64,
    delta2: f64,
    p: &VehicleParams,
    mode: ModelMode,
) -> Vector3<f64> {
    let mu_sum = p.c_mu / p.c_t * (t1 - t2);
    let f1 = flap_effectiveness(v_alpha, speed, t1, p) * delta1;
    let f2 = flap_effectiveness(v_alpha, speed, t2, p) * delta2;
    let mut m_flap = flap_moment(f1, f2, p);
    if !mode.flap_yaw_moment() {
        m_flap.z = 0.0;
    }
    thrust_moment(t1, t2, p) + torque_moment(mu_sum, 0.0, p) + m_flap
}

/// Force (zero-lift frame) and moment (body frame) acting on the vehicle.
pub fn body_wrench(
    state: &VehicleState,
    u: &ControlInput,
    p: &VehicleParams,
    mode: ModelMode,
) -> Result<BodyWrench> {
    let mf = motor_forces(u.omega1, u.omega2, p)?;
    let r_ia = state.xi.to_rotation_matrix().into_inner() * zero_lift_to_body(p);
    let v_alpha = r_ia.transpose() * state.v;
    let speed = smoothed_speed(&state.v);
    Ok(BodyWrench {
        force: aero_force_with(&v_alpha, speed, mf.t1, mf.t2, u.delta1, u.delta2, p, mode),
        moment: aero_moment_with(&v_alpha, speed, mf.t1, mf.t2, u.delta1, u.delta2, p, mode),
    })
}

/// Right-hand side of the equations of motion.
pub fn state_derivative(
    state: &VehicleState,
    u: &ControlInput,
    p: &VehicleParams,
    mode: ModelMode,
) -> Result<StateDerivative> {
    let qn = state.xi.as_ref().norm();
    if (qn - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("attitude quaternion norm {qn} is not unit")));
    }
    let w = body_wrench(state, u, p, mode)?;
    let r_ia = state.xi.to_rotation_matrix().into_inner() * zero_lift_to_body(p);
    let v_dot = Vector3::new(0.0, 0.0, p.g) + r_ia * w.force / p.m;
    let om = state.omega;
    let xi_dot = state.xi.as_ref() * Quaternion::from_parts(0.0, om) * 0.5;
    let j_inv = p
        .j
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("singular inertia".into()))?;
    let omega_dot = j_inv * (w.moment - om.cross(&(p.j * om)));
    Ok(StateDerivative {
        x_dot: state.v,
        v_dot,
        xi_dot,
        omega_dot,
    })
}
