//! Differential flatness transform: flat output `(x, psi)` and its derivatives
//! up to snap and yaw acceleration map to attitude, angular velocity, angular
//! acceleration, body moment and control inputs.
//!
//! Attitude is parameterized by Euler angles in ZXY order,
//! `R^i_b = rot_z(psi) rot_x(phi) rot_y(theta)`, with `theta = theta_bar + alpha0`
//! where `theta_bar` is the pitch of the zero-lift frame. The direct flap
//! force and the flap yaw moment are neglected when solving for attitude and
//! differential thrust.

use nalgebra::{Matrix2, Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::{euler_zxy, rot_y, wrap_pi, Axis, RotationJet};
use crate::vehicle::{
    flap_effectiveness, smoothed_speed, thrust_moment, torque_moment, ControlInput,
    VehicleParams, VehicleState,
};

/// Below this magnitude both atan2 arguments are treated as zero.
pub const DEGENERATE_ATAN2: f64 = 1e-12;
/// ZXY Euler angles are rejected when `|cos(phi)|` falls below this.
pub const EULER_DEGENERACY: f64 = 1e-8;
/// Flap allocation matrices with a larger condition number are rejected.
pub const MAX_FLAP_CONDITION: f64 = 1e8;

/// Flat output and its derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatSample {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub j: Vector3<f64>,
    pub s: Vector3<f64>,
    pub psi: f64,
    pub psi_d: f64,
    pub psi_dd: f64,
}

impl FlatSample {
    /// Static hover at `x` with yaw `psi`.
    pub fn hover(x: Vector3<f64>, psi: f64) -> Self {
        Self {
            x,
            psi,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.v, self.a, self.j, self.s]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
            && self.psi.is_finite()
            && self.psi_d.is_finite()
            && self.psi_dd.is_finite()
    }
}

/// Continuity bookkeeping for the `k pi` ambiguity of roll and pitch.
///
/// `k_roll` and `k_pitch` index the branch relative to the raw atan2
/// expressions. Angles are kept unwrapped so that consecutive samples differ
/// by less than pi/2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchState {
    pub k_roll: u8,
    pub k_pitch: u8,
    /// Previous `(phi, theta_bar)`; `None` at the start of a trajectory.
    pub prev: Option<(f64, f64)>,
}

impl BranchState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Value and first two time derivatives of a scalar signal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }
}

/// Derivatives of `atan2(y, x)`, without the value.
fn atan2_rates(y: Jet, x: Jet) -> (f64, f64) {
    let den = x.value * x.value + y.value * y.value;
    let num = x.value * y.d1 - y.value * x.d1;
    let den_d = 2.0 * (x.value * x.d1 + y.value * y.d1);
    let num_d = x.value * y.d2 - y.value * x.d2;
    (num / den, (num_d * den - num * den_d) / (den * den))
}

/// Intermediate quantities of the transform at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessIntermediates {
    /// Desired force in the world frame and its two derivatives [N, N/s, N/s^2].
    pub f_i: [Vector3<f64>; 3],
    /// Force in the intermediate (yaw + roll) frame and its derivatives.
    pub f_phi: [Vector3<f64>; 3],
    /// Velocity in the intermediate frame and its derivatives.
    pub v_phi: [Vector3<f64>; 3],
    /// Smoothed speed and its derivatives.
    pub speed: Jet,
    pub beta_x: Jet,
    pub beta_z: Jet,
    pub sigma_x: Jet,
    pub sigma_z: Jet,
    /// Speed-weighted velocity `|v| v^phi` (x, z) and its derivatives `tau`, `tau_dot`.
    pub w: [Vector2<f64>; 3],
    pub eta: f64,
    pub phi: Jet,
    pub theta_bar: Jet,
    /// Collective thrust [N].
    pub thrust: f64,
}

/// Resolved state and inputs at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullStateInput {
    pub psi: f64,
    pub phi: f64,
    pub theta: f64,
    pub theta_bar: f64,
    /// Body-to-world rotation.
    pub rotation: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
    /// Required body moment [N m].
    pub moment: Vector3<f64>,
    pub thrust: f64,
    pub delta_thrust: f64,
    pub t1: f64,
    pub t2: f64,
    pub input: ControlInput,
    /// At least one motor was asked for negative thrust; its speed is reported as 0.
    pub negative_thrust: bool,
    pub intermediates: FlatnessIntermediates,
}

impl FullStateInput {
    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn state(&self, q: &FlatSample) -> VehicleState {
        VehicleState {
            x: q.x,
            v: q.v,
            xi: self.quaternion(),
            omega: self.omega,
        }
    }
}

/// Solution of the moment allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocatedInputs {
    pub input: ControlInput,
    pub t1: f64,
    pub t2: f64,
    pub delta_thrust: f64,
    pub negative_thrust: bool,
}

pub fn desired_force_world(a: &Vector3<f64>, p: &VehicleParams) -> Vector3<f64> {
    p.m * (a - Vector3::new(0.0, 0.0, p.g))
}

/// Raw roll expression `-atan2(i_y^T R^psi_i f, i_z^T f) + k pi`, wrapped to (-pi, pi].
pub fn roll_candidate(f_i: &Vector3<f64>, psi: f64, k: u8) -> f64 {
    let (s, c) = psi.sin_cos();
    let beta_x = -s * f_i.x + c * f_i.y;
    wrap_pi(-beta_x.atan2(f_i.z) + f64::from(k) * std::f64::consts::PI)
}

/// Picks the branch `k` and the unwrapped angle closest to `prev`. Without a
/// previous angle the branch is picked by `initial`.
fn resolve_branch(raw: f64, prev: Option<f64>, initial: impl Fn(f64) -> bool) -> (u8, f64) {
    use std::f64::consts::PI;
    match prev {
        Some(prev) => {
            let d0 = wrap_pi(raw - prev);
            let d1 = wrap_pi(raw + PI - prev);
            if d1.abs() < d0.abs() {
                (1, prev + d1)
            } else {
                (0, prev + d0)
            }
        }
        None => {
            if initial(raw) {
                (0, wrap_pi(raw))
            } else {
                (1, wrap_pi(raw + PI))
            }
        }
    }
}

/// Roll angle resolved for continuity. At the first sample the upright
/// branch (`cos(phi) >= 0`) is chosen.
pub fn roll_from_force(f_i: &Vector3<f64>, psi: f64, branch: &mut BranchState) -> Result<f64> {
    let (s, c) = psi.sin_cos();
    let beta_x = -s * f_i.x + c * f_i.y;
    let beta_z = f_i.z;
    if beta_x.abs() < DEGENERATE_ATAN2 && beta_z.abs() < DEGENERATE_ATAN2 {
        return Err(Error::DegenerateForce(format!(
            "roll undefined for force ({:e}, {:e}, {:e})",
            f_i.x, f_i.y, f_i.z
        )));
    }
    let raw = -beta_x.atan2(beta_z);
    let (k, phi) = resolve_branch(raw, branch.prev.map(|p| p.0), |a| a.cos() >= 0.0);
    branch.k_roll = k;
    Ok(phi)
}

/// `(sigma_x, sigma_z)` atan2 arguments of the zero-lift pitch.
fn pitch_arguments(
    f_phi: &Vector3<f64>,
    w: &Vector2<f64>,
    p: &VehicleParams,
    eta: f64,
) -> (f64, f64) {
    let (wx, wz) = (w.x, w.y);
    (
        eta * (f_phi.x + p.c_dv * wx) - p.c_lv * wz - f_phi.z,
        eta * (f_phi.z + p.c_dv * wz) + p.c_lv * wx + f_phi.x,
    )
}

fn collective_thrust(theta_bar: f64, f_phi: &Vector3<f64>, w: &Vector2<f64>, p: &VehicleParams) -> f64 {
    let (s, c) = theta_bar.sin_cos();
    (c * (f_phi.x + p.c_dv * w.x) - s * (f_phi.z + p.c_dv * w.y)) / p.thrust_forward_gain()
}

/// Zero-lift pitch, collective thrust and body pitch from the force and
/// velocity in the intermediate frame. At the first sample the branch with
/// `k = 0` (nonnegative thrust in the absence of aerodynamics) is chosen.
pub fn pitch_thrust_from_force(
    f_phi: &Vector3<f64>,
    v_phi: &Vector3<f64>,
    speed: f64,
    p: &VehicleParams,
    branch: &mut BranchState,
) -> Result<(f64, f64, f64)> {
    let w = Vector2::new(v_phi.x, v_phi.z) * speed;
    let (sx, sz) = pitch_arguments(f_phi, &w, p, p.eta());
    let theta_bar = resolve_pitch(sx, sz, branch)?;
    let thrust = collective_thrust(theta_bar, f_phi, &w, p);
    Ok((theta_bar, thrust, theta_bar + p.alpha0))
}

fn resolve_pitch(sx: f64, sz: f64, branch: &mut BranchState) -> Result<f64> {
    if sx.abs() < DEGENERATE_ATAN2 && sz.abs() < DEGENERATE_ATAN2 {
        return Err(Error::DegenerateForce(format!(
            "pitch undefined (sigma = ({sx:e}, {sz:e}))"
        )));
    }
    let raw = sx.atan2(sz);
    let (k, theta_bar) = resolve_branch(raw, branch.prev.map(|p| p.1), |_| true);
    branch.k_pitch = k;
    Ok(theta_bar)
}

/// Resolves attitude, thrust and their derivatives. Updates `branch`.
pub fn resolve_attitude(
    q: &FlatSample,
    p: &VehicleParams,
    branch: &mut BranchState,
) -> Result<FlatnessIntermediates> {
    if !q.is_finite() {
        return Err(Error::Domain("flat sample has non-finite entries".into()));
    }
    let f = desired_force_world(&q.a, p);
    let fd = p.m * q.j;
    let fdd = p.m * q.s;

    // Roll: components of the force in the yawed frame.
    let yaw = RotationJet::about(Axis::Z, q.psi, q.psi_d, q.psi_dd).transpose();
    let (g0, g1, g2) = yaw.apply(&f, &fd, &fdd);
    let beta_x = Jet::new(g0.y, g1.y, g2.y);
    let beta_z = Jet::new(g0.z, g1.z, g2.z);
    let mut trial = *branch;
    let phi = roll_from_force(&f, q.psi, &mut trial)?;
    if phi.cos().abs() < EULER_DEGENERACY {
        return Err(Error::EulerDegeneracy(phi.cos().abs()));
    }
    let (phi_d, phi_dd) = atan2_rates(beta_x, beta_z);
    let phi = Jet::new(phi, -phi_d, -phi_dd);

    // Intermediate frame: R^phi_i = (rot_z(psi) rot_x(phi))^T.
    let r_phi_i = RotationJet::about(Axis::X, phi.value, phi.d1, phi.d2)
        .transpose()
        .compose(&yaw);
    let (f0, f1, f2) = r_phi_i.apply(&f, &fd, &fdd);
    let (v0, v1, v2) = r_phi_i.apply(&q.v, &q.a, &q.j);

    let s = smoothed_speed(&q.v);
    let s_d = q.v.dot(&q.a) / s;
    let s_dd = (q.a.dot(&q.a) + q.v.dot(&q.j)) / s - q.v.dot(&q.a) * s_d / (s * s);
    let speed = Jet::new(s, s_d, s_dd);

    let xz = |v: Vector3<f64>| Vector2::new(v.x, v.z);
    let w0 = xz(v0) * s;
    let w1 = xz(v0) * s_d + xz(v1) * s;
    let w2 = xz(v0) * s_dd + xz(v1) * (2.0 * s_d) + xz(v2) * s;

    let eta = p.eta();
    let (sx0, sz0) = pitch_arguments(&f0, &w0, p, eta);
    let (sx1, sz1) = pitch_arguments(&f1, &w1, p, eta);
    let (sx2, sz2) = pitch_arguments(&f2, &w2, p, eta);
    let sigma_x = Jet::new(sx0, sx1, sx2);
    let sigma_z = Jet::new(sz0, sz1, sz2);
    let theta_bar = resolve_pitch(sx0, sz0, &mut trial)?;
    let (th_d, th_dd) = atan2_rates(sigma_x, sigma_z);
    let thrust = collective_thrust(theta_bar, &f0, &w0, p);

    trial.prev = Some((phi.value, theta_bar));
    *branch = trial;

    Ok(FlatnessIntermediates {
        f_i: [f, fd, fdd],
        f_phi: [f0, f1, f2],
        v_phi: [v0, v1, v2],
        speed,
        beta_x,
        beta_z,
        sigma_x,
        sigma_z,
        w: [w0, w1, w2],
        eta,
        phi,
        theta_bar: Jet::new(theta_bar, th_d, th_dd),
        thrust,
    })
}

/// `(R^theta_phi, R^theta_psi)` with derivatives.
fn euler_jets(im: &FlatnessIntermediates, p: &VehicleParams) -> (RotationJet, RotationJet) {
    let th = im.theta_bar;
    let pitch = RotationJet::about(Axis::Y, th.value + p.alpha0, th.d1, th.d2);
    let roll_pitch = RotationJet::about(Axis::X, im.phi.value, im.phi.d1, im.phi.d2).compose(&pitch);
    (pitch.transpose(), roll_pitch.transpose())
}

/// Body angular velocity assembled from the Euler angle rates.
pub fn angular_velocity_from_flat(
    q: &FlatSample,
    im: &FlatnessIntermediates,
    p: &VehicleParams,
) -> Vector3<f64> {
    let (r_th_phi, r_th_psi) = euler_jets(im, p);
    Vector3::new(0.0, im.theta_bar.d1, 0.0)
        + r_th_phi.r * Vector3::new(im.phi.d1, 0.0, 0.0)
        + r_th_psi.r * Vector3::new(0.0, 0.0, q.psi_d)
}

/// Body angular acceleration (time derivative of [`angular_velocity_from_flat`]).
pub fn angular_acceleration_from_flat(
    q: &FlatSample,
    im: &FlatnessIntermediates,
    p: &VehicleParams,
) -> Vector3<f64> {
    let (r_th_phi, r_th_psi) = euler_jets(im, p);
    let ex = Vector3::x();
    let ez = Vector3::z();
    Vector3::new(0.0, im.theta_bar.d2, 0.0)
        + r_th_phi.dr * ex * im.phi.d1
        + r_th_phi.r * ex * im.phi.d2
        + r_th_psi.dr * ez * q.psi_d
        + r_th_psi.r * ez * q.psi_dd
}

pub fn moment_from_rates(
    omega: &Vector3<f64>,
    omega_dot: &Vector3<f64>,
    p: &VehicleParams,
) -> Vector3<f64> {
    p.j * omega_dot + omega.cross(&(p.j * omega))
}

/// Differential-thrust gain: yaw moment per unit `T1 - T2` (flap yaw moment neglected).
pub fn differential_thrust_gain(p: &VehicleParams) -> f64 {
    let (s0, c0) = p.alpha0.sin_cos();
    -p.alpha_t.sin() * p.c_mu / p.c_t
        + p.l_ty * (c0 * p.thrust_forward_gain() - s0 * p.thrust_normal_gain())
}

/// Solves the moment model for the motor speeds and flap deflections.
pub fn inputs_from_moment(
    moment: &Vector3<f64>,
    thrust: f64,
    v_alpha: &Vector3<f64>,
    speed: f64,
    p: &VehicleParams,
) -> Result<AllocatedInputs> {
    let gain = differential_thrust_gain(p);
    if gain.abs() < 1e-15 {
        return Err(Error::SingularThrustGain);
    }
    let delta_thrust = moment.z / gain;
    let t1 = 0.5 * (thrust + delta_thrust);
    let t2 = 0.5 * (thrust - delta_thrust);

    let m_flap = moment - thrust_moment(t1, t2, p) - torque_moment(p.c_mu / p.c_t * delta_thrust, 0.0, p);
    let nu1 = flap_effectiveness(v_alpha, speed, t1, p);
    let nu2 = flap_effectiveness(v_alpha, speed, t2, p);
    let c0 = p.alpha0.cos();
    let alloc = Matrix2::new(
        -p.l_dy * c0 * nu1,
        p.l_dy * c0 * nu2,
        p.l_dx * nu1,
        p.l_dx * nu2,
    );
    let sv = alloc.singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if !(cond <= MAX_FLAP_CONDITION) {
        return Err(Error::SingularFlapEffectiveness(cond));
    }
    let deltas = alloc
        .lu()
        .solve(&Vector2::new(m_flap.x, m_flap.y))
        .ok_or(Error::SingularFlapEffectiveness(cond))?;

    let speed_of = |t: f64| if t >= 0.0 { (t / p.c_t).sqrt() } else { 0.0 };
    Ok(AllocatedInputs {
        input: ControlInput {
            omega1: speed_of(t1),
            omega2: speed_of(t2),
            delta1: deltas.x,
            delta2: deltas.y,
        },
        t1,
        t2,
        delta_thrust,
        negative_thrust: t1 < 0.0 || t2 < 0.0,
    })
}

/// Full transform from a flat sample to state and inputs. Updates `branch`.
pub fn flat_to_full(
    q: &FlatSample,
    p: &VehicleParams,
    branch: &mut BranchState,
) -> Result<FullStateInput> {
    let im = resolve_attitude(q, p, branch)?;
    let omega = angular_velocity_from_flat(q, &im, p);
    let omega_dot = angular_acceleration_from_flat(q, &im, p);
    let moment = moment_from_rates(&omega, &omega_dot, p);
    let v_alpha = rot_y(im.theta_bar.value).transpose() * im.v_phi[0];
    let alloc = inputs_from_moment(&moment, im.thrust, &v_alpha, im.speed.value, p)?;
    let theta = im.theta_bar.value + p.alpha0;
    Ok(FullStateInput {
        psi: q.psi,
        phi: im.phi.value,
        theta,
        theta_bar: im.theta_bar.value,
        rotation: euler_zxy(q.psi, im.phi.value, theta),
        omega,
        omega_dot,
        moment,
        thrust: im.thrust,
        delta_thrust: alloc.delta_thrust,
        t1: alloc.t1,
        t2: alloc.t2,
        input: alloc.input,
        negative_thrust: alloc.negative_thrust,
        intermediates: im,
    })
}
