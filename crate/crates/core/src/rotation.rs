//! Elementary rotations and their time derivatives.
//!
//! All matrices are active rotations: `rot_z(psi) * v` rotates `v` by `psi`
//! about the z-axis. A product `R^a_b` maps coordinates expressed in frame
//! `b` into frame `a`.

use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot(axis: Axis, a: f64) -> Matrix3<f64> {
    match axis {
        Axis::X => rot_x(a),
        Axis::Y => rot_y(a),
        Axis::Z => rot_z(a),
    }
}

/// Skew-symmetric cross-product matrix.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] (takes the skew part of `m`).
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Body-to-world rotation for Euler angles in ZXY sequence (yaw, roll, pitch).
pub fn euler_zxy(psi: f64, phi: f64, theta: f64) -> Matrix3<f64> {
    rot_z(psi) * rot_x(phi) * rot_y(theta)
}

/// Rotation matrix together with its first and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationJet {
    pub r: Matrix3<f64>,
    pub dr: Matrix3<f64>,
    pub ddr: Matrix3<f64>,
}

impl RotationJet {
    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            dr: Matrix3::zeros(),
            ddr: Matrix3::zeros(),
        }
    }

    /// Constant rotation (zero derivatives).
    pub fn fixed(r: Matrix3<f64>) -> Self {
        Self {
            r,
            dr: Matrix3::zeros(),
            ddr: Matrix3::zeros(),
        }
    }

    /// Rotation by angle `a(t)` about a fixed axis, given `a`, `da`, `dda`.
    pub fn about(axis: Axis, a: f64, da: f64, dda: f64) -> Self {
        let r = rot(axis, a);
        let k = hat(&axis.unit());
        let rk = r * k;
        Self {
            r,
            dr: rk * da,
            ddr: rk * dda + rk * k * (da * da),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            r: self.r.transpose(),
            dr: self.dr.transpose(),
            ddr: self.ddr.transpose(),
        }
    }

    /// Product rule: `(A B)`, `(A B)'`, `(A B)''`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            r: self.r * rhs.r,
            dr: self.dr * rhs.r + self.r * rhs.dr,
            ddr: self.ddr * rhs.r + 2.0 * self.dr * rhs.dr + self.r * rhs.ddr,
        }
    }

    /// Applies the rotation to a vector signal `(u, u', u'')`.
    pub fn apply(
        &self,
        u: &Vector3<f64>,
        du: &Vector3<f64>,
        ddu: &Vector3<f64>,
    ) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        (
            self.r * u,
            self.dr * u + self.r * du,
            self.ddr * u + 2.0 * self.dr * du + self.r * ddu,
        )
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w += TAU;
    }
    w
}

/// Rotation angle of `a^T b` (geodesic distance on SO(3)).
pub fn angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let m = a.transpose() * b;
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = vee(&m).norm();
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn jet_matches_finite_differences() {
        let h = 1e-5;
        let a = |t: f64| 0.3 + 1.2 * t + 0.7 * t * t;
        let b = |t: f64| -0.5 * t + 0.2 * t * t * t;
        let jet = |t: f64| {
            RotationJet::about(Axis::Z, a(t), 1.2 + 1.4 * t, 1.4)
                .compose(&RotationJet::about(Axis::X, b(t), -0.5 + 0.6 * t * t, 1.2 * t))
        };
        let t = 0.4;
        let j = jet(t);
        let fd = (jet(t + h).r - jet(t - h).r) / (2.0 * h);
        let fdd = (jet(t + h).r - 2.0 * j.r + jet(t - h).r) / (h * h);
        assert!((fd - j.dr).norm() < 1e-8);
        assert!((fdd - j.ddr).norm() < 1e-4);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_pi(0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn angle_between_small_and_large() {
        let a = rot_z(0.2);
        let b = rot_z(0.2) * rot_x(0.5);
        assert!((angle_between(&a, &b) - 0.5).abs() < 1e-12);
        assert!((angle_between(&a, &(a * rot_y(3.0))) - 3.0).abs() < 1e-9);
    }
}
