use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NOMINAL: &str = include_str!("../../params/nominal.params");

/// Physical, aerodynamic and actuator parameters of the vehicle.
///
/// Field names double as keys of the parameter file format (see
/// [`VehicleParams::parse`]); the inertia tensor is stored in the file as its
/// six upper-triangular entries `Jxx, Jxy, Jxz, Jyy, Jyz, Jzz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Mass [kg].
    pub m: f64,
    /// Gravitational acceleration [m/s^2].
    pub g: f64,
    /// Inertia tensor in the body frame [kg m^2].
    pub j: Matrix3<f64>,
    /// Zero-lift angle of attack [rad].
    pub alpha0: f64,
    /// Thrust angle [rad].
    pub alpha_t: f64,
    /// Thrust coefficient [N s^2/rad^2].
    pub c_t: f64,
    /// Propeller torque coefficient [N m s^2/rad^2].
    pub c_mu: f64,
    /// Thrust-induced drag coefficient [-].
    pub c_dt: f64,
    /// Thrust-induced lift coefficient [-].
    pub c_lt: f64,
    /// Wing drag coefficient [N s^2/m^2].
    pub c_dv: f64,
    /// Wing lift coefficient [N s^2/m^2].
    pub c_lv: f64,
    /// Flap effectiveness in the propeller wash [-].
    pub c_dlt: f64,
    /// Flap effectiveness due to airspeed [N s^2/m^2].
    pub c_dlv: f64,
    /// Lateral motor arm [m].
    pub l_ty: f64,
    /// Longitudinal flap arm [m].
    pub l_dx: f64,
    /// Lateral flap arm [m].
    pub l_dy: f64,
    /// Pitch moment due to thrust [m].
    pub c_mu_t: f64,
    /// Minimum motor speed [rad/s].
    pub omega_min: f64,
    /// Maximum motor speed [rad/s].
    pub omega_max: f64,
    /// Symmetric flap deflection limit [rad].
    pub delta_max: f64,
}

const SCALAR_KEYS: [&str; 20] = [
    "m", "g", "alpha0", "alpha_t", "c_t", "c_mu", "c_dt", "c_lt", "c_dv", "c_lv", "c_dlt",
    "c_dlv", "l_ty", "l_dx", "l_dy", "c_mu_t", "omega_min", "omega_max", "delta_max", "Jxx",
];
const INERTIA_KEYS: [&str; 5] = ["Jxy", "Jxz", "Jyy", "Jyz", "Jzz"];

impl VehicleParams {
    /// The parameter set shipped in `params/nominal.params`.
    pub fn nominal() -> Self {
        Self::parse(NOMINAL).expect("bundled nominal parameter file is valid")
    }

    /// Sum of zero-lift angle and thrust angle.
    pub fn alpha_bar(&self) -> f64 {
        self.alpha0 + self.alpha_t
    }

    /// `cos(alpha_bar) (1 - c_dt)`: forward force per unit thrust.
    pub fn thrust_forward_gain(&self) -> f64 {
        self.alpha_bar().cos() * (1.0 - self.c_dt)
    }

    /// `sin(alpha_bar) (c_lt - 1)`: normal force per unit thrust.
    pub fn thrust_normal_gain(&self) -> f64 {
        self.alpha_bar().sin() * (self.c_lt - 1.0)
    }

    /// Ratio of normal to forward force due to thrust.
    pub fn eta(&self) -> f64 {
        self.thrust_normal_gain() / self.thrust_forward_gain()
    }

    /// Largest collective thrust the motors can produce [N].
    pub fn max_collective_thrust(&self) -> f64 {
        2.0 * self.c_t * self.omega_max * self.omega_max
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let all = [
            self.m, self.g, self.alpha0, self.alpha_t, self.c_t, self.c_mu, self.c_dt, self.c_lt,
            self.c_dv, self.c_lv, self.c_dlt, self.c_dlv, self.l_ty, self.l_dx, self.l_dy,
            self.c_mu_t, self.omega_min, self.omega_max, self.delta_max,
        ];
        if all.iter().any(|v| !v.is_finite()) || self.j.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.m <= 0.0 {
            return bad("mass must be positive");
        }
        if (self.j - self.j.transpose()).amax() > 1e-12 * self.j.amax() {
            return bad("inertia tensor must be symmetric");
        }
        if self.j.cholesky().is_none() {
            return bad("inertia tensor must be positive definite");
        }
        if self.c_t <= 0.0 {
            return bad("c_t must be positive");
        }
        if !(self.omega_min >= 0.0 && self.omega_max > self.omega_min) {
            return bad("need omega_max > omega_min >= 0");
        }
        if self.delta_max <= 0.0 {
            return bad("delta_max must be positive");
        }
        if !(0.0..1.0).contains(&self.c_dt) {
            return bad("need 0 <= c_dt < 1");
        }
        if self.thrust_forward_gain().abs() < 1e-12 {
            return bad("cos(alpha_bar)(1 - c_dt) must be nonzero");
        }
        Ok(())
    }

    /// Parses the `name = value` text format. Unknown, duplicate, or missing
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `name = value`", lineno + 1))
            })?;
            let key = key.trim();
            if !SCALAR_KEYS.contains(&key) && !INERTIA_KEYS.contains(&key) {
                return Err(Error::Format(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            if values.insert(key.to_string(), value).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let get = |k: &str| {
            values
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("missing key `{k}`")))
        };
        let (jxx, jxy, jxz) = (get("Jxx")?, get("Jxy")?, get("Jxz")?);
        let (jyy, jyz, jzz) = (get("Jyy")?, get("Jyz")?, get("Jzz")?);
        let params = Self {
            m: get("m")?,
            g: get("g")?,
            j: Matrix3::new(jxx, jxy, jxz, jxy, jyy, jyz, jxz, jyz, jzz),
            alpha0: get("alpha0")?,
            alpha_t: get("alpha_t")?,
            c_t: get("c_t")?,
            c_mu: get("c_mu")?,
            c_dt: get("c_dt")?,
            c_lt: get("c_lt")?,
            c_dv: get("c_dv")?,
            c_lv: get("c_lv")?,
            c_dlt: get("c_dlt")?,
            c_dlv: get("c_dlv")?,
            l_ty: get("l_ty")?,
            l_dx: get("l_dx")?,
            l_dy: get("l_dy")?,
            c_mu_t: get("c_mu_t")?,
            omega_min: get("omega_min")?,
            omega_max: get("omega_max")?,
            delta_max: get("delta_max")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ParamFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| Error::ParamFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Serializes to the parameter file format (round-trips through [`parse`](Self::parse)).
    pub fn to_file_string(&self) -> String {
        let mut s = String::from("# flatgen vehicle parameters (SI units, world z down)\n");
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(s, "{k} = {v:?}");
        };
        kv("m", self.m);
        kv("g", self.g);
        kv("Jxx", self.j[(0, 0)]);
        kv("Jxy", self.j[(0, 1)]);
        kv("Jxz", self.j[(0, 2)]);
        kv("Jyy", self.j[(1, 1)]);
        kv("Jyz", self.j[(1, 2)]);
        kv("Jzz", self.j[(2, 2)]);
        kv("alpha0", self.alpha0);
        kv("alpha_t", self.alpha_t);
        kv("c_t", self.c_t);
        kv("c_mu", self.c_mu);
        kv("c_dt", self.c_dt);
        kv("c_lt", self.c_lt);
        kv("c_dv", self.c_dv);
        kv("c_lv", self.c_lv);
        kv("c_dlt", self.c_dlt);
        kv("c_dlv", self.c_dlv);
        kv("l_ty", self.l_ty);
        kv("l_dx", self.l_dx);
        kv("l_dy", self.l_dy);
        kv("c_mu_t", self.c_mu_t);
        kv("omega_min", self.omega_min);
        kv("omega_max", self.omega_max);
        kv("delta_max", self.delta_max);
        s
    }
}
