//! Waypoint recipes for the aerobatic maneuvers.
//!
//! Coordinates use the world frame (z down). Unless noted, every maneuver
//! starts and ends in static hover. Waypoint placements that are not pinned
//! down by a maneuver's description are assumptions chosen to reproduce the
//! described geometry; they are listed on each constructor.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minsnap::{Waypoint, DEFAULT_MU_PSI};
use crate::rotation::wrap_pi;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverRecipe {
    pub name: String,
    pub waypoints: Vec<Waypoint>,
    #[serde(default = "default_mu_psi")]
    pub mu_psi: f64,
    /// Fixed total time [s]; `None` asks for the fastest feasible scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
}

fn default_mu_psi() -> f64 {
    DEFAULT_MU_PSI
}

impl ManeuverRecipe {
    fn new(name: &str, waypoints: Vec<Waypoint>) -> Self {
        Self {
            name: name.to_string(),
            waypoints,
            mu_psi: DEFAULT_MU_PSI,
            total_time: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("recipe json: {e}")))?;
        if r.waypoints.len() < 2 {
            return Err(Error::InvalidWaypoints("recipe needs at least 2 waypoints".into()));
        }
        if let Some(t) = r.total_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::ManeuverParam(format!("total_time must be positive, got {t}")));
            }
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleMode {
    Coordinated,
    KnifeEdge,
    Rolling,
}

impl CircleMode {
    pub const ALL: [CircleMode; 3] = [CircleMode::Coordinated, CircleMode::KnifeEdge, CircleMode::Rolling];

    pub fn as_str(self) -> &'static str {
        match self {
            CircleMode::Coordinated => "coordinated",
            CircleMode::KnifeEdge => "knife_edge",
            CircleMode::Rolling => "rolling",
        }
    }
}

impl FromStr for CircleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinated" => Ok(CircleMode::Coordinated),
            "knife_edge" | "knife-edge" => Ok(CircleMode::KnifeEdge),
            "rolling" => Ok(CircleMode::Rolling),
            _ => Err(Error::ManeuverParam(format!("unknown circle mode `{s}`"))),
        }
    }
}

/// Horizontal circle flown at constant speed; checked analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub radius: f64,
    pub speed: f64,
    pub mode: CircleMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Maneuver {
    Waypoints(ManeuverRecipe),
    Circle(CircleSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManeuverName {
    Loop,
    KnifeEdge,
    ClimbingTurn,
    Immelmann,
    SplitS,
    DiffThrustTurn,
    HoverToHover { dist: f64, psi_start: f64, psi_end: f64 },
    Circle(CircleSpec),
}

/// Names accepted by [`ManeuverName::parse`].
pub const MANEUVER_NAMES: [&str; 8] = [
    "loop",
    "knife_edge",
    "climbing_turn",
    "immelmann",
    "split_s",
    "diff_thrust_turn",
    "hover_to_hover",
    "circle",
];

/// The six aerobatic waypoint maneuvers with their default settings.
pub const AEROBATIC: [ManeuverName; 6] = [
    ManeuverName::Loop,
    ManeuverName::KnifeEdge,
    ManeuverName::ClimbingTurn,
    ManeuverName::Immelmann,
    ManeuverName::SplitS,
    ManeuverName::DiffThrustTurn,
];

impl ManeuverName {
    /// `hover_to_hover` defaults to a 6 m, zero-yaw flight and `circle` to a
    /// 3 m coordinated circle at 5 m/s; use the enum variants to override.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "loop" => ManeuverName::Loop,
            "knife_edge" => ManeuverName::KnifeEdge,
            "climbing_turn" => ManeuverName::ClimbingTurn,
            "immelmann" => ManeuverName::Immelmann,
            "split_s" => ManeuverName::SplitS,
            "diff_thrust_turn" => ManeuverName::DiffThrustTurn,
            "hover_to_hover" => ManeuverName::HoverToHover { dist: 6.0, psi_start: 0.0, psi_end: 0.0 },
            "circle" => ManeuverName::Circle(CircleSpec {
                radius: 3.0,
                speed: 5.0,
                mode: CircleMode::Coordinated,
            }),
            _ => return Err(Error::UnknownManeuver(s.to_string())),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ManeuverName::Loop => "loop",
            ManeuverName::KnifeEdge => "knife_edge",
            ManeuverName::ClimbingTurn => "climbing_turn",
            ManeuverName::Immelmann => "immelmann",
            ManeuverName::SplitS => "split_s",
            ManeuverName::DiffThrustTurn => "diff_thrust_turn",
            ManeuverName::HoverToHover { .. } => "hover_to_hover",
            ManeuverName::Circle(_) => "circle",
        }
    }
}

pub fn build_recipe(name: ManeuverName) -> Result<Maneuver> {
    Ok(Maneuver::Waypoints(match name {
        ManeuverName::Loop => loop_recipe(1.0, 6.0),
        ManeuverName::KnifeEdge => knife_edge(5.0),
        ManeuverName::ClimbingTurn => climbing_turn(4.0),
        ManeuverName::Immelmann => immelmann(6.0),
        ManeuverName::SplitS => split_s(5.0),
        ManeuverName::DiffThrustTurn => diff_thrust_turn(8.0),
        ManeuverName::HoverToHover { dist, psi_start, psi_end } => {
            hover_to_hover(dist, psi_start, psi_end)?
        }
        ManeuverName::Circle(c) => {
            if !(c.radius > 0.0 && c.speed >= 0.0 && c.radius.is_finite() && c.speed.is_finite()) {
                return Err(Error::ManeuverParam(format!(
                    "circle needs radius > 0 and speed >= 0, got r = {}, v = {}",
                    c.radius, c.speed
                )));
            }
            return Ok(Maneuver::Circle(c));
        }
    }))
}

/// Waypoint recipe by name; circles are rejected.
pub fn recipe(name: ManeuverName) -> Result<ManeuverRecipe> {
    match build_recipe(name)? {
        Maneuver::Waypoints(r) => Ok(r),
        Maneuver::Circle(_) => Err(Error::ManeuverParam("circle has no waypoint recipe".into())),
    }
}

fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// Point on the vertical loop circle in the x-z plane. Angle `-pi/2` is the
/// bottom, `0` the forward point and `pi/2` the top.
fn loop_point(center: Vector3<f64>, r: f64, a: f64) -> Vector3<f64> {
    center + r * v3(a.cos(), 0.0, -a.sin())
}

fn loop_tangent(a: f64) -> Vector3<f64> {
    v3(-a.sin(), 0.0, -a.cos())
}

/// Inside loop on a vertical circle of radius `r`.
///
/// Five circle waypoints at angles `-pi/2, 0, pi/2, pi, -pi/2` (the first and
/// last coincide at the bottom) carry tangential velocity constraints of
/// magnitude `speed`. Assumed: hover points 4 m before and after the bottom
/// of the circle, bottom of the circle at the origin, yaw 0 throughout.
pub fn loop_recipe(r: f64, speed: f64) -> ManeuverRecipe {
    let center = v3(0.0, 0.0, -r);
    let mut wps = vec![Waypoint::rest(v3(-4.0, 0.0, 0.0), 0.0)];
    for a in [-FRAC_PI_2, 0.0, FRAC_PI_2, PI, -FRAC_PI_2] {
        wps.push(Waypoint::new(loop_point(center, r, a), 0.0).with_velocity(loop_tangent(a) * speed));
    }
    wps.push(Waypoint::rest(v3(4.0, 0.0, 0.0), 0.0));
    ManeuverRecipe::new("loop", wps)
}

/// Straight line at constant `speed` along x, transitioning from coordinated
/// (yaw 0) to knife-edge (yaw pi/2) and back over the three middle segments.
///
/// Assumed: 4 m acceleration and deceleration legs, 3 m middle segments.
pub fn knife_edge(speed: f64) -> ManeuverRecipe {
    let v = v3(speed, 0.0, 0.0);
    let wps = vec![
        Waypoint::rest(v3(0.0, 0.0, 0.0), 0.0),
        Waypoint::new(v3(4.0, 0.0, 0.0), 0.0).with_velocity(v),
        Waypoint::new(v3(7.0, 0.0, 0.0), FRAC_PI_2).with_velocity(v),
        Waypoint::new(v3(10.0, 0.0, 0.0), FRAC_PI_2).with_velocity(v),
        Waypoint::new(v3(13.0, 0.0, 0.0), 0.0).with_velocity(v),
        Waypoint::rest(v3(17.0, 0.0, 0.0), 0.0),
    ];
    ManeuverRecipe::new("knife_edge", wps)
}

/// 270 degree right turn with a 1 m climb between two waypoints that differ
/// only in height, each constrained to straight coordinated flight at `speed`.
///
/// Assumed: 3 m legs from and to hover.
pub fn climbing_turn(speed: f64) -> ManeuverRecipe {
    let entry = v3(3.0, 0.0, 0.0);
    let exit = entry + v3(0.0, 0.0, -1.0);
    let out = v3(0.0, -1.0, 0.0);
    let wps = vec![
        Waypoint::rest(v3(0.0, 0.0, 0.0), 0.0),
        Waypoint::new(entry, 0.0).with_velocity(v3(speed, 0.0, 0.0)),
        Waypoint::new(exit, 1.5 * PI).with_velocity(out * speed),
        Waypoint::rest(exit + 3.0 * out, 1.5 * PI),
    ];
    ManeuverRecipe::new("climbing_turn", wps)
}

/// Half loop up followed by a half roll, at constant `speed`.
///
/// Four intermediate waypoints: two in coordinated flight before the half
/// loop, then two flying back inverted while yaw sweeps from 0 to pi.
/// Assumed: 2 m straight legs, 3 m height gain.
pub fn immelmann(speed: f64) -> ManeuverRecipe {
    let h = 3.0;
    let fwd = v3(speed, 0.0, 0.0);
    let wps = vec![
        Waypoint::rest(v3(0.0, 0.0, 0.0), 0.0),
        Waypoint::new(v3(2.0, 0.0, 0.0), 0.0).with_velocity(fwd),
        Waypoint::new(v3(4.0, 0.0, 0.0), 0.0).with_velocity(fwd),
        Waypoint::new(v3(4.0, 0.0, -h), 0.0).with_velocity(-fwd),
        Waypoint::new(v3(1.0, 0.0, -h), PI).with_velocity(-fwd),
        Waypoint::rest(v3(-1.0, 0.0, -h), PI),
    ];
    ManeuverRecipe::new("immelmann", wps)
}

/// Reverse of the Immelmann: half roll to inverted flight on the top leg,
/// then a downward half loop, at constant `speed`.
pub fn split_s(speed: f64) -> ManeuverRecipe {
    let h = 3.0;
    let fwd = v3(speed, 0.0, 0.0);
    let wps = vec![
        Waypoint::rest(v3(-1.0, 0.0, -h), 0.0),
        Waypoint::new(v3(1.0, 0.0, -h), 0.0).with_velocity(fwd),
        Waypoint::new(v3(4.0, 0.0, -h), PI).with_velocity(fwd),
        Waypoint::new(v3(4.0, 0.0, 0.0), PI).with_velocity(-fwd),
        Waypoint::new(v3(2.0, 0.0, 0.0), PI).with_velocity(-fwd),
        Waypoint::rest(v3(0.0, 0.0, 0.0), PI),
    ];
    ManeuverRecipe::new("split_s", wps)
}

/// Direction reversal on a straight line: two coinciding waypoints with
/// velocity `+speed` / `-speed` along x and yaw 0 / pi.
///
/// Assumed: start and end hover 8 m before the turn point.
pub fn diff_thrust_turn(speed: f64) -> ManeuverRecipe {
    let p = v3(8.0, 0.0, 0.0);
    let wps = vec![
        Waypoint::rest(v3(0.0, 0.0, 0.0), 0.0),
        Waypoint::new(p, 0.0).with_velocity(v3(speed, 0.0, 0.0)),
        Waypoint::new(p, PI).with_velocity(v3(-speed, 0.0, 0.0)),
        Waypoint::rest(v3(0.0, 0.0, 0.0), PI),
    ];
    ManeuverRecipe::new("diff_thrust_turn", wps)
}

/// Rest to rest along x over `dist` meters; yaw values are used as given.
pub fn hover_to_hover(dist: f64, psi_start: f64, psi_end: f64) -> Result<ManeuverRecipe> {
    if !(dist.is_finite() && dist > 0.0 && psi_start.is_finite() && psi_end.is_finite()) {
        return Err(Error::ManeuverParam(format!(
            "hover_to_hover needs dist > 0 and finite yaw, got {dist}, {psi_start}, {psi_end}"
        )));
    }
    let wps = vec![
        Waypoint::rest(Vector3::zeros(), psi_start),
        Waypoint::rest(v3(dist, 0.0, 0.0), psi_end),
    ];
    Ok(ManeuverRecipe::new("hover_to_hover", wps))
}

/// Unwrapped end yaw reached from `psi_start` by the minimal rotation.
///
/// Half-turn ties go toward zero from a nonzero start and follow the sign of
/// `psi_end` from a zero start, so mirrored problems get mirrored yaw.
pub fn minimal_rotation_end(psi_start: f64, psi_end: f64) -> f64 {
    let mut d = wrap_pi(psi_end - psi_start);
    if (d.abs() - PI).abs() < 1e-12 {
        let s = if psi_start != 0.0 { -psi_start.signum() } else { psi_end.signum() };
        d = s * PI;
    }
    psi_start + d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    Coordinated,
    KnifeEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub position: Vector3<f64>,
    /// Flight direction through the gate window.
    pub normal: Vector3<f64>,
    pub mode: GateMode,
}

/// Start and end hover at the origin with one direction-constrained
/// waypoint per gate. Yaw follows the gate normal (plus pi/2 in knife-edge),
/// unwrapped along the course.
pub fn race_recipe(gates: &[Gate]) -> Result<ManeuverRecipe> {
    if gates.is_empty() {
        return Err(Error::ManeuverParam("race needs at least one gate".into()));
    }
    let mut wps = vec![Waypoint::rest(Vector3::zeros(), 0.0)];
    let mut prev = 0.0;
    for (i, g) in gates.iter().enumerate() {
        let n = g.normal.norm();
        if !(n > 1e-12 && n.is_finite()) {
            return Err(Error::ManeuverParam(format!("gate {i} has a zero normal")));
        }
        let heading = g.normal.y.atan2(g.normal.x);
        let target = match g.mode {
            GateMode::Coordinated => heading,
            GateMode::KnifeEdge => heading + FRAC_PI_2,
        };
        let yaw = prev + wrap_pi(target - prev);
        prev = yaw;
        wps.push(Waypoint::new(g.position, yaw).with_direction(g.normal / n));
    }
    let end_yaw = wrap_pi(-prev) + prev;
    wps.push(Waypoint::rest(Vector3::zeros(), end_yaw));
    Ok(ManeuverRecipe::new("race", wps))
}

/// Representative four-gate course; the last gate is passed in knife-edge.
pub fn race_course() -> Vec<Gate> {
    let g = |x, y, z, nx, ny, mode| Gate {
        position: v3(x, y, z),
        normal: v3(nx, ny, 0.0),
        mode,
    };
    vec![
        g(6.0, 0.0, -1.5, 1.0, 0.0, GateMode::Coordinated),
        g(11.0, 6.0, -1.5, 0.0, 1.0, GateMode::Coordinated),
        g(5.0, 11.0, -2.0, -1.0, 0.0, GateMode::Coordinated),
        g(-2.0, 5.0, -1.5, 0.0, -1.0, GateMode::KnifeEdge),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_positions_on_circle() {
        let r = loop_recipe(1.0, 6.0);
        assert_eq!(r.waypoints.len(), 7);
        let center = v3(0.0, 0.0, -1.0);
        for w in &r.waypoints[1..6] {
            assert!(((w.position - center).norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(r.waypoints[1].position, r.waypoints[5].position);
        assert!((r.waypoints[3].position - v3(0.0, 0.0, -2.0)).norm() < 1e-15);
        assert!(r.waypoints[0].is_rest() && r.waypoints[6].is_rest());
    }

    #[test]
    fn diff_thrust_turn_pair() {
        let r = diff_thrust_turn(8.0);
        let (a, b) = (&r.waypoints[1], &r.waypoints[2]);
        assert_eq!(a.position, b.position);
        assert_eq!((a.yaw, b.yaw), (0.0, PI));
        assert_eq!(a.velocity, crate::minsnap::VelocityConstraint::Fixed { value: v3(8.0, 0.0, 0.0) });
        assert_eq!(b.velocity, crate::minsnap::VelocityConstraint::Fixed { value: v3(-8.0, 0.0, 0.0) });
    }

    #[test]
    fn hover_to_hover_endpoints() {
        let r = hover_to_hover(6.0, 0.0, PI).unwrap();
        assert_eq!(r.waypoints[0].position, Vector3::zeros());
        assert_eq!(r.waypoints[1].position, v3(6.0, 0.0, 0.0));
        assert_eq!((r.waypoints[0].yaw, r.waypoints[1].yaw), (0.0, PI));
        assert!(hover_to_hover(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn minimal_rotation_is_mirror_consistent() {
        let grid: Vec<f64> = (0..9).map(|i| -PI + i as f64 * PI / 4.0).collect();
        for &s in &grid {
            for &e in &grid {
                let d = minimal_rotation_end(s, e) - s;
                assert!(d.abs() <= PI + 1e-12);
                assert!(((d - (e - s)) / (2.0 * PI)).fract().abs() < 1e-9
                    || (((d - (e - s)) / (2.0 * PI)).fract().abs() - 1.0).abs() < 1e-9);
                let dm = minimal_rotation_end(-s, -e) + s;
                assert!((dm + d).abs() < 1e-12, "({s}, {e}): {d} vs {dm}");
            }
        }
    }

    #[test]
    fn race_single_gate() {
        let r = race_recipe(&[Gate {
            position: v3(3.0, 1.0, -1.0),
            normal: v3(0.0, 2.0, 0.0),
            mode: GateMode::Coordinated,
        }])
        .unwrap();
        assert_eq!(r.waypoints.len(), 3);
        match r.waypoints[1].velocity {
            crate::minsnap::VelocityConstraint::Direction { unit } => {
                assert!((unit - v3(0.0, 1.0, 0.0)).norm() < 1e-15)
            }
            _ => panic!("expected a direction constraint"),
        }
        assert!((r.waypoints[1].yaw - FRAC_PI_2).abs() < 1e-15);
        assert!(race_recipe(&[]).is_err());
        let zero = Gate { normal: Vector3::zeros(), ..race_course()[0] };
        assert!(race_recipe(&[zero]).is_err());
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(ManeuverName::parse("barrel_roll"), Err(Error::UnknownManeuver(_))));
        for n in MANEUVER_NAMES {
            assert_eq!(ManeuverName::parse(n).unwrap().as_str(), n);
        }
    }

    #[test]
    fn recipe_json_round_trip() {
        let r = loop_recipe(1.0, 6.0);
        assert_eq!(ManeuverRecipe::from_json(&r.to_json()).unwrap(), r);
        let text = r#"{"name":"mini","waypoints":[{"position":[0,0,0],"yaw":0},{"position":[1,0,0],"yaw":0.5}]}"#;
        let m = ManeuverRecipe::from_json(text).unwrap();
        assert_eq!(m.mu_psi, DEFAULT_MU_PSI);
        assert_eq!(m.total_time, None);
    }
}
