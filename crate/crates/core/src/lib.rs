//! Aerobatic trajectory generation for a tailsitter flying-wing aircraft.
//!
//! Trajectories are planned as minimum-snap piecewise polynomials in the flat
//! output space (position and yaw). The differential flatness transform in
//! [`flatness`] recovers attitude, angular rates and the motor speeds and flap
//! deflections required to fly them, which [`feasibility`] checks against the
//! actuator envelope. [`simulator`] integrates the full equations of motion
//! and serves as an independent check of the transform.
//!
//! The world frame has z pointing down; see [`vehicle`] for all frame and
//! sign conventions.

pub mod cli;
pub mod error;
pub mod feasibility;
pub mod flatness;
pub mod io;
pub mod maneuvers;
pub mod minsnap;
pub mod rotation;
pub mod simulator;
pub mod vehicle;

pub use error::{Error, Result};
pub use flatness::{flat_to_full, BranchState, FlatSample, FullStateInput};
pub use minsnap::{PiecewisePolynomialTrajectory, TimeAllocation, Waypoint};
pub use vehicle::{ControlInput, VehicleParams, VehicleState};
