use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the planning, transform, and simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),

    #[error("parameter file {path}: {message}")]
    ParamFile { path: PathBuf, message: String },

    #[error("degenerate force at roll/pitch resolution: {0}")]
    DegenerateForce(String),

    #[error("Euler angle degeneracy: |cos(roll)| = {0:e}")]
    EulerDegeneracy(f64),

    #[error("singular flap effectiveness (condition number {0:e})")]
    SingularFlapEffectiveness(f64),

    #[error("singular differential-thrust gain")]
    SingularThrustGain,

    #[error("singular constraint system: {0}")]
    SingularConstraints(String),

    #[error("invalid waypoint list: {0}")]
    InvalidWaypoints(String),

    #[error("invalid time allocation: {0}")]
    InvalidTimeAllocation(String),

    #[error("time {time} s outside trajectory range [0, {duration}] s")]
    TimeOutOfRange { time: f64, duration: f64 },

    #[error("no feasible scale in [{lo}, {hi}]")]
    NothingFeasible {
        lo: f64,
        hi: f64,
        profile: Vec<(f64, bool)>,
    },

    #[error("unknown maneuver `{0}`")]
    UnknownManeuver(String),

    #[error("maneuver parameter out of range: {0}")]
    ManeuverParam(String),

    #[error("misaligned time grids: {0}")]
    MisalignedGrids(String),

    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
