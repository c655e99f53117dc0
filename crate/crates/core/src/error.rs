//! Crate-wide error type. Each variant corresponds to one stable CLI exit
//! class, so keep the set small and the boundaries crisp.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input: unreadable files, bad manifests,
    /// dimension mismatches, invalid calibration.
    #[error("input error: {0}")]
    Input(String),

    /// Scene contains no leaf that can be selected.
    #[error("no viable leaf: {0}")]
    NoViableLeaf(String),

    /// The selected leaf exposes no valid grasp candidate.
    #[error("no graspable point on leaf {leaf_id}")]
    NoGraspablePoint { leaf_id: u32 },

    /// A requested pose lies outside the gantry travel.
    #[error("workspace limit violated on {axis}: {value:.4} outside [{min:.4}, {max:.4}]")]
    Workspace {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// The motion planner exhausted its attempts/budget, or was handed a
    /// start/goal in collision.
    #[error("planning failed: {0}")]
    PlanningFailure(String),

    /// Geometry too degenerate to process (e.g. collinear points handed to
    /// the plane fit).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// Reload state machine driven out of protocol order.
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Input(format!("image: {e}"))
    }
}
