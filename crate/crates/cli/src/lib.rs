//! Library surface of the `leafgrasp` CLI: the subcommand implementations
//! plus the stable error-to-exit-code mapping. Kept as a library so
//! integration tests drive the commands in-process.

pub mod bench;
pub mod plan;
pub mod viz;

use leafgrasp_core::Error;

/// Stable exit codes, one per error class (0 = success, 1 = unexpected
/// internal failure).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Input(_) => 2,
        Error::NoViableLeaf(_) => 3,
        Error::NoGraspablePoint { .. } => 4,
        Error::Workspace { .. } => 5,
        Error::PlanningFailure(_) => 6,
        Error::Degenerate(_) => 7,
        Error::Protocol(_) => 8,
    }
}

pub fn error_class(err: &Error) -> &'static str {
    match err {
        Error::Input(_) => "input",
        Error::NoViableLeaf(_) => "no_viable_leaf",
        Error::NoGraspablePoint { .. } => "no_graspable_point",
        Error::Workspace { .. } => "workspace",
        Error::PlanningFailure(_) => "planning_failure",
        Error::Degenerate(_) => "degenerate_geometry",
        Error::Protocol(_) => "protocol_violation",
    }
}

/// One-line machine-readable error record (written to stderr on failure).
pub fn error_record(err: &Error) -> String {
    serde_json::json!({
        "error": { "class": error_class(err), "message": err.to_string() }
    })
    .to_string()
}
