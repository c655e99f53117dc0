//! Gantry motion: kinematics and workspace limits, grasp waypoint
//! construction, RRT-Connect planning through the occupancy grid, and
//! trapezoidal trajectory generation.

pub mod gantry;
pub mod planner;
pub mod trajectory;

pub use gantry::{forward_kinematics, gantry_ik, make_waypoints, GantryModel, JointState, Waypoints};
pub use planner::{plan_path, PlanReport, PlannerParams};
pub use trajectory::{trapezoid_profile, Trajectory, ACCEL_CAP_FRACTION, VELOCITY_CAP_FRACTION};
