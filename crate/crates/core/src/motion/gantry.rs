//! 3P3R gantry model: three prismatic axes position the carriage, a ZYX
//! wrist (yaw about Z, then pitch about Y, then roll about X) orients the
//! tool. Identity wrist orientation points the tool straight down, the
//! natural pose for a top-down sampler.

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::GraspCandidate;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GantryModel {
    /// Prismatic travel ranges (m).
    pub x_travel_m: [f64; 2],
    pub y_travel_m: [f64; 2],
    pub z_travel_m: [f64; 2],
    /// Wrist ranges (rad).
    pub yaw_range_rad: [f64; 2],
    pub pitch_range_rad: [f64; 2],
    pub roll_range_rad: [f64; 2],
    /// Tool tip offset from the wrist flange, expressed in the flange
    /// frame (m). Points down for the default tool.
    pub tool_offset_m: [f64; 3],
    /// Per-joint velocity and acceleration limits (m/s, rad/s and m/s²,
    /// rad/s²) in joint order x, y, z, yaw, pitch, roll.
    pub v_max: [f64; 6],
    pub a_max: [f64; 6],
}

impl Default for GantryModel {
    fn default() -> Self {
        Self {
            x_travel_m: [0.0, 3.0],
            y_travel_m: [0.0, 1.5],
            z_travel_m: [0.0, 1.2],
            yaw_range_rad: [-std::f64::consts::PI, std::f64::consts::PI],
            pitch_range_rad: [-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
            roll_range_rad: [-std::f64::consts::PI, std::f64::consts::PI],
            tool_offset_m: [0.0, 0.0, -0.15],
            v_max: [1.0, 1.0, 1.0, 2.0, 2.0, 2.0],
            a_max: [1.0, 1.0, 1.0, 4.0, 4.0, 4.0],
        }
    }
}

const AXIS_NAMES: [&str; 6] = ["x", "y", "z", "yaw", "pitch", "roll"];

impl GantryModel {
    pub fn validate(&self) -> Result<()> {
        for (range, axis) in self.ranges().into_iter().zip(AXIS_NAMES) {
            if range[0] >= range[1] {
                return Err(Error::Input(format!("{axis} travel range not ordered")));
            }
        }
        if self.v_max.iter().chain(&self.a_max).any(|&v| v <= 0.0) {
            return Err(Error::Input("v_max / a_max must be positive".into()));
        }
        Ok(())
    }

    pub fn ranges(&self) -> [[f64; 2]; 6] {
        [
            self.x_travel_m,
            self.y_travel_m,
            self.z_travel_m,
            self.yaw_range_rad,
            self.pitch_range_rad,
            self.roll_range_rad,
        ]
    }

    pub fn check_limits(&self, q: &JointState) -> Result<()> {
        for ((value, range), axis) in q.q.iter().zip(self.ranges()).zip(AXIS_NAMES) {
            if *value < range[0] - 1e-12 || *value > range[1] + 1e-12 {
                return Err(Error::Workspace {
                    axis,
                    value: *value,
                    min: range[0],
                    max: range[1],
                });
            }
        }
        Ok(())
    }

    pub fn tool_offset(&self) -> Vector3<f64> {
        Vector3::from(self.tool_offset_m)
    }

    /// Diagonal of the prismatic workspace box (m).
    pub fn workspace_diagonal(&self) -> f64 {
        let dx = self.x_travel_m[1] - self.x_travel_m[0];
        let dy = self.y_travel_m[1] - self.y_travel_m[0];
        let dz = self.z_travel_m[1] - self.z_travel_m[0];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Joint configuration `(x, y, z, yaw, pitch, roll)` in meters/radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: [f64; 6],
}

impl JointState {
    pub fn new(q: [f64; 6]) -> Self {
        Self { q }
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::new(self.q[0], self.q[1], self.q[2])
    }

    pub fn wrist(&self) -> [f64; 3] {
        [self.q[3], self.q[4], self.q[5]]
    }
}

fn wrist_rotation(yaw: f64, pitch: f64, roll: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), roll)
}

/// Tool-tip pose in the world frame for a joint configuration.
pub fn forward_kinematics(q: &JointState, model: &GantryModel) -> Isometry3<f64> {
    let rot = wrist_rotation(q.q[3], q.q[4], q.q[5]);
    let tip = q.position() + rot * model.tool_offset();
    Isometry3::from_parts(
        Translation3::new(tip.x, tip.y, tip.z),
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}

/// Inverse kinematics for the tool-tip pose: ZYX Euler decomposition for
/// the wrist, prismatic remainder for the carriage. At the wrist
/// singularity (pitch = ±90°, yaw and roll collinear) the yaw = 0 branch is
/// returned. Errors name the violated travel axis.
pub fn gantry_ik(pose: &Isometry3<f64>, model: &GantryModel) -> Result<JointState> {
    let r = pose.rotation.to_rotation_matrix();
    let m = r.matrix();
    // R = Rz(yaw) Ry(pitch) Rx(roll): m[(2,0)] = -sin(pitch).
    let s_pitch = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let (yaw, pitch, roll);
    if 1.0 - s_pitch.abs() < 1e-12 {
        pitch = if s_pitch > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        yaw = 0.0;
        roll = if s_pitch > 0.0 {
            m[(0, 1)].atan2(m[(0, 2)])
        } else {
            (-m[(0, 1)]).atan2(-m[(0, 2)])
        };
    } else {
        pitch = s_pitch.asin();
        yaw = m[(1, 0)].atan2(m[(0, 0)]);
        roll = m[(2, 1)].atan2(m[(2, 2)]);
    }

    let rot = wrist_rotation(yaw, pitch, roll);
    let tip = Point3::from(pose.translation.vector);
    let carriage = tip - rot * model.tool_offset();
    let q = JointState::new([carriage.x, carriage.y, carriage.z, yaw, pitch, roll]);
    model.check_limits(&q)?;
    Ok(q)
}

/// The three grasp waypoint poses: hover above the point, descend to
/// contact, retreat back to the hover pose.
#[derive(Debug, Clone)]
pub struct Waypoints {
    pub pre_grasp: Isometry3<f64>,
    pub grasp: Isometry3<f64>,
    pub retreat: Isometry3<f64>,
}

/// Build the pre-grasp/grasp/retreat poses for a grasp candidate. The tool
/// axis stays vertical; the wrist yaw turns the jaws across the leaf's
/// minor axis. `pre_grasp_offset_m` raises the hover pose above the grasp
/// point, `contact_interference_m` presses the tip below the observed leaf
/// surface.
pub fn make_waypoints(
    grasp: &GraspCandidate,
    model: &GantryModel,
    pre_grasp_offset_m: f64,
    contact_interference_m: f64,
) -> Result<Waypoints> {
    let p = grasp.point();
    let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), grasp.minor_axis_rad);
    let pose_at = |z: f64| Isometry3::from_parts(Translation3::new(p.x, p.y, z), rot);

    let pre_grasp = pose_at(p.z + pre_grasp_offset_m);
    let grasp_pose = pose_at(p.z - contact_interference_m);
    // Both poses must be reachable; surface the workspace error here rather
    // than at execution time.
    gantry_ik(&pre_grasp, model)?;
    gantry_ik(&grasp_pose, model)?;
    Ok(Waypoints {
        retreat: pre_grasp,
        pre_grasp,
        grasp: grasp_pose,
    })
}
