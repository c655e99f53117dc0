//! End-to-end orchestration: instances → leaf choice → grasp point →
//! waypoints → plan → trajectory, with a versioned, deterministic report.
//! Wall-clock stage timings are returned separately so reports stay
//! byte-reproducible.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grasp::{approach_vector, select_grasp_point, GraspCandidate, GraspSelection};
use crate::io::LoadedScene;
use crate::motion::gantry::{gantry_ik, make_waypoints, JointState, Waypoints};
use crate::motion::planner::plan_path;
use crate::motion::trajectory::{trapezoid_profile, Trajectory};
use crate::perception::{build_scene_field, extract_instances, LeafInstance, SceneField};
use crate::selection::{select_leaf, LeafScore};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Pose as stored in reports: position plus roll/pitch/yaw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseReport {
    pub position: [f64; 3],
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaypointReport {
    pub pre_grasp: PoseReport,
    pub grasp: PoseReport,
    pub retreat: PoseReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSummary {
    pub waypoint_count: usize,
    pub successful_attempt: u32,
    pub straight_line: bool,
    pub nodes_explored: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub duration_s: f64,
    pub segment_count: usize,
}

/// The grasp report written by `plan` and consumed by `viz`; deterministic
/// for a given scene + config + seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspReport {
    pub schema_version: u32,
    pub scene: String,
    pub leaf_id: u32,
    pub leaf_ranking: Vec<LeafScore>,
    pub grasp: GraspCandidate,
    pub approach_vector: [f64; 3],
    pub junction_px: [i32; 2],
    pub waypoints: WaypointReport,
    pub plan: PlanSummary,
    pub trajectory: TrajectorySummary,
    pub extraction_warnings: Vec<String>,
    pub config: PipelineConfig,
}

/// Per-stage wall clock (ms). Reported out of band.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub extract_ms: f64,
    pub field_ms: f64,
    pub select_ms: f64,
    pub grasp_ms: f64,
    pub plan_ms: f64,
    pub trajectory_ms: f64,
    pub total_ms: f64,
}

/// Everything one plan invocation produced; heavyweight intermediates are
/// kept for visualization and benchmarking.
pub struct PipelineOutput {
    pub report: GraspReport,
    pub trajectory: Trajectory,
    pub instances: Vec<LeafInstance>,
    pub field: SceneField,
    pub grasp_selection: GraspSelection,
    pub timings: StageTimings,
}

fn pose_report(pose: &nalgebra::Isometry3<f64>) -> PoseReport {
    let (roll, pitch, yaw) = pose.rotation.euler_angles();
    PoseReport {
        position: [
            pose.translation.vector.x,
            pose.translation.vector.y,
            pose.translation.vector.z,
        ],
        rpy: [roll, pitch, yaw],
    }
}

/// Run the full pipeline on a loaded scene. `trial_seed` keys the planner's
/// deterministic attempt seeds.
pub fn run_pipeline(
    scene: &LoadedScene,
    cfg: &PipelineConfig,
    scene_name: &str,
    trial_seed: u64,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let t_total = Instant::now();

    let t = Instant::now();
    let extraction = extract_instances(
        &scene.labels,
        &scene.depth,
        &scene.rig,
        scene.confidence.as_ref(),
    )?;
    let mut warnings: Vec<String> = extraction.warnings.iter().map(|w| format!("{w:?}")).collect();
    // Leaves whose centroid the gantry cannot hover over are never viable;
    // drop them before ranking so the fallback chain skips them.
    let mut instances = Vec::with_capacity(extraction.instances.len());
    for inst in extraction.instances {
        if leaf_reachable(&inst, cfg) {
            instances.push(inst);
        } else {
            warnings.push(format!(
                "UnreachableLeaf {{ id: {}, centroid: {:?} }}",
                inst.id,
                [inst.centroid3d.x, inst.centroid3d.y, inst.centroid3d.z]
            ));
        }
    }
    let extract_ms = ms(t);

    let t = Instant::now();
    let field = build_scene_field(&instances, &scene.rig, cfg.motion.voxel_size_m);
    let field_ms = ms(t);

    let t = Instant::now();
    let (_, ranking) = select_leaf(&instances, &field, &scene.rig, &cfg.selection)?;
    let select_ms = ms(t);

    // Walk the ranking until a leaf yields a graspable point.
    let t = Instant::now();
    let mut chosen: Option<(usize, GraspSelection)> = None;
    let mut first_err: Option<Error> = None;
    for score in &ranking {
        let idx = instances
            .iter()
            .position(|i| i.id == score.leaf_id)
            .expect("ranking refers to extracted instances");
        match select_grasp_point(&instances[idx], &scene.depth, &scene.rig, &field, &cfg.grasp) {
            Ok(sel) => {
                chosen = Some((idx, sel));
                break;
            }
            Err(e @ Error::NoGraspablePoint { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((chosen_idx, selection)) = chosen else {
        return Err(first_err.unwrap_or(Error::NoViableLeaf(
            "no leaf yielded a graspable point".into(),
        )));
    };
    let instance = &instances[chosen_idx];
    let grasp_ms = ms(t);

    let waypoints: Waypoints = make_waypoints(
        &selection.best,
        &cfg.motion.model,
        cfg.motion.pre_grasp_offset_m,
        cfg.motion.contact_interference_m,
    )?;
    let q_home = JointState::new(cfg.motion.home);
    cfg.motion.model.check_limits(&q_home)?;
    let q_pre = gantry_ik(&waypoints.pre_grasp, &cfg.motion.model)?;
    let q_grasp = gantry_ik(&waypoints.grasp, &cfg.motion.model)?;

    let t = Instant::now();
    let mut planner = cfg.motion.planner.clone();
    planner.trial_seed = trial_seed;
    let plan = plan_path(&q_home, &q_pre, &field, &planner, &cfg.motion.model)?;
    let plan_ms = ms(t);

    let t = Instant::now();
    let mut full_path = plan.waypoints.clone();
    full_path.push(q_grasp);
    full_path.push(q_pre); // retreat
    let trajectory = trapezoid_profile(&full_path, &cfg.motion.model)?;
    let trajectory_ms = ms(t);

    let report = GraspReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scene: scene_name.to_string(),
        leaf_id: instance.id,
        leaf_ranking: ranking,
        grasp: selection.best.clone(),
        approach_vector: approach_vector().into(),
        junction_px: [selection.junction_px.0, selection.junction_px.1],
        waypoints: WaypointReport {
            pre_grasp: pose_report(&waypoints.pre_grasp),
            grasp: pose_report(&waypoints.grasp),
            retreat: pose_report(&waypoints.retreat),
        },
        plan: PlanSummary {
            waypoint_count: plan.waypoints.len(),
            successful_attempt: plan.successful_attempt,
            straight_line: plan.straight_line,
            nodes_explored: plan.nodes_explored,
        },
        trajectory: TrajectorySummary {
            duration_s: trajectory.duration(),
            segment_count: full_path.len().saturating_sub(1),
        },
        extraction_warnings: warnings,
        config: cfg.clone(),
    };

    Ok(PipelineOutput {
        report,
        trajectory,
        instances,
        field,
        grasp_selection: selection,
        timings: StageTimings {
            extract_ms,
            field_ms,
            select_ms,
            grasp_ms,
            plan_ms,
            trajectory_ms,
            total_ms: ms(t_total),
        },
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// A leaf counts as reachable when the gantry carriage can hover above its
/// centroid and descend to contact within the z travel (tool offset
/// included).
fn leaf_reachable(inst: &LeafInstance, cfg: &PipelineConfig) -> bool {
    let c = inst.centroid3d;
    let m = &cfg.motion.model;
    let carriage_hover = c.z + cfg.motion.pre_grasp_offset_m - m.tool_offset_m[2];
    let carriage_contact = c.z - cfg.motion.contact_interference_m - m.tool_offset_m[2];
    c.x >= m.x_travel_m[0]
        && c.x <= m.x_travel_m[1]
        && c.y >= m.y_travel_m[0]
        && c.y <= m.y_travel_m[1]
        && carriage_hover <= m.z_travel_m[1]
        && carriage_contact >= m.z_travel_m[0]
}
