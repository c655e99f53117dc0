//! Collision-checked path planning over the occupancy grid.
//!
//! The tool is modeled as a vertical capsule from the tool tip up to the
//! top of the z travel (everything above the tip rides with the carriage).
//! Planning runs in the three prismatic dimensions; the wrist is linearly
//! interpolated along the resulting path, which is sound for a tool that
//! stays vertical.
//!
//! A straight start-to-goal segment is tried first; otherwise RRT-Connect
//! grows bidirectional trees with deterministic per-attempt seeds. Edge
//! checks sample at a fixed step and demand an extra half-step of
//! clearance, so any point of a returned path (not just the checked
//! samples) keeps at least the base margin. Re-validation at arbitrary
//! finer resolution therefore cannot find a violation.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::gantry::{GantryModel, JointState};
use crate::perception::SceneField;

/// Tool body approximation: capsule radius around the vertical axis.
pub const TOOL_CAPSULE_RADIUS_M: f64 = 0.03;

/// Occupied voxels inside this XY radius of the goal tool column, up to
/// [`GOAL_EXEMPTION_ZSLACK_M`] above the goal tip, are exempted from
/// collision: the tool must enter the target leaf's own column to hover
/// over the grasp point, including when the blade is steeply tilted.
/// Obstacles higher above the goal still block it.
pub const GOAL_EXEMPTION_RADIUS_M: f64 = 0.04;
pub const GOAL_EXEMPTION_ZSLACK_M: f64 = 0.04;

/// RRT extension step (m).
const EXTEND_STEP_M: f64 = 0.1;

/// Greedy shortcut-smoothing iterations.
const SHORTCUT_ITERATIONS: u32 = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Edge-check resolution as a fraction of the workspace diagonal.
    pub longest_valid_segment_fraction: f64,
    /// Total wall-clock budget across attempts (s).
    pub planning_time_s: f64,
    /// Deterministically seeded attempts.
    pub attempts: u32,
    /// Connection tolerance between the two trees (m).
    pub goal_tolerance_m: f64,
    /// Trial identifier; attempt seeds are `trial_seed * attempts + index`
    /// so failures replay exactly.
    pub trial_seed: u64,
    /// Deterministic iteration cap per attempt (the wall clock is only a
    /// safety stop).
    pub max_iterations_per_attempt: u32,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            longest_valid_segment_fraction: 0.01,
            planning_time_s: 10.0,
            attempts: 10,
            goal_tolerance_m: 1e-3,
            trial_seed: 0,
            max_iterations_per_attempt: 2000,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.longest_valid_segment_fraction > 0.0
            && self.longest_valid_segment_fraction <= 1.0)
        {
            return Err(Error::Input(
                "longest_valid_segment_fraction must be in (0, 1]".into(),
            ));
        }
        if self.attempts < 1 {
            return Err(Error::Input("attempts must be >= 1".into()));
        }
        if self.planning_time_s <= 0.0 || self.goal_tolerance_m <= 0.0 {
            return Err(Error::Input(
                "planning_time_s and goal_tolerance_m must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Planner output: the waypoint list plus deterministic attempt statistics.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub waypoints: Vec<JointState>,
    /// 1-based index of the successful attempt; 0 for a straight-line
    /// connection that needed no sampling.
    pub successful_attempt: u32,
    pub straight_line: bool,
    pub nodes_explored: usize,
}

/// Vertical-capsule vs voxel-grid collision queries, indexed by column for
/// locality.
pub struct CollisionChecker {
    columns: HashMap<(i32, i32), Vec<f64>>,
    voxel_size: f64,
    z_top: f64,
    tip_dz: f64,
    /// radius + voxel half-diagonal: the clearance the physical capsule
    /// needs from a voxel center.
    base_margin: f64,
}

impl CollisionChecker {
    /// Build the checker. `exempt` is the goal tool-tip position `(x, y,
    /// tip_z)`: voxels in its XY cylinder no higher than
    /// `tip_z + GOAL_EXEMPTION_ZSLACK_M` are dropped.
    pub fn new(
        field: &SceneField,
        model: &GantryModel,
        exempt: Option<(f64, f64, f64)>,
    ) -> Self {
        let voxel_size = field.occupancy.voxel_size();
        let half_diag = voxel_size * 3f64.sqrt() / 2.0;
        let mut columns: HashMap<(i32, i32), Vec<f64>> = HashMap::new();
        for v in field.occupancy.sorted_voxels() {
            let c = field.occupancy.center_of(v);
            if let Some((ex, ey, tip_z)) = exempt {
                let dx = c.x - ex;
                let dy = c.y - ey;
                if dx * dx + dy * dy <= GOAL_EXEMPTION_RADIUS_M * GOAL_EXEMPTION_RADIUS_M
                    && c.z <= tip_z + GOAL_EXEMPTION_ZSLACK_M
                {
                    continue;
                }
            }
            columns.entry((v[0], v[1])).or_default().push(c.z);
        }
        Self {
            columns,
            voxel_size,
            z_top: model.z_travel_m[1],
            tip_dz: model.tool_offset_m[2],
            base_margin: TOOL_CAPSULE_RADIUS_M + half_diag,
        }
    }

    /// Clearance the physical tool needs from any voxel center.
    pub fn base_margin(&self) -> f64 {
        self.base_margin
    }

    /// True when every voxel center stays at least `margin` away from the
    /// tool capsule axis at carriage position `q`.
    pub fn config_free(&self, q: &Vector3<f64>, margin: f64) -> bool {
        let tip_z = q.z + self.tip_dz;
        let reach = ((margin / self.voxel_size).ceil() as i32) + 1;
        let ci = (q.x / self.voxel_size).floor() as i32;
        let cj = (q.y / self.voxel_size).floor() as i32;
        let m2 = margin * margin;
        for i in ci - reach..=ci + reach {
            for j in cj - reach..=cj + reach {
                let Some(zs) = self.columns.get(&(i, j)) else {
                    continue;
                };
                let cx = (i as f64 + 0.5) * self.voxel_size;
                let cy = (j as f64 + 0.5) * self.voxel_size;
                let dxy2 = (cx - q.x).powi(2) + (cy - q.y).powi(2);
                if dxy2 >= m2 {
                    continue;
                }
                for &cz in zs {
                    let dz = (tip_z - cz).max(cz - self.z_top).max(0.0);
                    if dxy2 + dz * dz < m2 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Check a straight segment by sampling at most `step` apart, endpoints
    /// included.
    pub fn edge_free(&self, a: &Vector3<f64>, b: &Vector3<f64>, step: f64, margin: f64) -> bool {
        let len = (b - a).norm();
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let p = a + (b - a) * t;
            if !self.config_free(&p, margin) {
                return false;
            }
        }
        true
    }
}

struct Tree {
    nodes: Vec<Vector3<f64>>,
    parents: Vec<usize>,
}

impl Tree {
    fn new(root: Vector3<f64>) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![usize::MAX],
        }
    }

    fn nearest(&self, q: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn push(&mut self, p: Vector3<f64>, parent: usize) -> usize {
        self.nodes.push(p);
        self.parents.push(parent);
        self.nodes.len() - 1
    }

    fn branch(&self, mut idx: usize) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        while idx != usize::MAX {
            out.push(self.nodes[idx]);
            idx = self.parents[idx];
        }
        out.reverse();
        out
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

/// Plan a collision-free path from `q_s` to `q_g`. Straight-line first,
/// then seeded RRT-Connect attempts within the time budget; the returned
/// path is shortcut-smoothed and keeps the planner's conservative margin
/// everywhere.
pub fn plan_path(
    q_s: &JointState,
    q_g: &JointState,
    field: &SceneField,
    params: &PlannerParams,
    model: &GantryModel,
) -> Result<PlanReport> {
    model.validate()?;
    params.validate()?;
    model.check_limits(q_s)?;
    model.check_limits(q_g)?;

    let resolution = params.longest_valid_segment_fraction * model.workspace_diagonal();
    let step = resolution.min(field.occupancy.voxel_size()).max(1e-4);
    let goal_tip_z = q_g.q[2] + model.tool_offset_m[2];
    let checker = CollisionChecker::new(field, model, Some((q_g.q[0], q_g.q[1], goal_tip_z)));
    // Uniform margin: base clearance plus half an edge step, so every
    // intermediate point of a checked edge still clears the base margin.
    let margin = checker.base_margin() + step / 2.0;

    let start = Vector3::new(q_s.q[0], q_s.q[1], q_s.q[2]);
    let goal = Vector3::new(q_g.q[0], q_g.q[1], q_g.q[2]);
    if !checker.config_free(&start, margin) {
        return Err(Error::PlanningFailure(
            "start configuration in collision".into(),
        ));
    }
    if !checker.config_free(&goal, margin) {
        return Err(Error::PlanningFailure(
            "goal configuration in collision".into(),
        ));
    }

    if checker.edge_free(&start, &goal, step, margin) {
        return Ok(PlanReport {
            waypoints: vec![*q_s, *q_g],
            successful_attempt: 0,
            straight_line: true,
            nodes_explored: 0,
        });
    }

    let bounds = [model.x_travel_m, model.y_travel_m, model.z_travel_m];
    let deadline = Instant::now() + Duration::from_secs_f64(params.planning_time_s);
    for attempt in 0..params.attempts {
        let seed = params
            .trial_seed
            .wrapping_mul(params.attempts as u64)
            .wrapping_add(attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some((mut path, nodes)) = rrt_connect(
            &checker,
            start,
            goal,
            &bounds,
            params,
            step,
            margin,
            &mut rng,
            deadline,
        ) {
            shortcut(&checker, &mut path, step, margin, &mut rng);
            let waypoints = interpolate_wrist(&path, q_s, q_g);
            return Ok(PlanReport {
                waypoints,
                successful_attempt: attempt + 1,
                straight_line: false,
                nodes_explored: nodes,
            });
        }
        if Instant::now() >= deadline {
            return Err(Error::PlanningFailure(format!(
                "planning budget of {:.1} s exhausted after attempt {}",
                params.planning_time_s,
                attempt + 1
            )));
        }
    }
    Err(Error::PlanningFailure(format!(
        "no collision-free path in {} attempts",
        params.attempts
    )))
}

#[allow(clippy::too_many_arguments)]
fn rrt_connect(
    checker: &CollisionChecker,
    start: Vector3<f64>,
    goal: Vector3<f64>,
    bounds: &[[f64; 2]; 3],
    params: &PlannerParams,
    step: f64,
    margin: f64,
    rng: &mut ChaCha8Rng,
    deadline: Instant,
) -> Option<(Vec<Vector3<f64>>, usize)> {
    let mut tree_a = Tree::new(start);
    let mut tree_b = Tree::new(goal);
    let mut a_is_start = true;

    for iter in 0..params.max_iterations_per_attempt {
        if iter % 64 == 0 && Instant::now() >= deadline {
            return None;
        }
        let sample = Vector3::new(
            rng.random_range(bounds[0][0]..=bounds[0][1]),
            rng.random_range(bounds[1][0]..=bounds[1][1]),
            rng.random_range(bounds[2][0]..=bounds[2][1]),
        );
        if let Extend::Advanced(new_idx) | Extend::Reached(new_idx) =
            extend(&mut tree_a, &sample, checker, step, margin, params.goal_tolerance_m)
        {
            let target = tree_a.nodes[new_idx];
            // Greedily connect the other tree toward the new node.
            loop {
                match extend(&mut tree_b, &target, checker, step, margin, params.goal_tolerance_m)
                {
                    Extend::Reached(b_idx) => {
                        let nodes = tree_a.nodes.len() + tree_b.nodes.len();
                        let mut fwd = if a_is_start {
                            tree_a.branch(new_idx)
                        } else {
                            tree_b.branch(b_idx)
                        };
                        let bwd = if a_is_start {
                            tree_b.branch(b_idx)
                        } else {
                            tree_a.branch(new_idx)
                        };
                        fwd.extend(bwd.into_iter().rev());
                        fwd.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
                        return Some((fwd, nodes));
                    }
                    Extend::Advanced(_) => continue,
                    Extend::Trapped => break,
                }
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    None
}

fn extend(
    tree: &mut Tree,
    target: &Vector3<f64>,
    checker: &CollisionChecker,
    step: f64,
    margin: f64,
    tolerance: f64,
) -> Extend {
    let near_idx = tree.nearest(target);
    let near = tree.nodes[near_idx];
    let delta = target - near;
    let dist = delta.norm();
    if dist <= tolerance {
        return Extend::Reached(near_idx);
    }
    let new = if dist <= EXTEND_STEP_M {
        *target
    } else {
        near + delta * (EXTEND_STEP_M / dist)
    };
    if !checker.edge_free(&near, &new, step, margin) {
        return Extend::Trapped;
    }
    let idx = tree.push(new, near_idx);
    if (new - target).norm() <= tolerance {
        Extend::Reached(idx)
    } else {
        Extend::Advanced(idx)
    }
}

/// Greedy shortcutting: repeatedly try to splice random waypoint pairs with
/// a straight collision-free segment.
fn shortcut(
    checker: &CollisionChecker,
    path: &mut Vec<Vector3<f64>>,
    step: f64,
    margin: f64,
    rng: &mut ChaCha8Rng,
) {
    for _ in 0..SHORTCUT_ITERATIONS {
        if path.len() < 3 {
            return;
        }
        let i = rng.random_range(0..path.len() - 2);
        let j = rng.random_range(i + 2..path.len());
        if checker.edge_free(&path[i], &path[j], step, margin) {
            path.drain(i + 1..j);
        }
    }
}

/// Lift the 3D path back to joint space, interpolating the wrist linearly
/// in cumulative arc length.
fn interpolate_wrist(path: &[Vector3<f64>], q_s: &JointState, q_g: &JointState) -> Vec<JointState> {
    let mut lengths = vec![0.0f64];
    for w in path.windows(2) {
        let last = *lengths.last().unwrap();
        lengths.push(last + (w[1] - w[0]).norm());
    }
    let total = *lengths.last().unwrap();
    path.iter()
        .zip(lengths)
        .map(|(p, s)| {
            let t = if total > 0.0 { s / total } else { 1.0 };
            let mut q = [p.x, p.y, p.z, 0.0, 0.0, 0.0];
            for j in 3..6 {
                q[j] = q_s.q[j] + (q_g.q[j] - q_s.q[j]) * t;
            }
            JointState::new(q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{OccupancyGrid, SceneField};
    use nalgebra::Point3;

    fn empty_field() -> SceneField {
        SceneField {
            sdf: crate::grid::Grid::filled(4, 4, f32::INFINITY),
            occupancy: OccupancyGrid::empty(0.005),
            plant_center_px: None,
        }
    }

    /// Wall of occupied voxels across the workspace at x ≈ `wall_x`,
    /// spanning the full y/z box except a gap in y.
    fn wall_field(wall_x: f64, gap: Option<(f64, f64)>) -> SceneField {
        let voxel = 0.005;
        let mut pts = Vec::new();
        let mut y = 0.0;
        while y < 1.5 {
            let in_gap = gap.map(|(lo, hi)| y > lo && y < hi).unwrap_or(false);
            if !in_gap {
                let mut z = 0.0;
                while z < 1.2 {
                    pts.push(Point3::new(wall_x, y, z));
                    z += voxel;
                }
            }
            y += voxel;
        }
        SceneField {
            sdf: crate::grid::Grid::filled(4, 4, f32::INFINITY),
            occupancy: OccupancyGrid::from_points(pts.iter(), voxel),
            plant_center_px: None,
        }
    }

    fn q(x: f64, y: f64, z: f64) -> JointState {
        JointState::new([x, y, z, 0.0, 0.0, 0.0])
    }

    #[test]
    fn empty_scene_gives_straight_line() {
        let model = GantryModel::default();
        let params = PlannerParams::default();
        let report = plan_path(
            &q(0.2, 0.2, 0.8),
            &q(2.5, 1.2, 0.5),
            &empty_field(),
            &params,
            &model,
        )
        .unwrap();
        assert!(report.straight_line);
        assert_eq!(report.waypoints.len(), 2);
        assert_eq!(report.successful_attempt, 0);
    }

    #[test]
    fn wall_with_gap_routes_through_gap() {
        let model = GantryModel::default();
        let params = PlannerParams::default();
        // Gap away from the start-goal line, so the straight connection is
        // blocked and the planner has to find the opening.
        let field = wall_field(1.5, Some((0.2, 0.55)));
        let report = plan_path(&q(0.3, 0.75, 0.8), &q(2.7, 0.75, 0.8), &field, &params, &model)
            .expect("gap is wide enough to pass");
        assert!(!report.straight_line);
        // Re-validate at 10x finer resolution against the physical margin.
        let tip_z = 0.8 + model.tool_offset_m[2];
        let checker = CollisionChecker::new(&field, &model, Some((2.7, 0.75, tip_z)));
        let step = (params.longest_valid_segment_fraction * model.workspace_diagonal())
            .min(field.occupancy.voxel_size());
        for w in report.waypoints.windows(2) {
            assert!(checker.edge_free(
                &Vector3::new(w[0].q[0], w[0].q[1], w[0].q[2]),
                &Vector3::new(w[1].q[0], w[1].q[1], w[1].q[2]),
                step / 10.0,
                checker.base_margin(),
            ));
        }
        // Endpoints preserved exactly.
        assert_eq!(report.waypoints.first().unwrap().q[0], 0.3);
        assert_eq!(report.waypoints.last().unwrap().q[0], 2.7);
    }

    #[test]
    fn goal_inside_obstacle_is_rejected() {
        let model = GantryModel::default();
        let params = PlannerParams::default();
        let field = wall_field(1.5, None);
        // Goal tip right inside the wall (tip sits tool_offset below the
        // carriage z).
        let err = plan_path(&q(0.3, 0.75, 0.8), &q(1.5, 0.75, 0.8), &field, &params, &model)
            .unwrap_err();
        assert!(matches!(err, Error::PlanningFailure(_)));
        assert!(err.to_string().contains("goal"));
    }

    #[test]
    fn sealed_wall_fails_within_budget() {
        let model = GantryModel::default();
        let params = PlannerParams {
            max_iterations_per_attempt: 300,
            attempts: 3,
            ..PlannerParams::default()
        };
        let field = wall_field(1.5, None);
        let t0 = Instant::now();
        let err =
            plan_path(&q(0.3, 0.75, 0.8), &q(2.7, 0.75, 0.8), &field, &params, &model).unwrap_err();
        assert!(matches!(err, Error::PlanningFailure(_)));
        assert!(t0.elapsed().as_secs_f64() < params.planning_time_s);
    }

    #[test]
    fn identical_seeds_reproduce_identical_paths() {
        let model = GantryModel::default();
        let params = PlannerParams {
            trial_seed: 7,
            ..PlannerParams::default()
        };
        let field = wall_field(1.4, Some((0.2, 0.55)));
        let a = plan_path(&q(0.3, 0.75, 0.8), &q(2.7, 0.75, 0.8), &field, &params, &model).unwrap();
        let b = plan_path(&q(0.3, 0.75, 0.8), &q(2.7, 0.75, 0.8), &field, &params, &model).unwrap();
        assert_eq!(a.successful_attempt, b.successful_attempt);
        assert_eq!(a.waypoints.len(), b.waypoints.len());
        for (wa, wb) in a.waypoints.iter().zip(&b.waypoints) {
            assert_eq!(wa.q, wb.q);
        }
    }

    #[test]
    fn wrist_is_interpolated_monotonically() {
        let model = GantryModel::default();
        let params = PlannerParams::default();
        let field = wall_field(1.5, Some((0.6, 1.0)));
        let mut qs = q(0.3, 0.75, 0.8);
        let mut qg = q(2.7, 0.75, 0.8);
        qs.q[3] = -1.0;
        qg.q[3] = 1.0;
        let report = plan_path(&qs, &qg, &field, &params, &model).unwrap();
        let yaws: Vec<f64> = report.waypoints.iter().map(|w| w.q[3]).collect();
        assert_eq!(*yaws.first().unwrap(), -1.0);
        assert_eq!(*yaws.last().unwrap(), 1.0);
        for w in yaws.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }
}
