//! Grasp-point scoring on a selected leaf: local flatness, top-down
//! approach alignment, edge margin, image-frame accessibility, and a stem
//! penalty near the estimated petiole junction, combined multiplicatively
//! into a single arg-max.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{reproject_pixel, DepthImage, StereoRig};
use crate::error::{Error, Result};
use crate::perception::{plane_fit_normal, LeafInstance, SceneField};

/// Radius (px) of the pixel neighborhood used for the winner's local plane
/// fit.
pub const LOCAL_NORMAL_RADIUS_PX: f64 = 15.0;

/// Pixel-to-metric conversion source. The only supported rule derives the
/// scale from the candidate's own depth: `mm = px * depth * 1000 / fx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PxToMmSource {
    #[default]
    CandidateDepth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspConfig {
    /// Flatness weight.
    pub w_f: f64,
    /// Approach-alignment weight.
    pub w_a: f64,
    /// Edge-margin weight.
    pub w_e: f64,
    /// Accessibility weight.
    pub w_acc: f64,
    /// Flatness exponential scale.
    pub alpha: f64,
    /// Edge margins (mm): below the minimum scores 0, above the maximum
    /// saturates at 1.
    pub edge_min_mm: f64,
    pub edge_max_mm: f64,
    /// Multiplicative penalty applied inside the stem region.
    pub stem_penalty_value: f64,
    /// Radius (px) of the penalized disc around the petiole junction.
    pub stem_radius_px: f64,
    /// Candidate sampling stride (px); 1 evaluates every interior pixel.
    pub candidate_stride_px: u32,
    /// Depth gradients (m/px) are multiplied by this factor before the
    /// flatness norm, so a 1 cm/px slope yields argument 1.
    pub gradient_scale: f64,
    pub px_to_mm_source: PxToMmSource,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            w_f: 0.25,
            w_a: 0.40,
            w_e: 0.20,
            w_acc: 0.15,
            alpha: 5.0,
            edge_min_mm: 5.0,
            edge_max_mm: 20.0,
            stem_penalty_value: 0.7,
            stem_radius_px: 25.0,
            candidate_stride_px: 4,
            gradient_scale: 100.0,
            px_to_mm_source: PxToMmSource::CandidateDepth,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_f > 0.0 && self.w_a > 0.0 && self.w_e > 0.0 && self.w_acc > 0.0) {
            return Err(Error::Input("grasp weights must be positive".into()));
        }
        let sum = self.w_f + self.w_a + self.w_e + self.w_acc;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "grasp weights must sum to 1 (got {sum})"
            )));
        }
        if self.edge_min_mm >= self.edge_max_mm {
            return Err(Error::Input("edge_min_mm must be below edge_max_mm".into()));
        }
        if !(0.0..1.0).contains(&self.stem_penalty_value) {
            return Err(Error::Input("stem_penalty_value must be in [0, 1)".into()));
        }
        if self.candidate_stride_px == 0 {
            return Err(Error::Input("candidate_stride_px must be >= 1".into()));
        }
        Ok(())
    }
}

/// The fixed top-down approach direction (world frame).
pub fn approach_vector() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -1.0)
}

/// Millimeters per pixel at a given depth: `depth * 1000 / fx`.
pub fn px_to_mm(rig: &StereoRig, depth_m: f64) -> f64 {
    depth_m * 1000.0 / rig.fx
}

/// Scored candidate as kept in the score map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub pixel: (u32, u32),
    pub flatness: f64,
    pub approach: f64,
    pub edge: f64,
    pub accessibility: f64,
    pub stem_penalty: f64,
    pub total: f64,
}

/// The winning candidate with its 3D information.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub pixel: (u32, u32),
    /// World-frame grasp point (meters).
    pub point3d: [f64; 3],
    pub flatness: f64,
    pub approach: f64,
    pub edge: f64,
    pub accessibility: f64,
    pub stem_penalty: f64,
    pub total: f64,
    /// Local surface normal from the neighborhood plane fit.
    pub local_normal: [f64; 3],
    /// Diagnostic: |normal · ẑ|, the prose variant of the approach score.
    /// Reported only; the arg-max uses the camera-ray alignment.
    pub normal_alignment: f64,
    /// In-image angle (rad) of the leaf's minor axis; drives the wrist roll
    /// so the jaws close across the blade.
    pub minor_axis_rad: f64,
}

impl GraspCandidate {
    pub fn point(&self) -> Point3<f64> {
        Point3::new(self.point3d[0], self.point3d[1], self.point3d[2])
    }
}

/// Arg-max result plus the full score map (one entry per evaluated
/// candidate, holding the same values the selection used).
#[derive(Debug, Clone)]
pub struct GraspSelection {
    pub best: GraspCandidate,
    pub entries: Vec<ScoreEntry>,
    pub junction_px: (i32, i32),
    pub plant_center_px: (f64, f64),
}

/// Local flatness from central-difference depth gradients; `None` when any
/// pixel of the 3x3 neighborhood is missing or carries invalid depth (such
/// candidates are excluded rather than scored 0).
pub fn flatness(depth: &DepthImage, x: u32, y: u32, cfg: &GraspConfig) -> Option<f64> {
    let (x, y) = (x as usize, y as usize);
    if x == 0 || y == 0 || x + 1 >= depth.width() || y + 1 >= depth.height() {
        return None;
    }
    for dy in 0..3 {
        for dx in 0..3 {
            if !depth.is_valid(x + dx - 1, y + dy - 1) {
                return None;
            }
        }
    }
    let gx = (depth.at(x + 1, y) as f64 - depth.at(x - 1, y) as f64) / 2.0 * cfg.gradient_scale;
    let gy = (depth.at(x, y + 1) as f64 - depth.at(x, y - 1) as f64) / 2.0 * cfg.gradient_scale;
    Some((-cfg.alpha * (gx * gx + gy * gy).sqrt()).exp())
}

/// Alignment of the camera-to-point ray with the vertical axis:
/// `|v · ẑ| / |v|`.
pub fn approach_alignment(rig: &StereoRig, point_world: &Point3<f64>) -> Result<f64> {
    let o = rig.camera_origin_world();
    let v = point_world - o;
    let norm = (v.x * v.x + v.y * v.y + v.z * v.z).sqrt();
    if norm <= 0.0 {
        return Err(Error::Degenerate(
            "camera-to-point vector has zero length".into(),
        ));
    }
    Ok(v.z.abs() / norm)
}

/// Image-frame accessibility: distance from the image center (normalized by
/// the half-diagonal) blended with the viewing angle off the camera axis.
pub fn accessibility(rig: &StereoRig, u: f64, v: f64, point_world: &Point3<f64>) -> f64 {
    let du = u - rig.width as f64 / 2.0;
    let dv = v - rig.height as f64 / 2.0;
    let d = (du * du + dv * dv).sqrt();
    let d_max = ((rig.width * rig.width + rig.height * rig.height) as f64).sqrt() / 2.0;
    let cam = rig.world_to_camera(*point_world);
    let norm = (cam.x * cam.x + cam.y * cam.y + cam.z * cam.z).sqrt();
    let cos_theta = if norm > 0.0 {
        (cam.z / norm).clamp(0.0, 1.0)
    } else {
        0.0
    };
    0.7 * (1.0 - d / d_max) + 0.3 * cos_theta
}

/// Edge-margin score from a metric boundary distance.
pub fn edge_margin_from_mm(d_edge_mm: f64, cfg: &GraspConfig) -> f64 {
    if d_edge_mm < cfg.edge_min_mm {
        0.0
    } else if d_edge_mm <= cfg.edge_max_mm {
        d_edge_mm / cfg.edge_max_mm
    } else {
        1.0
    }
}

/// Edge-margin score at a pixel of the instance mask; requires the pixel to
/// lie inside the mask.
pub fn edge_margin(
    instance: &LeafInstance,
    pixel: (u32, u32),
    px_to_mm: f64,
    cfg: &GraspConfig,
) -> Result<f64> {
    let (x, y) = (pixel.0 as usize, pixel.1 as usize);
    if x >= instance.mask.width() || y >= instance.mask.height() || !instance.mask.at(x, y) {
        return Err(Error::Input(format!(
            "pixel ({}, {}) outside leaf {} mask",
            pixel.0, pixel.1, instance.id
        )));
    }
    let d_mm = instance.inside_dt.at(x, y) as f64 * px_to_mm;
    Ok(edge_margin_from_mm(d_mm, cfg))
}

/// Contour point nearest the plant-center estimate; the stand-in for the
/// petiole junction. Ties keep the earliest contour point.
pub fn petiole_junction(instance: &LeafInstance, plant_center_px: (f64, f64)) -> (i32, i32) {
    let mut best = instance.contour.first().copied().unwrap_or((0, 0));
    let mut best_d = f64::INFINITY;
    for &(cx, cy) in &instance.contour {
        let dx = cx as f64 + 0.5 - plant_center_px.0;
        let dy = cy as f64 + 0.5 - plant_center_px.1;
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = (cx, cy);
        }
    }
    best
}

/// Stem-region penalty: fixed value inside `stem_radius_px` of the
/// junction, zero elsewhere.
pub fn stem_penalty(junction: (i32, i32), pixel: (u32, u32), cfg: &GraspConfig) -> f64 {
    let dx = pixel.0 as f64 - junction.0 as f64;
    let dy = pixel.1 as f64 - junction.1 as f64;
    if dx * dx + dy * dy <= cfg.stem_radius_px * cfg.stem_radius_px {
        cfg.stem_penalty_value
    } else {
        0.0
    }
}

/// The combined score of one candidate.
pub fn combine_scores(cfg: &GraspConfig, f: f64, a: f64, e: f64, acc: f64, pen: f64) -> f64 {
    (cfg.w_f * f + cfg.w_a * a + cfg.w_e * e + cfg.w_acc * acc) * (1.0 - pen)
}

/// In-image angle of the mask's minor principal axis, in [0, π). Isotropic
/// masks (a disc) return 0.
pub fn mask_minor_axis(instance: &LeafInstance) -> f64 {
    let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0, 0.0);
    let (cx, cy) = instance.mask_centroid_px;
    let mut n = 0usize;
    for (x, y, &m) in instance.mask.iter_cells() {
        if m {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let (sxx, sxy, syy) = (sxx / n as f64, sxy / n as f64, syy / n as f64);
    let spread = ((sxx - syy) * 0.5).hypot(sxy);
    if spread < 1e-9 * (sxx + syy).max(1e-30) {
        return 0.0;
    }
    let major = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let minor = major + std::f64::consts::FRAC_PI_2;
    minor.rem_euclid(std::f64::consts::PI)
}

/// Score candidates on a stride grid inside the mask and return the
/// arg-max with the full score map. Candidates need valid depth in their
/// full 3x3 neighborhood. Ties break toward larger edge margin, then larger
/// flatness, then row-major pixel order.
pub fn select_grasp_point(
    instance: &LeafInstance,
    depth: &DepthImage,
    rig: &StereoRig,
    field: &SceneField,
    cfg: &GraspConfig,
) -> Result<GraspSelection> {
    let plant_center_px = field.plant_center_px.unwrap_or(instance.mask_centroid_px);
    let junction = petiole_junction(instance, plant_center_px);
    let stride = cfg.candidate_stride_px as usize;

    let mut entries = Vec::new();
    let mut best: Option<(usize, Point3<f64>)> = None;
    let mut y = 0usize;
    while y < instance.mask.height() {
        let mut x = 0usize;
        while x < instance.mask.width() {
            if instance.mask.at(x, y) {
                if let Some(entry_and_point) =
                    score_candidate(instance, depth, rig, cfg, junction, x as u32, y as u32)?
                {
                    let (entry, point) = entry_and_point;
                    let better = match &best {
                        None => true,
                        Some((idx, _)) => {
                            let b: &ScoreEntry = &entries[*idx];
                            entry.total > b.total
                                || (entry.total == b.total
                                    && (entry.edge > b.edge
                                        || (entry.edge == b.edge && entry.flatness > b.flatness)))
                        }
                    };
                    entries.push(entry);
                    if better {
                        best = Some((entries.len() - 1, point));
                    }
                }
            }
            x += stride;
        }
        y += stride;
    }

    let Some((best_idx, point)) = best else {
        return Err(Error::NoGraspablePoint {
            leaf_id: instance.id,
        });
    };
    let e = entries[best_idx].clone();

    // Local normal around the winner; whole-leaf normal as the fallback for
    // degenerate neighborhoods.
    let nbr = instance.cloud_indices_near(e.pixel, LOCAL_NORMAL_RADIUS_PX);
    let pts: Vec<Point3<f64>> = nbr.iter().map(|&i| instance.cloud[i]).collect();
    let local_normal = match plane_fit_normal(&pts) {
        Ok((n, _)) => n,
        Err(_) => instance.mean_normal,
    };
    let normal_alignment = local_normal.z.abs();
    let minor_axis_rad = mask_minor_axis(instance);

    Ok(GraspSelection {
        best: GraspCandidate {
            pixel: e.pixel,
            point3d: [point.x, point.y, point.z],
            flatness: e.flatness,
            approach: e.approach,
            edge: e.edge,
            accessibility: e.accessibility,
            stem_penalty: e.stem_penalty,
            total: e.total,
            local_normal: [local_normal.x, local_normal.y, local_normal.z],
            normal_alignment,
            minor_axis_rad,
        },
        entries,
        junction_px: junction,
        plant_center_px,
    })
}

fn score_candidate(
    instance: &LeafInstance,
    depth: &DepthImage,
    rig: &StereoRig,
    cfg: &GraspConfig,
    junction: (i32, i32),
    x: u32,
    y: u32,
) -> Result<Option<(ScoreEntry, Point3<f64>)>> {
    let Some(f) = flatness(depth, x, y, cfg) else {
        return Ok(None);
    };
    let z = depth.at(x as usize, y as usize) as f64;
    let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
    let cam = reproject_pixel(rig, u, v, z)?;
    let world = rig.camera_to_world(cam);

    let a = approach_alignment(rig, &world)?;
    let acc = accessibility(rig, u, v, &world);
    let e = edge_margin(instance, (x, y), px_to_mm(rig, z), cfg)?;
    let pen = stem_penalty(junction, (x, y), cfg);
    let total = combine_scores(cfg, f, a, e, acc, pen);
    Ok(Some((
        ScoreEntry {
            pixel: (x, y),
            flatness: f,
            approach: a,
            edge: e,
            accessibility: acc,
            stem_penalty: pen,
            total,
        },
        world,
    )))
}
