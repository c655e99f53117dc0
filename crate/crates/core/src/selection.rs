//! Leaf ranking: clutter/isolation, distance and visibility scores combined
//! by a weighted sum, with a deterministic arg-max over the scene.

use serde::{Deserialize, Serialize};

use crate::camera::StereoRig;
use crate::error::{Error, Result};
use crate::perception::{visibility_ratio, LeafInstance, SceneField};

/// Extra outward offset (px) applied to the clearance sampling band so that
/// rasterized boundaries still saturate the clearance term on fully
/// isolated leaves.
pub const CLEARANCE_BAND_SLACK_PX: f64 = 2.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSelectionConfig {
    /// Clutter/isolation weight.
    pub w_c: f64,
    /// Distance weight.
    pub w_d: f64,
    /// Visibility weight.
    pub w_v: f64,
    /// Interior margin (px) at which the clutter Gaussian peaks.
    pub ideal_margin_px: f64,
    /// Width of the clutter Gaussian (px).
    pub margin_sigma_px: f64,
    /// Preferred camera-axis depth range (m); the upper bound starts the
    /// exponential decay.
    pub ideal_depth_range_m: [f64; 2],
    /// Exponential decay rate beyond the ideal range (1/m).
    pub decay_rate_per_m: f64,
    /// Visibility ratio above which a leaf counts as fully visible.
    pub occlusion_threshold: f64,
    /// Outside clearance (px) at which the clutter clearance term saturates.
    pub clearance_norm_px: f64,
}

impl Default for LeafSelectionConfig {
    fn default() -> Self {
        Self {
            w_c: 0.35,
            w_d: 0.35,
            w_v: 0.30,
            ideal_margin_px: 20.0,
            margin_sigma_px: 10.0,
            ideal_depth_range_m: [0.30, 0.50],
            decay_rate_per_m: 5.0,
            occlusion_threshold: 0.8,
            clearance_norm_px: 40.0,
        }
    }
}

impl LeafSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_c > 0.0 && self.w_d > 0.0 && self.w_v > 0.0) {
            return Err(Error::Input("selection weights must be positive".into()));
        }
        let sum = self.w_c + self.w_d + self.w_v;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "selection weights must sum to 1 (got {sum})"
            )));
        }
        if self.margin_sigma_px <= 0.0 || self.clearance_norm_px <= 0.0 {
            return Err(Error::Input(
                "margin_sigma_px and clearance_norm_px must be positive".into(),
            ));
        }
        if self.ideal_depth_range_m[0] >= self.ideal_depth_range_m[1] {
            return Err(Error::Input("ideal_depth_range_m must be ordered".into()));
        }
        if !(0.0 < self.occlusion_threshold && self.occlusion_threshold <= 1.0) {
            return Err(Error::Input("occlusion_threshold must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Score breakdown for one leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafScore {
    pub leaf_id: u32,
    pub s_clutter: f64,
    pub s_distance: f64,
    pub s_visibility: f64,
    pub total: f64,
    pub area_px: usize,
}

/// Weighted sum of the three component scores.
pub fn weighted_total(cfg: &LeafSelectionConfig, s_c: f64, s_d: f64, s_v: f64) -> f64 {
    cfg.w_c * s_c + cfg.w_d * s_d + cfg.w_v * s_v
}

/// Clutter/isolation score: a Gaussian reward on the leaf's maximum
/// interior margin times a clearance term sampled on a band outside the
/// contour.
///
/// The clearance term walks the contour, steps outward along the local
/// boundary normal by `clearance_norm_px + CLEARANCE_BAND_SLACK_PX`, and
/// averages the (clamped-positive) scene SDF there; the mean is normalized
/// by `clearance_norm_px` and capped at 1. Leaves overlapped or crowded by
/// neighbors see small or negative SDF samples and score lower. This also
/// stands in for the "leaf oriented away from its neighbors" criterion,
/// since a leaf tilted clear of the canopy projects with free space around
/// its outline.
pub fn clutter_score(
    instance: &LeafInstance,
    field: &SceneField,
    cfg: &LeafSelectionConfig,
) -> f64 {
    let max_inside = instance
        .inside_dt
        .as_slice()
        .iter()
        .fold(0.0f32, |a, &b| a.max(b)) as f64;
    let dm = max_inside - cfg.ideal_margin_px;
    let gauss = (-dm * dm / (2.0 * cfg.margin_sigma_px * cfg.margin_sigma_px)).exp();

    let clearance = clearance_term(instance, field, cfg);
    gauss * clearance
}

fn clearance_term(instance: &LeafInstance, field: &SceneField, cfg: &LeafSelectionConfig) -> f64 {
    let n = instance.contour.len();
    if n < 3 {
        return 1.0;
    }
    let offset = cfg.clearance_norm_px + CLEARANCE_BAND_SLACK_PX;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let prev = instance.contour[(i + n - 1) % n];
        let cur = instance.contour[i];
        let next = instance.contour[(i + 1) % n];
        let tx = (next.0 - prev.0) as f64;
        let ty = (next.1 - prev.1) as f64;
        let len = (tx * tx + ty * ty).sqrt();
        if len < 1e-9 {
            continue;
        }
        // Boundary normal, oriented away from the mask by probing.
        let (mut nx, mut ny) = (ty / len, -tx / len);
        let probe = (
            (cur.0 as f64 + 0.5 + 1.5 * nx).floor() as i64,
            (cur.1 as f64 + 0.5 + 1.5 * ny).floor() as i64,
        );
        let probe_inside = instance.mask.in_bounds(probe.0, probe.1)
            && instance.mask.at(probe.0 as usize, probe.1 as usize);
        if probe_inside {
            nx = -nx;
            ny = -ny;
        }
        let su = cur.0 as f64 + 0.5 + offset * nx;
        let sv = cur.1 as f64 + 0.5 + offset * ny;
        if let Some(s) = field.sdf_at(su, sv) {
            sum += (s as f64).max(0.0);
            count += 1;
        }
    }
    if count == 0 {
        return 1.0;
    }
    ((sum / count as f64) / cfg.clearance_norm_px).min(1.0)
}

/// Distance score: 1 inside the ideal range, exponential decay beyond its
/// upper bound. Depth is measured along the camera axis to the leaf
/// centroid; an invalid centroid scores 0.
pub fn distance_score(instance: &LeafInstance, rig: &StereoRig, cfg: &LeafSelectionConfig) -> f64 {
    let cam = rig.world_to_camera(instance.centroid3d);
    let d = cam.z;
    if !d.is_finite() || d <= 0.0 {
        return 0.0;
    }
    let start = cfg.ideal_depth_range_m[1];
    if d <= start {
        1.0
    } else {
        (-cfg.decay_rate_per_m * (d - start)).exp()
    }
}

/// Visibility score: 1 above the occlusion threshold, linear below it.
pub fn visibility_score(instance: &LeafInstance, cfg: &LeafSelectionConfig) -> f64 {
    let r = visibility_ratio(instance);
    if r >= cfg.occlusion_threshold {
        1.0
    } else {
        r / cfg.occlusion_threshold
    }
}

/// Score every instance and return the winning leaf id plus the ranked
/// score list (best first). Ties break toward larger pixel area, then
/// smaller leaf id.
pub fn select_leaf(
    instances: &[LeafInstance],
    field: &SceneField,
    rig: &StereoRig,
    cfg: &LeafSelectionConfig,
) -> Result<(u32, Vec<LeafScore>)> {
    if instances.is_empty() {
        return Err(Error::NoViableLeaf("no leaf instances in scene".into()));
    }
    let mut scores: Vec<LeafScore> = instances
        .iter()
        .map(|inst| {
            let s_c = clutter_score(inst, field, cfg);
            let s_d = distance_score(inst, rig, cfg);
            let s_v = visibility_score(inst, cfg);
            LeafScore {
                leaf_id: inst.id,
                s_clutter: s_c,
                s_distance: s_d,
                s_visibility: s_v,
                total: weighted_total(cfg, s_c, s_d, s_v),
                area_px: inst.area_px,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap()
            .then(b.area_px.cmp(&a.area_px))
            .then(a.leaf_id.cmp(&b.leaf_id))
    });
    Ok((scores[0].leaf_id, scores))
}
