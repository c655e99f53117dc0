//! Per-leaf 3D reconstruction from an instance label image plus depth, and
//! the derived scene-level fields used by selection, grasping and planning.

pub mod contour;
pub mod distance;
pub mod field;
pub mod plane;

use std::collections::HashMap;

use nalgebra::{Point3, Unit, Vector3};

use crate::camera::{reproject_pixel, DepthImage, StereoRig};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub use distance::{distance_transform, distance_transform_sq, Side};
pub use field::{build_scene_field, OccupancyGrid, SceneField};
pub use plane::plane_fit_normal;

/// Minimum number of valid-depth pixels for a detection to count as a leaf.
/// Smaller blobs are noise at the working resolutions.
pub const MIN_AREA_PX: usize = 100;

/// One segmented leaf with its 3D reconstruction.
#[derive(Debug, Clone)]
pub struct LeafInstance {
    pub id: u32,
    /// Full-frame binary mask of this instance.
    pub mask: Grid<bool>,
    /// Closed outer boundary of the largest mask component, in pixel
    /// coordinates.
    pub contour: Vec<(i32, i32)>,
    /// Mask pixel count.
    pub area_px: usize,
    /// World-frame points, one per valid-depth mask pixel.
    pub cloud: Vec<Point3<f64>>,
    /// Pixel of origin for each cloud point (parallel to `cloud`).
    pub cloud_pixels: Vec<(u32, u32)>,
    /// Mean of the cloud.
    pub centroid3d: Point3<f64>,
    /// Whole-leaf plane-fit normal, oriented to the upward hemisphere.
    pub mean_normal: Unit<Vector3<f64>>,
    /// RMS point-to-plane distance of the whole-leaf fit (meters).
    pub planarity_residual: f64,
    /// Per-pixel distance to the leaf's own boundary (pixels; 0 outside the
    /// mask and on boundary pixels).
    pub inside_dt: Grid<f32>,
    /// Mean upstream detector confidence over the mask, when a confidence
    /// map was supplied.
    pub confidence: Option<f64>,
    /// Mask centroid in pixel coordinates.
    pub mask_centroid_px: (f64, f64),
    index: HashMap<(u32, u32), usize>,
}

impl LeafInstance {
    /// World-frame cloud point observed at `pixel`, if that pixel had valid
    /// depth.
    pub fn point_at_pixel(&self, pixel: (u32, u32)) -> Option<&Point3<f64>> {
        self.index.get(&pixel).map(|&i| &self.cloud[i])
    }

    /// Cloud indices whose pixels lie within `radius_px` of `pixel`.
    pub fn cloud_indices_near(&self, pixel: (u32, u32), radius_px: f64) -> Vec<usize> {
        let r2 = radius_px * radius_px;
        self.cloud_pixels
            .iter()
            .enumerate()
            .filter(|(_, &(px, py))| {
                let dx = px as f64 - pixel.0 as f64;
                let dy = py as f64 - pixel.1 as f64;
                dx * dx + dy * dy <= r2
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Why a labeled region was dropped during extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractionWarning {
    /// Fewer than [`MIN_AREA_PX`] pixels carried valid depth.
    TooFewValidPixels { id: u32, valid_px: usize },
    /// The cloud was too degenerate for a plane fit.
    DegenerateCloud { id: u32 },
}

/// Result of [`extract_instances`]: accepted leaves plus drop records.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub instances: Vec<LeafInstance>,
    pub warnings: Vec<ExtractionWarning>,
}

/// Build one [`LeafInstance`] per distinct nonzero label with at least
/// [`MIN_AREA_PX`] valid-depth pixels. Labels without enough valid depth are
/// dropped with a warning record; an unlabeled image yields an empty list.
pub fn extract_instances(
    labels: &Grid<u16>,
    depth: &DepthImage,
    rig: &StereoRig,
    confidence: Option<&Grid<f32>>,
) -> Result<Extraction> {
    if labels.width() != depth.width() || labels.height() != depth.height() {
        return Err(Error::Input(format!(
            "label image {}x{} does not match depth {}x{}",
            labels.width(),
            labels.height(),
            depth.width(),
            depth.height()
        )));
    }
    if labels.width() != rig.width || labels.height() != rig.height {
        return Err(Error::Input(format!(
            "label image {}x{} does not match rig {}x{}",
            labels.width(),
            labels.height(),
            rig.width,
            rig.height
        )));
    }
    if let Some(conf) = confidence {
        if conf.width() != labels.width() || conf.height() != labels.height() {
            return Err(Error::Input("confidence map size mismatch".into()));
        }
    }

    // Gather pixels per label in one pass.
    let mut by_label: HashMap<u16, Vec<(u32, u32)>> = HashMap::new();
    for (x, y, &l) in labels.iter_cells() {
        if l != 0 {
            by_label.entry(l).or_default().push((x as u32, y as u32));
        }
    }
    let mut ids: Vec<u16> = by_label.keys().copied().collect();
    ids.sort_unstable();

    let mut out = Extraction::default();
    for id in ids {
        let pixels = &by_label[&id];
        let mut mask = Grid::filled(labels.width(), labels.height(), false);
        let mut sum_px = (0.0, 0.0);
        for &(x, y) in pixels {
            mask.set(x as usize, y as usize, true);
            sum_px.0 += x as f64 + 0.5;
            sum_px.1 += y as f64 + 0.5;
        }
        let area_px = pixels.len();
        let mask_centroid_px = (sum_px.0 / area_px as f64, sum_px.1 / area_px as f64);

        let mut cloud = Vec::new();
        let mut cloud_pixels = Vec::new();
        let mut conf_sum = 0.0;
        for &(x, y) in pixels {
            let z = depth.at(x as usize, y as usize);
            if z <= 0.0 {
                continue;
            }
            let cam = reproject_pixel(rig, x as f64 + 0.5, y as f64 + 0.5, z as f64)?;
            cloud.push(rig.camera_to_world(cam));
            cloud_pixels.push((x, y));
            if let Some(conf) = confidence {
                conf_sum += conf.at(x as usize, y as usize) as f64;
            }
        }
        if cloud.len() < MIN_AREA_PX {
            out.warnings.push(ExtractionWarning::TooFewValidPixels {
                id: id as u32,
                valid_px: cloud.len(),
            });
            continue;
        }

        let (mean_normal, planarity_residual) = match plane_fit_normal(&cloud) {
            Ok(v) => v,
            Err(_) => {
                out.warnings
                    .push(ExtractionWarning::DegenerateCloud { id: id as u32 });
                continue;
            }
        };
        let centroid3d = Point3::from(
            cloud.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / cloud.len() as f64,
        );
        let inside_dt = distance_transform(&mask, Side::Inside);
        let contour = contour::trace_contour(&mask);
        let index = cloud_pixels
            .iter()
            .enumerate()
            .map(|(i, &px)| (px, i))
            .collect();
        let confidence_mean = confidence.map(|_| conf_sum / cloud.len() as f64);

        out.instances.push(LeafInstance {
            id: id as u32,
            mask,
            contour,
            area_px,
            cloud,
            cloud_pixels,
            centroid3d,
            mean_normal,
            planarity_residual,
            inside_dt,
            confidence: confidence_mean,
            mask_centroid_px,
            index,
        });
    }
    Ok(out)
}

/// Fraction of the leaf's expected full extent that is actually observed:
/// mask area over the area of the convex hull of the mask boundary, clamped
/// to [0, 1]. Degenerate hulls (lines, single pixels) score 0.
pub fn visibility_ratio(instance: &LeafInstance) -> f64 {
    let boundary = distance::boundary_pixels(&instance.mask);
    let pts: Vec<(f64, f64)> = boundary
        .iter_cells()
        .filter(|&(_, _, &b)| b)
        .map(|(x, y, _)| (x as f64, y as f64))
        .collect();
    let hull = contour::convex_hull(&pts);
    let hull_area = contour::polygon_area(&hull);
    if hull_area <= 0.0 {
        return 0.0;
    }
    (instance.area_px as f64 / hull_area).clamp(0.0, 1.0)
}
