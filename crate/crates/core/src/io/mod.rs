//! On-disk formats: camera calibration JSON, scene manifests, PFM float
//! maps and 16-bit PNGs. Byte-level layouts are documented in
//! `docs/FORMATS.md`.

pub mod pfm;
pub mod png16;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{disparity_to_depth, DepthImage, StereoRig};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Camera calibration file: intrinsics, stereo baseline and the rigid
/// camera-to-world transform as a row-major 4x4 matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub width: usize,
    pub height: usize,
    pub cam_pose: [f64; 16],
}

impl CameraJson {
    pub fn to_rig(&self) -> Result<StereoRig> {
        StereoRig::from_matrix(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.baseline,
            self.width,
            self.height,
            &self.cam_pose,
        )
    }

    pub fn from_rig(rig: &StereoRig) -> Self {
        Self {
            fx: rig.fx,
            fy: rig.fy,
            cx: rig.cx,
            cy: rig.cy,
            baseline: rig.baseline,
            width: rig.width,
            height: rig.height,
            cam_pose: rig.cam_pose_rows(),
        }
    }
}

pub fn read_camera_json(path: &Path) -> Result<StereoRig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let cam: CameraJson = serde_json::from_str(&text)?;
    cam.to_rig()
}

pub fn write_camera_json(path: &Path, rig: &StereoRig) -> Result<()> {
    let text = serde_json::to_string_pretty(&CameraJson::from_rig(rig))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Scene manifest: the file set one `plan` invocation consumes. Exactly one
/// of `depth_file` / `disparity_file` must be present; `.png` files need
/// the matching scale (units per count), `.pfm` files are metric floats.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub label_png: PathBuf,
    pub camera_json: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity_file: Option<PathBuf>,
    /// Meters per count for 16-bit PNG depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale: Option<f64>,
    /// Disparity pixels per count for 16-bit PNG disparity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_map: Option<PathBuf>,
}

/// A fully loaded scene, ready for instance extraction.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub rig: StereoRig,
    pub labels: Grid<u16>,
    pub depth: DepthImage,
    pub confidence: Option<Grid<f32>>,
}

pub fn read_manifest(path: &Path) -> Result<SceneManifest> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_manifest(path: &Path, manifest: &SceneManifest) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

/// Load all files referenced by a manifest. Relative paths resolve against
/// the manifest's directory.
pub fn load_scene(manifest_path: &Path) -> Result<LoadedScene> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };

    let rig = read_camera_json(&resolve(&manifest.camera_json))?;
    let labels = png16::read_label_png(&resolve(&manifest.label_png))?;

    let depth = match (&manifest.depth_file, &manifest.disparity_file) {
        (Some(_), Some(_)) => {
            return Err(Error::Input(
                "manifest has both depth_file and disparity_file".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Input(
                "manifest needs depth_file or disparity_file".into(),
            ))
        }
        (Some(depth_path), None) => {
            let raw = read_float_map(&resolve(depth_path), manifest.depth_scale, "depth_scale")?;
            check_dims(&raw, &rig, "depth")?;
            DepthImage::from_raw(raw)
        }
        (None, Some(disp_path)) => {
            let raw = read_float_map(
                &resolve(disp_path),
                manifest.disparity_scale,
                "disparity_scale",
            )?;
            disparity_to_depth(&rig, &raw)?
        }
    };

    let confidence = match &manifest.confidence_map {
        Some(p) => {
            let conf = png16::read_confidence_png(&resolve(p))?;
            check_dims(&conf, &rig, "confidence map")?;
            Some(conf)
        }
        None => None,
    };

    if labels.width() != rig.width || labels.height() != rig.height {
        return Err(Error::Input(format!(
            "label image {}x{} does not match camera {}x{}",
            labels.width(),
            labels.height(),
            rig.width,
            rig.height
        )));
    }
    Ok(LoadedScene {
        rig,
        labels,
        depth,
        confidence,
    })
}

fn read_float_map(path: &Path, scale: Option<f64>, scale_key: &str) -> Result<Grid<f32>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => pfm::read_pfm_file(path),
        Some("png") => {
            let scale = scale.ok_or_else(|| {
                Error::Input(format!("{} required for 16-bit png {}", scale_key, path.display()))
            })?;
            png16::read_scaled_png(path, scale)
        }
        _ => Err(Error::Input(format!(
            "unsupported float map extension: {}",
            path.display()
        ))),
    }
}

fn check_dims(grid: &Grid<f32>, rig: &StereoRig, what: &str) -> Result<()> {
    if grid.width() != rig.width || grid.height() != rig.height {
        return Err(Error::Input(format!(
            "{what} {}x{} does not match camera {}x{}",
            grid.width(),
            grid.height(),
            rig.width,
            rig.height
        )));
    }
    Ok(())
}
