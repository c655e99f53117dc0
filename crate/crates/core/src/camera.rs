//! Pinhole stereo camera model: disparity-to-depth conversion, pixel
//! reprojection into 3D and projection back to the image plane.
//!
//! Conventions: camera frame has +x along image u, +y along image v, +z
//! forward (into the scene). Image coordinates are continuous; the center of
//! integer pixel `(i, j)` is `(i + 0.5, j + 0.5)`. Depth is metric distance
//! along the camera z axis, stored as `f32`; zero (or any non-positive
//! value) marks an invalid pixel.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Depth values outside this working range (meters) are marked invalid
/// rather than rejected; the rig is only trusted to a few millimetres inside
/// it.
pub const DEPTH_RANGE_M: (f32, f32) = (0.05, 5.0);

/// Disparities at or below this threshold (pixels) map to invalid depth.
pub const MIN_DISPARITY_PX: f32 = 1e-6;

const ROTATION_TOL: f64 = 1e-9;

/// Calibrated stereo rig: intrinsics of the rectified reference camera, the
/// stereo baseline, and the rigid camera-to-world transform.
#[derive(Debug, Clone)]
pub struct StereoRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Stereo baseline in meters.
    pub baseline: f64,
    pub width: usize,
    pub height: usize,
    /// Rigid transform from camera frame to gantry world frame.
    pub cam_pose: Isometry3<f64>,
}

impl StereoRig {
    /// Validate intrinsics and the pose rotation (orthonormal, det +1 to
    /// 1e-9) before accepting the rig. Parameters mirror the calibration
    /// file layout.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        baseline: f64,
        width: usize,
        height: usize,
        cam_pose: Isometry3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && baseline > 0.0) {
            return Err(Error::Input(format!(
                "fx, fy, baseline must be positive (got {fx}, {fy}, {baseline})"
            )));
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(Error::Input(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        let r = cam_pose.rotation.to_rotation_matrix();
        let m = r.matrix();
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Input(format!(
                "cam_pose rotation not orthonormal with det +1 (orth err {orth:.2e}, det {det})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            baseline,
            width,
            height,
            cam_pose,
        })
    }

    /// Rig from a raw row-major 4x4 camera-to-world matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn from_matrix(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        baseline: f64,
        width: usize,
        height: usize,
        cam_pose_rows: &[f64; 16],
    ) -> Result<Self> {
        let m = cam_pose_rows;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::Input(
                "cam_pose last row must be [0, 0, 0, 1]".into(),
            ));
        }
        let rot = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let orth = (rot.transpose() * rot - Matrix3::identity()).abs().max();
        let det = rot.determinant();
        if orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Input(format!(
                "cam_pose rotation not orthonormal with det +1 (orth err {orth:.2e}, det {det})"
            )));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
        let pose = Isometry3::from_parts(Translation3::new(m[3], m[7], m[11]), q);
        Self::new(fx, fy, cx, cy, baseline, width, height, pose)
    }

    /// Camera-to-world 4x4, row-major.
    pub fn cam_pose_rows(&self) -> [f64; 16] {
        let m = self.cam_pose.to_homogeneous();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn camera_to_world(&self, p: Point3<f64>) -> Point3<f64> {
        self.cam_pose * p
    }

    pub fn world_to_camera(&self, p: Point3<f64>) -> Point3<f64> {
        self.cam_pose.inverse_transform_point(&p)
    }

    /// Camera origin expressed in the world frame.
    pub fn camera_origin_world(&self) -> Point3<f64> {
        Point3::from(self.cam_pose.translation.vector)
    }
}

/// Dense metric depth image. Non-positive values are invalid; valid values
/// lie inside [`DEPTH_RANGE_M`].
#[derive(Debug, Clone)]
pub struct DepthImage {
    grid: Grid<f32>,
}

impl DepthImage {
    /// Wrap raw depth values, masking anything outside the working range as
    /// invalid (0). NaNs are masked too.
    pub fn from_raw(grid: Grid<f32>) -> Self {
        let clamped = grid.map(|&v| {
            if v.is_finite() && v >= DEPTH_RANGE_M.0 && v <= DEPTH_RANGE_M.1 {
                v
            } else {
                0.0
            }
        });
        Self { grid: clamped }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.grid.at(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.grid.at(x, y) > 0.0
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.grid
    }
}

/// Convert a disparity map to metric depth: `z = fx * baseline / d` where
/// `d` exceeds [`MIN_DISPARITY_PX`], invalid (0) elsewhere.
pub fn disparity_to_depth(rig: &StereoRig, disparity: &Grid<f32>) -> Result<DepthImage> {
    if disparity.width() != rig.width || disparity.height() != rig.height {
        return Err(Error::Input(format!(
            "disparity {}x{} does not match rig {}x{}",
            disparity.width(),
            disparity.height(),
            rig.width,
            rig.height
        )));
    }
    let fxb = (rig.fx * rig.baseline) as f32;
    let raw = disparity.map(|&d| if d > MIN_DISPARITY_PX { fxb / d } else { 0.0 });
    Ok(DepthImage::from_raw(raw))
}

/// Reproject a pixel with known depth into the camera frame.
pub fn reproject_pixel(rig: &StereoRig, u: f64, v: f64, depth: f64) -> Result<Point3<f64>> {
    if depth <= 0.0 {
        return Err(Error::Input(format!("invalid depth {depth}")));
    }
    if u < 0.0 || v < 0.0 || u > rig.width as f64 || v > rig.height as f64 {
        return Err(Error::Input(format!(
            "pixel ({u}, {v}) outside {}x{} image",
            rig.width, rig.height
        )));
    }
    Ok(Point3::new(
        (u - rig.cx) * depth / rig.fx,
        (v - rig.cy) * depth / rig.fy,
        depth,
    ))
}

/// Project a camera-frame point to the image plane. The result may lie
/// outside the image bounds; the caller checks.
pub fn project_point(rig: &StereoRig, p: &Point3<f64>) -> Result<(f64, f64)> {
    if p.z <= 0.0 {
        return Err(Error::Input(format!("point behind camera (z = {})", p.z)));
    }
    Ok((
        rig.fx * p.x / p.z + rig.cx,
        rig.fy * p.y / p.z + rig.cy,
    ))
}
