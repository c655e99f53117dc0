//! Procedural plant scenes with analytic ground truth.
//!
//! A leaf blade is an ellipse in its local frame bent by a quadratic curl
//! term, `z = curl * (a² + b²)`, rotated into the world by an azimuthal
//! tilt and an in-plane yaw. Rays through pixel centers intersect that
//! surface in closed form (the substitution stays quadratic in the ray
//! parameter), so rendered depth, visibility fractions, surface normals and
//! petiole locations are exact, so the generator doubles as the test oracle
//! for the perception stack.
//!
//! Rendering is pure: identical (spec, seed) produce identical bytes.

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{DepthImage, StereoRig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::CameraJson;
use crate::perception::distance::{distance_transform_sq, Side};

/// An opaque horizontal disc that blocks the view without being plant
/// matter (label 0, valid depth).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccluderSpec {
    pub center: [f64; 3],
    pub radius_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafSpec {
    /// Blade center in the world frame (m).
    pub center: [f64; 3],
    pub semi_major_m: f64,
    pub semi_minor_m: f64,
    /// Rotation of the blade plane away from horizontal (rad, < π/2 so the
    /// normal keeps a positive Z).
    pub tilt_rad: f64,
    /// World-XY direction of the tilt axis azimuth.
    pub tilt_azimuth_rad: f64,
    /// In-plane rotation of the ellipse axes.
    pub yaw_rad: f64,
    /// Quadratic bending coefficient (1/m); 0 is a flat blade.
    pub curl_per_m: f64,
    /// Local boundary angle of the petiole junction.
    pub petiole_azimuth_rad: f64,
    #[serde(default)]
    pub occluders: Vec<OccluderSpec>,
}

impl LeafSpec {
    /// Local-to-world rotation of the blade frame.
    pub fn frame(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.tilt_azimuth_rad)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.tilt_rad)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw_rad)
    }

    pub fn center_point(&self) -> Point3<f64> {
        Point3::from(Vector3::from(self.center))
    }

    /// Surface point at local blade coordinates.
    pub fn surface_at(&self, a: f64, b: f64) -> Point3<f64> {
        let local = Vector3::new(a, b, self.curl_per_m * (a * a + b * b));
        self.center_point() + self.frame() * local
    }

    /// Analytic unit surface normal (world, upward hemisphere) at the local
    /// coordinates of a surface point.
    pub fn normal_at_local(&self, a: f64, b: f64) -> Vector3<f64> {
        let g = Vector3::new(
            -2.0 * self.curl_per_m * a,
            -2.0 * self.curl_per_m * b,
            1.0,
        );
        let mut n = self.frame() * g.normalize();
        if n.z < 0.0 {
            n = -n;
        }
        n
    }

    /// Analytic normal at a world point assumed to lie on the blade.
    pub fn normal_at_world(&self, p: &Point3<f64>) -> Vector3<f64> {
        let local = self.frame().inverse() * (p - self.center_point());
        self.normal_at_local(local.x, local.y)
    }

    /// World-frame petiole junction: the blade boundary point in the
    /// configured local direction.
    pub fn petiole_world(&self) -> Point3<f64> {
        let a = self.semi_major_m * self.petiole_azimuth_rad.cos();
        let b = self.semi_minor_m * self.petiole_azimuth_rad.sin();
        self.surface_at(a, b)
    }

    /// Smallest positive ray parameter hitting the blade, if any. The ray
    /// is given in world coordinates; `t` is in units of `dir`.
    fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let rot = self.frame().inverse();
        let o = rot * (origin - self.center_point());
        let d = rot * dir;
        let c = self.curl_per_m;
        // c*(x(t)² + y(t)²) - z(t) = 0, quadratic in t.
        let qa = c * (d.x * d.x + d.y * d.y);
        let qb = 2.0 * c * (o.x * d.x + o.y * d.y) - d.z;
        let qc = c * (o.x * o.x + o.y * o.y) - o.z;
        let mut roots = [f64::NAN; 2];
        let mut count = 0;
        if qa.abs() < 1e-14 {
            if qb.abs() > 1e-14 {
                roots[0] = -qc / qb;
                count = 1;
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                roots[0] = (-qb - s) / (2.0 * qa);
                roots[1] = (-qb + s) / (2.0 * qa);
                count = 2;
            }
        }
        let mut best: Option<f64> = None;
        for &t in roots.iter().take(count) {
            if t.is_nan() || t <= 1e-9 {
                continue;
            }
            let (x, y) = (o.x + t * d.x, o.y + t * d.y);
            let ex = x / self.semi_major_m;
            let ey = y / self.semi_minor_m;
            if ex * ex + ey * ey <= 1.0 && best.map(|b| t < b).unwrap_or(true) {
                best = Some(t);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    /// Gaussian depth noise, standard deviation in millimeters.
    pub depth_sigma_mm: f64,
    /// Morphological mask erosion radius in pixels.
    pub mask_erosion_px: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub camera: CameraJson,
    pub leaves: Vec<LeafSpec>,
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl SceneSpec {
    pub fn rig(&self) -> Result<StereoRig> {
        self.camera.to_rig()
    }
}

/// Analytic per-leaf ground truth for one rendered scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafTruth {
    pub id: u32,
    pub visible_px: usize,
    pub unoccluded_px: usize,
    /// visible / unoccluded pixel fraction.
    pub visibility: f64,
    /// Mean of the visible surface points (world, noise-free).
    pub centroid_world: [f64; 3],
    /// Analytic normal at the blade center.
    pub normal: [f64; 3],
    pub petiole_px: [f64; 2],
    pub petiole_world: [f64; 3],
    pub tilt_rad: f64,
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub labels: Grid<u16>,
    pub depth: DepthImage,
    pub truth: Vec<LeafTruth>,
    /// 1-based ids of leaves dropped because they were fully outside the
    /// camera frustum.
    pub omitted: Vec<u32>,
}

/// Z-buffer rasterization of the scene: nearer surface wins per pixel,
/// occluders write valid depth with label 0, then the noise model is
/// applied (depth noise first, mask erosion second).
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    let rig = spec.rig()?;
    for (i, leaf) in spec.leaves.iter().enumerate() {
        if !(leaf.semi_major_m > 0.0 && leaf.semi_minor_m > 0.0) {
            return Err(Error::Input(format!("leaf {i}: semi-axes must be positive")));
        }
        if leaf.tilt_rad.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Input(format!(
                "leaf {i}: tilt must keep the blade normal above the horizon"
            )));
        }
    }

    let (w, h) = (rig.width, rig.height);
    let origin = rig.camera_origin_world();
    let cam_rot = rig.cam_pose.rotation;

    let mut labels = Grid::filled(w, h, 0u16);
    let mut depth_raw = Grid::filled(w, h, 0.0f32);
    let mut visible = vec![0usize; spec.leaves.len()];
    let mut unoccluded = vec![0usize; spec.leaves.len()];
    let mut centroid_acc = vec![Vector3::<f64>::zeros(); spec.leaves.len()];

    let in_frustum = leaf_frustum_flags(spec, &rig);

    for y in 0..h {
        for x in 0..w {
            let u = x as f64 + 0.5;
            let v = y as f64 + 0.5;
            // Unnormalized ray with unit camera-z component: the ray
            // parameter is then exactly the camera-frame depth.
            let dir = cam_rot * Vector3::new((u - rig.cx) / rig.fx, (v - rig.cy) / rig.fy, 1.0);

            let mut best_t = f64::INFINITY;
            let mut best_leaf: Option<usize> = None;
            for (li, leaf) in spec.leaves.iter().enumerate() {
                if !in_frustum[li] {
                    continue;
                }
                if let Some(t) = leaf.intersect(&origin, &dir) {
                    unoccluded[li] += 1;
                    if t < best_t {
                        best_t = t;
                        best_leaf = Some(li);
                    }
                }
                for occ in &leaf.occluders {
                    if let Some(t) = intersect_disc(occ, &origin, &dir) {
                        if t < best_t {
                            best_t = t;
                            best_leaf = None;
                        }
                    }
                }
            }
            if best_t.is_finite() {
                depth_raw.set(x, y, best_t as f32);
                if let Some(li) = best_leaf {
                    labels.set(x, y, (li + 1) as u16);
                    visible[li] += 1;
                    centroid_acc[li] += (origin + dir * best_t).coords;
                }
            }
        }
    }

    // Depth noise.
    if spec.noise.depth_sigma_mm > 0.0 {
        let sigma = (spec.noise.depth_sigma_mm / 1000.0) as f32;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
        for y in 0..h {
            for x in 0..w {
                let d = depth_raw.at(x, y);
                if d > 0.0 {
                    depth_raw.set(x, y, d + sigma * gaussian(&mut rng));
                }
            }
        }
    }

    // Mask erosion, per label, against everything that is not that label.
    if spec.noise.mask_erosion_px > 0 {
        let e2 = (spec.noise.mask_erosion_px as i64).pow(2);
        let mut eroded = labels.clone();
        for li in 0..spec.leaves.len() {
            let id = (li + 1) as u16;
            let not_mine = labels.map(|&l| l != id);
            let dist_sq = distance_transform_sq(&not_mine, Side::Outside);
            for (x, y, &l) in labels.iter_cells() {
                if l == id && dist_sq.at(x, y) <= e2 {
                    eroded.set(x, y, 0);
                }
            }
        }
        labels = eroded;
    }

    let mut truth = Vec::new();
    let mut omitted = Vec::new();
    for (li, leaf) in spec.leaves.iter().enumerate() {
        if !in_frustum[li] {
            omitted.push((li + 1) as u32);
            continue;
        }
        let centroid = if visible[li] > 0 {
            centroid_acc[li] / visible[li] as f64
        } else {
            Vector3::from(leaf.center)
        };
        let pet_w = leaf.petiole_world();
        let pet_cam = rig.world_to_camera(pet_w);
        let pet_px = if pet_cam.z > 0.0 {
            crate::camera::project_point(&rig, &pet_cam)?
        } else {
            (f64::NAN, f64::NAN)
        };
        let n = leaf.normal_at_local(0.0, 0.0);
        truth.push(LeafTruth {
            id: (li + 1) as u32,
            visible_px: visible[li],
            unoccluded_px: unoccluded[li],
            visibility: if unoccluded[li] > 0 {
                visible[li] as f64 / unoccluded[li] as f64
            } else {
                0.0
            },
            centroid_world: [centroid.x, centroid.y, centroid.z],
            normal: [n.x, n.y, n.z],
            petiole_px: [pet_px.0, pet_px.1],
            petiole_world: [pet_w.x, pet_w.y, pet_w.z],
            tilt_rad: leaf.tilt_rad,
        });
    }

    Ok(RenderedScene {
        labels,
        depth: DepthImage::from_raw(depth_raw),
        truth,
        omitted,
    })
}

fn intersect_disc(occ: &OccluderSpec, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    if dir.z.abs() < 1e-14 {
        return None;
    }
    let t = (occ.center[2] - origin.z) / dir.z;
    if t <= 1e-9 {
        return None;
    }
    let x = origin.x + t * dir.x - occ.center[0];
    let y = origin.y + t * dir.y - occ.center[1];
    (x * x + y * y <= occ.radius_m * occ.radius_m).then_some(t)
}

/// A leaf is rendered when any of its rim or center points projects into
/// the image with positive camera depth.
fn leaf_frustum_flags(spec: &SceneSpec, rig: &StereoRig) -> Vec<bool> {
    spec.leaves
        .iter()
        .map(|leaf| {
            let mut probes = vec![leaf.center_point()];
            for k in 0..8 {
                let phi = k as f64 * std::f64::consts::FRAC_PI_4;
                probes.push(leaf.surface_at(
                    leaf.semi_major_m * phi.cos(),
                    leaf.semi_minor_m * phi.sin(),
                ));
            }
            probes.iter().any(|p| {
                let cam = rig.world_to_camera(*p);
                if cam.z <= 0.0 {
                    return false;
                }
                let u = rig.fx * cam.x / cam.z + rig.cx;
                let v = rig.fy * cam.y / cam.z + rig.cy;
                u >= 0.0 && v >= 0.0 && u < rig.width as f64 && v < rig.height as f64
            })
        })
        .collect()
}

/// Write a rendered scene to disk in the exact formats the ingestion side
/// consumes (16-bit label PNG, PFM depth, camera JSON, manifest JSON), plus
/// the analytic ground truth as `truth.json`. `name` becomes the manifest
/// file stem. Returns the manifest path.
pub fn write_scene(
    dir: &std::path::Path,
    name: &str,
    spec: &SceneSpec,
    rendered: &RenderedScene,
) -> Result<std::path::PathBuf> {
    use crate::io::{pfm, png16, write_camera_json, write_manifest, SceneManifest};
    std::fs::create_dir_all(dir)?;
    let rig = spec.rig()?;
    png16::write_label_png(&dir.join(format!("{name}_labels.png")), &rendered.labels)?;
    pfm::write_pfm_file(&dir.join(format!("{name}_depth.pfm")), rendered.depth.grid())?;
    write_camera_json(&dir.join(format!("{name}_camera.json")), &rig)?;
    let manifest = SceneManifest {
        label_png: format!("{name}_labels.png").into(),
        camera_json: format!("{name}_camera.json").into(),
        depth_file: Some(format!("{name}_depth.pfm").into()),
        disparity_file: None,
        depth_scale: None,
        disparity_scale: None,
        confidence_map: None,
    };
    let manifest_path = dir.join(format!("{name}.json"));
    write_manifest(&manifest_path, &manifest)?;
    std::fs::write(
        dir.join(format!("{name}_truth.json")),
        serde_json::to_string_pretty(&rendered.truth)?,
    )?;
    Ok(manifest_path)
}

/// Box-Muller standard normal; stdlib-only and stable across platforms.
fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

/// The bench camera: looking straight down at the plant bed center from
/// the top of the z travel.
pub fn bench_camera() -> CameraJson {
    let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
    let pose = Isometry3::from_parts(Translation3::new(1.5, 0.75, 1.2), rot);
    let rig = StereoRig::new(500.0, 500.0, 360.0, 270.0, 0.08, 720, 540, pose)
        .expect("bench camera is valid");
    CameraJson::from_rig(&rig)
}

/// Leaf slot offsets (m) from the camera axis; spacing keeps every slot's
/// grasp column clear of its neighbors' canopies.
const SLOTS: [(f64, f64); 6] = [
    (-0.14, -0.08),
    (0.0, -0.08),
    (0.14, -0.08),
    (-0.14, 0.08),
    (0.0, 0.08),
    (0.14, 0.08),
];

/// Deterministic bench family: `n` scenes spanning camera distances 0.32 m
/// to 0.8 m, hero-leaf tilts 0° to 60° (several past 45°), 1–6 leaves per
/// scene, every third scene with a partial occlusion bite.
pub fn bench_suite(n: usize, seed: u64, noise: NoiseModel) -> Vec<SceneSpec> {
    assert!(n >= 1);
    let camera = bench_camera();
    let cam_z = 1.2;
    (0..n)
        .map(|i| {
            let scene_seed = seed
                .wrapping_mul(0x0100_0000_01b3)
                .wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
            let leaf_count = 1 + (i % 6);
            let hero_depth = 0.32 + 0.48 * (i as f64 / (n.max(2) - 1) as f64);
            let hero_tilt = (60.0 * ((i % 8) as f64) / 7.0).to_radians();

            let mut slots: Vec<(f64, f64)> = SLOTS.to_vec();
            // Deterministic slot shuffle.
            for k in (1..slots.len()).rev() {
                let j = rng.random_range(0..=k);
                slots.swap(k, j);
            }

            let mut leaves = Vec::with_capacity(leaf_count);
            for l in 0..leaf_count {
                let (dx, dy) = slots[l];
                let depth = if l == 0 {
                    hero_depth
                } else {
                    rng.random_range(0.35..0.70)
                };
                let tilt = if l == 0 {
                    hero_tilt
                } else {
                    rng.random_range(0.0..0.5)
                };
                let semi_major = rng.random_range(0.038..0.050);
                let ratio = rng.random_range(0.60..0.85);
                let jx = rng.random_range(-0.01..0.01);
                let jy = rng.random_range(-0.01..0.01);
                let mut leaf = LeafSpec {
                    center: [1.5 + dx + jx, 0.75 + dy + jy, cam_z - depth],
                    semi_major_m: semi_major,
                    semi_minor_m: semi_major * ratio,
                    tilt_rad: tilt,
                    tilt_azimuth_rad: rng.random_range(0.0..std::f64::consts::TAU),
                    yaw_rad: rng.random_range(0.0..std::f64::consts::PI),
                    curl_per_m: rng.random_range(0.0..2.0),
                    petiole_azimuth_rad: rng.random_range(0.0..std::f64::consts::TAU),
                    occluders: Vec::new(),
                };
                // Every third scene: bite an edge of the hero leaf with a
                // hovering disc.
                if l == 0 && i % 3 == 2 {
                    let rim = leaf.surface_at(leaf.semi_major_m, 0.0);
                    leaf.occluders.push(OccluderSpec {
                        center: [rim.x, rim.y, rim.z + 0.05],
                        radius_m: 0.35 * semi_major,
                    });
                }
                leaves.push(leaf);
            }
            SceneSpec {
                camera: camera.clone(),
                leaves,
                seed: scene_seed,
                noise,
            }
        })
        .collect()
}
