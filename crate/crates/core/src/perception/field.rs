//! Scene-level fields: the 2D signed distance field over the union of leaf
//! masks and the 3D occupancy voxel grid used for motion planning.

use std::collections::HashSet;

use nalgebra::Point3;

use crate::camera::StereoRig;
use crate::grid::Grid;
use crate::perception::distance::{distance_transform, Side};
use crate::perception::LeafInstance;

/// Sparse voxel occupancy over the gantry world frame. Voxel `[i, j, k]`
/// covers `[i*s, (i+1)*s) x [j*s, ...) x [k*s, ...)` for voxel size `s`.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    voxel_size: f64,
    occupied: HashSet<[i32; 3]>,
}

impl OccupancyGrid {
    pub fn empty(voxel_size: f64) -> Self {
        assert!(voxel_size > 0.0);
        Self {
            voxel_size,
            occupied: HashSet::new(),
        }
    }

    /// Voxelize `points` and dilate the result by one voxel in the full
    /// 26-neighborhood.
    pub fn from_points<'a>(points: impl Iterator<Item = &'a Point3<f64>>, voxel_size: f64) -> Self {
        let mut base = HashSet::new();
        let mut grid = Self::empty(voxel_size);
        for p in points {
            base.insert(grid.voxel_of(p));
        }
        let mut dilated = HashSet::with_capacity(base.len() * 8);
        for v in &base {
            for di in -1..=1 {
                for dj in -1..=1 {
                    for dk in -1..=1 {
                        dilated.insert([v[0] + di, v[1] + dj, v[2] + dk]);
                    }
                }
            }
        }
        grid.occupied = dilated;
        grid
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn voxel_of(&self, p: &Point3<f64>) -> [i32; 3] {
        [
            (p.x / self.voxel_size).floor() as i32,
            (p.y / self.voxel_size).floor() as i32,
            (p.z / self.voxel_size).floor() as i32,
        ]
    }

    pub fn center_of(&self, v: [i32; 3]) -> Point3<f64> {
        Point3::new(
            (v[0] as f64 + 0.5) * self.voxel_size,
            (v[1] as f64 + 0.5) * self.voxel_size,
            (v[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    pub fn contains(&self, v: &[i32; 3]) -> bool {
        self.occupied.contains(v)
    }

    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        self.contains(&self.voxel_of(p))
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Occupied voxels in sorted order (for deterministic exports).
    pub fn sorted_voxels(&self) -> Vec<[i32; 3]> {
        let mut v: Vec<_> = self.occupied.iter().copied().collect();
        v.sort_unstable();
        v
    }

    /// Remove every voxel whose center satisfies `pred`. Returns the number
    /// removed.
    pub fn retain_not(&mut self, pred: impl Fn(Point3<f64>) -> bool) -> usize {
        let before = self.occupied.len();
        let size = self.voxel_size;
        self.occupied.retain(|v| {
            let c = Point3::new(
                (v[0] as f64 + 0.5) * size,
                (v[1] as f64 + 0.5) * size,
                (v[2] as f64 + 0.5) * size,
            );
            !pred(c)
        });
        before - self.occupied.len()
    }
}

/// Signed distance field over the union of leaf masks (pixels; negative
/// inside any leaf, positive in free space, +inf for an empty scene) plus
/// the occupancy voxel grid and scene-level pixel statistics.
#[derive(Debug, Clone)]
pub struct SceneField {
    pub sdf: Grid<f32>,
    pub occupancy: OccupancyGrid,
    /// Mean of the per-leaf mask centroids; the stand-in for the plant
    /// center when estimating petiole junctions. `None` for empty scenes.
    pub plant_center_px: Option<(f64, f64)>,
}

impl SceneField {
    /// Nearest-pixel SDF sample at continuous image coordinates, or `None`
    /// outside the image.
    pub fn sdf_at(&self, u: f64, v: f64) -> Option<f32> {
        let x = u.floor();
        let y = v.floor();
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (x, y) = (x as usize, y as usize);
        if x >= self.sdf.width() || y >= self.sdf.height() {
            return None;
        }
        Some(self.sdf.at(x, y))
    }
}

/// Build the scene SDF (`outside_dt - inside_dt` of the union mask) and the
/// occupancy grid (union of clouds, dilated by one voxel). An empty
/// instance list yields an all-free field.
pub fn build_scene_field(
    instances: &[LeafInstance],
    rig: &StereoRig,
    voxel_size: f64,
) -> SceneField {
    let mut union = Grid::filled(rig.width, rig.height, false);
    for inst in instances {
        for (x, y, &m) in inst.mask.iter_cells() {
            if m {
                union.set(x, y, true);
            }
        }
    }
    let outside = distance_transform(&union, Side::Outside);
    let inside = distance_transform(&union, Side::Inside);
    let mut sdf = Grid::filled(rig.width, rig.height, 0.0f32);
    for y in 0..rig.height {
        for x in 0..rig.width {
            sdf.set(x, y, outside.at(x, y) - inside.at(x, y));
        }
    }

    let occupancy = if instances.is_empty() {
        OccupancyGrid::empty(voxel_size)
    } else {
        OccupancyGrid::from_points(instances.iter().flat_map(|i| i.cloud.iter()), voxel_size)
    };

    let plant_center_px = if instances.is_empty() {
        None
    } else {
        let n = instances.len() as f64;
        let (sx, sy) = instances.iter().fold((0.0, 0.0), |acc, i| {
            (acc.0 + i.mask_centroid_px.0, acc.1 + i.mask_centroid_px.1)
        });
        Some((sx / n, sy / n))
    };

    SceneField {
        sdf,
        occupancy,
        plant_center_px,
    }
}
