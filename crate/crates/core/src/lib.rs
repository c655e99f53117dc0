//! Geometric leaf-grasping pipeline for an overhead gantry sampler.
//!
//! The crate turns a segmented top-down view of a plant bed (instance label
//! image + dense depth map + calibrated camera) into an executable sampling
//! motion:
//!
//! 1. [`camera`] - pinhole stereo model: disparity → depth → 3D and back.
//! 2. [`perception`] - per-leaf 3D reconstruction (clouds, normals, contours,
//!    distance transforms) and the scene signed-distance field / occupancy
//!    grid.
//! 3. [`selection`] - multi-criteria leaf ranking (clutter, distance,
//!    visibility) and arg-max leaf choice.
//! 4. [`grasp`] - candidate-point scoring on the chosen leaf (flatness,
//!    approach alignment, edge margin, accessibility, stem penalty) and
//!    arg-max grasp point.
//! 5. [`motion`] - gantry kinematics, pre-grasp/grasp/retreat waypoints,
//!    RRT-Connect planning through the occupancy grid, and trapezoidal
//!    trajectory generation.
//! 6. [`reload`] - the microneedle-cartridge reload state machine.
//! 7. [`synth`] - a procedural plant-scene generator with analytic ground
//!    truth, used as the test oracle for everything above.
//! 8. [`pipeline`] - end-to-end orchestration and report types.
//!
//! File formats (camera JSON, PFM depth, 16-bit PNG labels, scene manifests)
//! live in [`io`] and are documented byte-exactly in `docs/FORMATS.md`.

pub mod camera;
pub mod config;
pub mod error;
pub mod grasp;
pub mod grid;
pub mod io;
pub mod motion;
pub mod perception;
pub mod pipeline;
pub mod reload;
pub mod selection;
pub mod synth;

pub use camera::{DepthImage, StereoRig};
pub use error::{Error, Result};
pub use grid::Grid;
