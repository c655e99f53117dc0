//! File-format round trips: scenes written by the generator load back
//! bit-identically and drive the pipeline to the same result as the
//! in-memory path.

use leafgrasp_core::config::PipelineConfig;
use leafgrasp_core::io::{load_scene, LoadedScene};
use leafgrasp_core::pipeline::run_pipeline;
use leafgrasp_core::synth::{bench_suite, render_scene, write_scene, NoiseModel};
use proptest::prelude::*;

#[test]
fn written_scene_loads_back_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = &bench_suite(3, 9, NoiseModel { depth_sigma_mm: 2.0, mask_erosion_px: 1 })[2];
    let rendered = render_scene(spec).unwrap();
    let manifest = write_scene(dir.path(), "rt", spec, &rendered).unwrap();
    let loaded = load_scene(&manifest).unwrap();

    assert_eq!(loaded.labels, rendered.labels);
    let a: Vec<u32> = rendered
        .depth
        .grid()
        .as_slice()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    let b: Vec<u32> = loaded
        .depth
        .grid()
        .as_slice()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    assert_eq!(a, b, "depth PFM round trip must preserve every bit");
}

#[test]
fn file_path_and_in_memory_pipeline_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = &bench_suite(2, 11, NoiseModel::default())[1];
    let rendered = render_scene(spec).unwrap();
    let manifest = write_scene(dir.path(), "same", spec, &rendered).unwrap();

    let cfg = PipelineConfig::default();
    let from_files = run_pipeline(&load_scene(&manifest).unwrap(), &cfg, "same", 1).unwrap();
    let in_memory = run_pipeline(
        &LoadedScene {
            rig: spec.rig().unwrap(),
            labels: rendered.labels,
            depth: rendered.depth,
            confidence: None,
        },
        &cfg,
        "same",
        1,
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&from_files.report).unwrap(),
        serde_json::to_string(&in_memory.report).unwrap()
    );
}

proptest! {
    /// project ∘ reproject is the identity on the pixel plane, and
    /// reproject ∘ project recovers the camera point.
    #[test]
    fn stereo_projection_round_trips(
        u in 0.5f64..1439.5,
        v in 0.5f64..1079.5,
        z in 0.06f64..4.9,
    ) {
        let rig = leafgrasp_core::StereoRig::new(
            1000.0, 990.0, 720.0, 540.0, 0.1, 1440, 1080,
            nalgebra::Isometry3::identity(),
        ).unwrap();
        let p = leafgrasp_core::camera::reproject_pixel(&rig, u, v, z).unwrap();
        let (u2, v2) = leafgrasp_core::camera::project_point(&rig, &p).unwrap();
        prop_assert!((u2 - u).abs() < 1e-6 && (v2 - v).abs() < 1e-6);

        let p2 = leafgrasp_core::camera::reproject_pixel(&rig, u2, v2, p.z).unwrap();
        prop_assert!((p2 - p).norm() < 1e-9);
    }
}
