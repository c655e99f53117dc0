//! `viz`: post-hoc overlay images for a plan report: label overlay, SDF
//! heatmap, and the grasp annotation figure. All renders are pure functions
//! of (scene, report), so regenerating them is byte-identical.

use std::path::PathBuf;

use image::{Rgb, RgbImage};
use leafgrasp_core::io::load_scene;
use leafgrasp_core::perception::{build_scene_field, extract_instances, LeafInstance, SceneField};
use leafgrasp_core::pipeline::GraspReport;
use leafgrasp_core::{Error, Result};

#[derive(Debug, Clone, clap::Args)]
pub struct VizArgs {
    /// Scene manifest JSON the report was produced from.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Grasp report JSON written by `plan`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn run_viz(args: &VizArgs) -> Result<Vec<PathBuf>> {
    let report: GraspReport = serde_json::from_str(
        &std::fs::read_to_string(&args.report)
            .map_err(|e| Error::Input(format!("{}: {e}", args.report.display())))?,
    )?;
    let scene = load_scene(&args.manifest)?;
    let extraction = extract_instances(
        &scene.labels,
        &scene.depth,
        &scene.rig,
        scene.confidence.as_ref(),
    )?;
    let field = build_scene_field(
        &extraction.instances,
        &scene.rig,
        report.config.motion.voxel_size_m,
    );

    // The report must actually describe this scene.
    let Some(selected) = extraction.instances.iter().find(|i| i.id == report.leaf_id) else {
        return Err(Error::Input(format!(
            "report leaf {} not present in scene",
            report.leaf_id
        )));
    };
    let (gx, gy) = (report.grasp.pixel.0 as usize, report.grasp.pixel.1 as usize);
    if gx >= selected.mask.width()
        || gy >= selected.mask.height()
        || !selected.mask.at(gx, gy)
    {
        return Err(Error::Input(
            "report grasp pixel lies outside the selected leaf mask".into(),
        ));
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let overlay = mask_overlay(&scene.labels, &extraction.instances);
    let heatmap = sdf_heatmap(&field);
    let annotation = grasp_annotation(&overlay, selected, &report, &scene.rig);
    // Re-evaluating with the echoed config reproduces exactly the score
    // map the selection used.
    let selection = leafgrasp_core::grasp::select_grasp_point(
        selected,
        &scene.depth,
        &scene.rig,
        &field,
        &report.config.grasp,
    )?;
    let scores = score_heatmap(
        &selection,
        scene.labels.width(),
        scene.labels.height(),
        report.config.grasp.candidate_stride_px,
    );

    let paths = vec![
        args.out_dir.join("mask_overlay.png"),
        args.out_dir.join("sdf_heatmap.png"),
        args.out_dir.join("grasp_annotation.png"),
        args.out_dir.join("score_heatmap.png"),
    ];
    overlay.save(&paths[0])?;
    heatmap.save(&paths[1])?;
    annotation.save(&paths[2])?;
    scores.save(&paths[3])?;
    Ok(paths)
}

/// Candidate totals over the selected leaf, one `stride x stride` block per
/// evaluated candidate, on the same affine colormap as the SDF figure.
pub fn score_heatmap(
    selection: &leafgrasp_core::grasp::GraspSelection,
    width: usize,
    height: usize,
    stride_px: u32,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(width as u32, height as u32, Rgb([16, 16, 16]));
    for e in &selection.entries {
        let c = heat_color(e.total as f32);
        for dy in 0..stride_px {
            for dx in 0..stride_px {
                let (x, y) = (e.pixel.0 + dx, e.pixel.1 + dy);
                if (x as usize) < width && (y as usize) < height {
                    img.put_pixel(x, y, c);
                }
            }
        }
    }
    img
}

/// Distinct color per leaf id (golden-angle hue walk).
pub fn label_color(id: u32) -> Rgb<u8> {
    let hue = (id as f64 * 137.508).rem_euclid(360.0);
    hsv_to_rgb(hue, 0.65, 0.95)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb<u8> {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h as u32 / 60 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    Rgb([
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ])
}

pub fn mask_overlay(
    labels: &leafgrasp_core::Grid<u16>,
    instances: &[LeafInstance],
) -> RgbImage {
    let mut img = RgbImage::new(labels.width() as u32, labels.height() as u32);
    for (x, y, &l) in labels.iter_cells() {
        let px = if l == 0 {
            Rgb([16, 16, 16])
        } else {
            label_color(l as u32)
        };
        img.put_pixel(x as u32, y as u32, px);
    }
    // Outline every instance contour in a darker shade of its color.
    for inst in instances {
        let Rgb([r, g, b]) = label_color(inst.id);
        let dark = Rgb([r / 2, g / 2, b / 2]);
        for &(cx, cy) in &inst.contour {
            img.put_pixel(cx as u32, cy as u32, dark);
        }
    }
    img
}

/// Affine colormap of the SDF: blue (most inside) through to red (most
/// outside). Infinite cells (empty scenes) render as the far end.
pub fn sdf_heatmap(field: &SceneField) -> RgbImage {
    let (lo, hi) = field
        .sdf
        .as_slice()
        .iter()
        .filter(|v| v.is_finite())
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = RgbImage::new(field.sdf.width() as u32, field.sdf.height() as u32);
    for (x, y, &v) in field.sdf.iter_cells() {
        let t = if v.is_finite() {
            ((v - lo) / span).clamp(0.0, 1.0)
        } else {
            1.0
        };
        img.put_pixel(x as u32, y as u32, heat_color(t));
    }
    img
}

/// The affine channel mapping used by [`sdf_heatmap`]; exposed so tests can
/// assert the definitional relationship.
pub fn heat_color(t: f32) -> Rgb<u8> {
    Rgb([
        (t * 255.0).round() as u8,
        40,
        ((1.0 - t) * 255.0).round() as u8,
    ])
}

fn grasp_annotation(
    base: &RgbImage,
    selected: &LeafInstance,
    report: &GraspReport,
    rig: &leafgrasp_core::StereoRig,
) -> RgbImage {
    let mut img = base.clone();
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut put = |x: i64, y: i64, c: Rgb<u8>| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.put_pixel(x as u32, y as u32, c);
        }
    };

    // Selected leaf outlined in white.
    for &(cx, cy) in &selected.contour {
        put(cx as i64, cy as i64, Rgb([255, 255, 255]));
    }
    // Petiole junction: cyan dot.
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            put(
                report.junction_px[0] as i64 + dx,
                report.junction_px[1] as i64 + dy,
                Rgb([0, 255, 255]),
            );
        }
    }
    // Grasp pixel: red crosshair, drawn exactly at the report pixel.
    let (gx, gy) = (report.grasp.pixel.0 as i64, report.grasp.pixel.1 as i64);
    for d in -6i64..=6 {
        put(gx + d, gy, Rgb([255, 0, 0]));
        put(gx, gy + d, Rgb([255, 0, 0]));
    }
    // Pre-grasp pose projected back into the image: yellow circle.
    let p = report.waypoints.pre_grasp.position;
    let cam = rig.world_to_camera(nalgebra_point(p));
    if cam.z > 0.0 {
        if let Ok((u, v)) = leafgrasp_core::camera::project_point(rig, &cam) {
            let (cx, cy) = (u as i64, v as i64);
            for k in 0..64 {
                let a = k as f64 * std::f64::consts::TAU / 64.0;
                put(
                    cx + (8.0 * a.cos()).round() as i64,
                    cy + (8.0 * a.sin()).round() as i64,
                    Rgb([255, 220, 0]),
                );
            }
        }
    }
    img
}

fn nalgebra_point(p: [f64; 3]) -> nalgebra::Point3<f64> {
    nalgebra::Point3::new(p[0], p[1], p[2])
}
