//! `bench`: run the synthetic evaluation suite end-to-end in-process.
//!
//! Every scene goes through the same code path as `plan`; success is the
//! conjunction of the per-trial flags, and the selected grasp pixel is
//! compared against the exhaustive stride-1 arg-max on the same data. The
//! microneedle reload machine is threaded across trials with its event log.
//!
//! All written artifacts are deterministic for a given (n, seed, noise,
//! stride, config) except `timings.csv`, which holds the wall-clock
//! measurements and is the one file excluded from byte-identity checks.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use leafgrasp_core::config::PipelineConfig;
use leafgrasp_core::grasp::select_grasp_point;
use leafgrasp_core::io::LoadedScene;
use leafgrasp_core::pipeline::{run_pipeline, GraspReport, StageTimings};
use leafgrasp_core::reload::ReloadState;
use leafgrasp_core::synth::{bench_suite, render_scene, NoiseModel, SceneSpec};
use leafgrasp_core::{Error, Result};

use crate::{error_class, plan};

/// Minimum camera-ray verticality for a trial to count as a sound top-down
/// approach.
pub const APPROACH_OK_MIN: f64 = 0.8;

/// Noise model applied when `--noise` is set: the depth accuracy the rig
/// claims plus a segmentation-shrink erosion.
pub const NOISE_ON: NoiseModel = NoiseModel {
    depth_sigma_mm: 2.0,
    mask_erosion_px: 2,
};

#[derive(Debug, Clone, clap::Args)]
pub struct BenchArgs {
    /// Number of scenes in the suite.
    #[arg(long, default_value_t = 24)]
    pub n: usize,
    /// Suite seed; also keys per-scene noise and planner attempts.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Enable the noise model (2 mm depth sigma, 2 px mask erosion).
    #[arg(long, default_value_t = false)]
    pub noise: bool,
    /// Override the grasp candidate stride (px).
    #[arg(long)]
    pub stride: Option<u32>,
    /// Pipeline config JSON; embedded defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Outcome of one bench trial; `success` is the conjunction of the flags.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub scene_id: usize,
    pub scene: String,
    pub success: bool,
    pub segmentation_ok: bool,
    pub grasp_in_mask: bool,
    pub edge_margin_ok: bool,
    pub approach_ok: bool,
    pub plan_ok: bool,
    pub leaf_id: Option<u32>,
    pub grasp_px: Option<(u32, u32)>,
    pub pixel_error_vs_oracle: Option<f64>,
    pub total_score: Option<f64>,
    pub error_class: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub n: usize,
    pub seed: u64,
    pub noise: bool,
    pub stride_px: u32,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_pixel_error_px: f64,
    pub max_pixel_error_px: f64,
    pub results: Vec<TrialResult>,
}

struct TrialOutput {
    result: TrialResult,
    report: Option<GraspReport>,
    timings: Option<StageTimings>,
}

fn loaded_scene(spec: &SceneSpec) -> Result<LoadedScene> {
    let rendered = render_scene(spec)?;
    Ok(LoadedScene {
        rig: spec.rig()?,
        labels: rendered.labels,
        depth: rendered.depth,
        confidence: None,
    })
}

fn run_trial(scene_id: usize, spec: &SceneSpec, cfg: &PipelineConfig) -> TrialOutput {
    let scene_name = format!("bench-{scene_id:02}");
    let failed = |class: &Error| TrialOutput {
        result: TrialResult {
            scene_id,
            scene: scene_name.clone(),
            success: false,
            segmentation_ok: false,
            grasp_in_mask: false,
            edge_margin_ok: false,
            approach_ok: false,
            plan_ok: false,
            leaf_id: None,
            grasp_px: None,
            pixel_error_vs_oracle: None,
            total_score: None,
            error_class: Some(error_class(class).to_string()),
        },
        report: None,
        timings: None,
    };

    let scene = match loaded_scene(spec) {
        Ok(s) => s,
        Err(e) => return failed(&e),
    };
    let out = match run_pipeline(&scene, cfg, &scene_name, scene_id as u64) {
        Ok(o) => o,
        Err(e) => return failed(&e),
    };

    // Ground truth for the flags: the same spec rendered without noise.
    let clean_spec = SceneSpec {
        noise: NoiseModel::default(),
        ..spec.clone()
    };
    let clean = render_scene(&clean_spec).expect("clean render of a valid spec");
    let (gx, gy) = out.report.grasp.pixel;
    let grasp_in_mask =
        clean.labels.at(gx as usize, gy as usize) as u32 == out.report.leaf_id;

    // Exhaustive stride-1 arg-max on the same observed data.
    let oracle_cfg = leafgrasp_core::grasp::GraspConfig {
        candidate_stride_px: 1,
        ..cfg.grasp.clone()
    };
    let instance = out
        .instances
        .iter()
        .find(|i| i.id == out.report.leaf_id)
        .expect("selected leaf is extracted");
    let pixel_error = select_grasp_point(instance, &scene.depth, &scene.rig, &out.field, &oracle_cfg)
        .ok()
        .map(|oracle| {
            let dx = oracle.best.pixel.0 as f64 - gx as f64;
            let dy = oracle.best.pixel.1 as f64 - gy as f64;
            (dx * dx + dy * dy).sqrt()
        });

    let segmentation_ok = !out.instances.is_empty();
    let edge_margin_ok = out.report.grasp.edge > 0.0;
    let approach_ok = out.report.grasp.approach >= APPROACH_OK_MIN;
    let plan_ok = out.report.plan.waypoint_count >= 2;
    let success = segmentation_ok && grasp_in_mask && edge_margin_ok && approach_ok && plan_ok;

    TrialOutput {
        result: TrialResult {
            scene_id,
            scene: scene_name,
            success,
            segmentation_ok,
            grasp_in_mask,
            edge_margin_ok,
            approach_ok,
            plan_ok,
            leaf_id: Some(out.report.leaf_id),
            grasp_px: Some(out.report.grasp.pixel),
            pixel_error_vs_oracle: pixel_error,
            total_score: Some(out.report.grasp.total),
            error_class: None,
        },
        report: Some(out.report),
        timings: Some(out.timings),
    }
}

pub fn run_bench(args: &BenchArgs) -> Result<BenchSummary> {
    let mut cfg = plan::load_config(&args.config)?;
    if let Some(stride) = args.stride {
        cfg.grasp.candidate_stride_px = stride;
    }
    cfg.validate()?;

    let noise = if args.noise {
        NOISE_ON
    } else {
        NoiseModel::default()
    };
    let suite = bench_suite(args.n, args.seed, noise);

    // Trials are independent; the reduction below is ordered by scene id.
    let outputs: Vec<TrialOutput> = suite
        .par_iter()
        .enumerate()
        .map(|(i, spec)| run_trial(i, spec, &cfg))
        .collect();

    // Needle accounting across the suite: one array per successful sample,
    // reload between samples, fresh cartridge when the current one runs
    // dry.
    std::fs::create_dir_all(&args.out_dir)?;
    let mut events = File::create(args.out_dir.join("reload_events.ndjson"))?;
    let mut machine = ReloadState::new(cfg.cartridge_capacity);
    for out in &outputs {
        if !out.result.success {
            continue;
        }
        loop {
            let log = machine.run_reload_cycle().map_err(|e| {
                Error::Protocol(format!("bench reload accounting: {e}"))
            })?;
            for rec in &log {
                writeln!(events, "{}", serde_json::to_string(rec)?).map_err(Error::from)?;
            }
            if machine.can_sample() {
                break;
            }
            // Cartridge exhausted mid-run: swap in a fresh one.
            machine = ReloadState::new(cfg.cartridge_capacity);
        }
        machine
            .consume_array()
            .map_err(|e| Error::Protocol(format!("bench reload accounting: {e}")))?;
    }

    let results: Vec<TrialResult> = outputs.iter().map(|o| o.result.clone()).collect();
    let successes = results.iter().filter(|r| r.success).count();
    let errors: Vec<f64> = results
        .iter()
        .filter_map(|r| r.pixel_error_vs_oracle)
        .collect();
    let summary = BenchSummary {
        n: args.n,
        seed: args.seed,
        noise: args.noise,
        stride_px: cfg.grasp.candidate_stride_px,
        successes,
        success_rate: successes as f64 / args.n as f64,
        mean_pixel_error_px: if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        },
        max_pixel_error_px: errors.iter().fold(0.0, |a: f64, &b| a.max(b)),
        results,
    };

    write_artifacts(&args.out_dir, &summary, &outputs)?;
    Ok(summary)
}

fn write_artifacts(out_dir: &Path, summary: &BenchSummary, outputs: &[TrialOutput]) -> Result<()> {
    for out in outputs {
        if let Some(report) = &out.report {
            let path = out_dir.join(format!("report_{}.json", report.scene));
            std::fs::write(path, serde_json::to_string_pretty(report)?)?;
        }
    }

    let mut trials = String::from(
        "scene_id,scene,success,segmentation_ok,grasp_in_mask,edge_margin_ok,approach_ok,plan_ok,leaf_id,grasp_u,grasp_v,pixel_error_px,total_score,error_class\n",
    );
    for r in &summary.results {
        trials.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scene_id,
            r.scene,
            r.success,
            r.segmentation_ok,
            r.grasp_in_mask,
            r.edge_margin_ok,
            r.approach_ok,
            r.plan_ok,
            r.leaf_id.map(|v| v.to_string()).unwrap_or_default(),
            r.grasp_px.map(|p| p.0.to_string()).unwrap_or_default(),
            r.grasp_px.map(|p| p.1.to_string()).unwrap_or_default(),
            r.pixel_error_vs_oracle
                .map(|v| format!("{v:.3}"))
                .unwrap_or_default(),
            r.total_score.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.error_class.clone().unwrap_or_default(),
        ));
    }
    std::fs::write(out_dir.join("trials.csv"), trials)?;

    let mut md = String::new();
    md.push_str("# Bench summary\n\n");
    md.push_str(&format!(
        "- scenes: {} (seed {}, noise: {}, stride {} px)\n",
        summary.n, summary.seed, summary.noise, summary.stride_px
    ));
    md.push_str(&format!(
        "- success rate: {}/{} = {:.1}%\n",
        summary.successes,
        summary.n,
        100.0 * summary.success_rate
    ));
    md.push_str(&format!(
        "- grasp pixel error vs stride-1 arg-max: mean {:.2} px, max {:.2} px\n",
        summary.mean_pixel_error_px, summary.max_pixel_error_px
    ));
    let flag = |name: &str, f: fn(&TrialResult) -> bool| {
        format!(
            "| {} | {}/{} |\n",
            name,
            summary.results.iter().filter(|r| f(r)).count(),
            summary.n
        )
    };
    md.push_str("\n| flag | pass |\n|---|---|\n");
    md.push_str(&flag("segmentation_ok", |r| r.segmentation_ok));
    md.push_str(&flag("grasp_in_mask", |r| r.grasp_in_mask));
    md.push_str(&flag("edge_margin_ok", |r| r.edge_margin_ok));
    md.push_str(&flag("approach_ok", |r| r.approach_ok));
    md.push_str(&flag("plan_ok", |r| r.plan_ok));
    md.push_str("\nPer-stage wall-clock latencies are in `timings.csv` (excluded from determinism checks).\n");
    std::fs::write(out_dir.join("summary.md"), md)?;

    let mut timings = String::from(
        "scene_id,extract_ms,field_ms,select_ms,grasp_ms,plan_ms,trajectory_ms,total_ms\n",
    );
    for (out, r) in outputs.iter().zip(&summary.results) {
        if let Some(t) = &out.timings {
            timings.push_str(&format!(
                "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
                r.scene_id,
                t.extract_ms,
                t.field_ms,
                t.select_ms,
                t.grasp_ms,
                t.plan_ms,
                t.trajectory_ms,
                t.total_ms
            ));
        }
    }
    std::fs::write(out_dir.join("timings.csv"), timings)?;
    Ok(())
}
