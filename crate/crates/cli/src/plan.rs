//! `plan`: run the full pipeline on one scene manifest and write the grasp
//! report, trajectory CSV and stage timings.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use leafgrasp_core::config::PipelineConfig;
use leafgrasp_core::io::load_scene;
use leafgrasp_core::pipeline::{run_pipeline, PipelineOutput};
use leafgrasp_core::{Error, Result};

#[derive(Debug, Clone, clap::Args)]
pub struct PlanArgs {
    /// Scene manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config JSON; embedded defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Trial seed for the deterministic planner attempts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

/// Scene identifier used in reports: the manifest file stem, so reports
/// stay byte-identical regardless of where the scene is staged.
pub fn scene_name(manifest: &Path) -> String {
    manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string())
}

pub fn run_plan(args: &PlanArgs) -> Result<PipelineOutput> {
    let cfg = load_config(&args.config)?;
    let scene = load_scene(&args.manifest)?;
    let out = run_pipeline(&scene, &cfg, &scene_name(&args.manifest), args.seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_outputs(&args.out_dir, &out)?;
    Ok(out)
}

pub fn write_outputs(out_dir: &Path, out: &PipelineOutput) -> Result<()> {
    let report_json = serde_json::to_string_pretty(&out.report)?;
    std::fs::write(out_dir.join("grasp_report.json"), report_json)?;

    let mut csv = File::create(out_dir.join("trajectory.csv"))?;
    out.trajectory.write_csv(&mut csv)?;

    // Wall-clock timings are intentionally separate from the deterministic
    // report files.
    let mut timings = File::create(out_dir.join("timings.csv"))?;
    writeln!(
        timings,
        "scene,extract_ms,field_ms,select_ms,grasp_ms,plan_ms,trajectory_ms,total_ms"
    )
    .map_err(Error::from)?;
    let t = &out.timings;
    writeln!(
        timings,
        "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
        out.report.scene,
        t.extract_ms,
        t.field_ms,
        t.select_ms,
        t.grasp_ms,
        t.plan_ms,
        t.trajectory_ms,
        t.total_ms
    )
    .map_err(Error::from)?;
    Ok(())
}
