use clap::Parser;
use leafgrasp_cli::{bench, error_record, exit_code, plan, viz};
use leafgrasp_core::config::PipelineConfig;

/// Batch grasp planning over file-based leaf scenes.
#[derive(Parser)]
#[command(name = "leafgrasp", version, about)]
enum Cli {
    /// Plan a grasp for one scene manifest and write report + trajectory.
    Plan(plan::PlanArgs),
    /// Render overlay images for an existing report.
    Viz(viz::VizArgs),
    /// Run the synthetic evaluation suite.
    Bench(bench::BenchArgs),
    /// Print the embedded default configuration as JSON.
    DumpConfig,
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli {
        Cli::Plan(args) => plan::run_plan(args).map(|out| {
            println!(
                "scene {}: leaf {} grasp at ({}, {}) score {:.4}, trajectory {:.2} s",
                out.report.scene,
                out.report.leaf_id,
                out.report.grasp.pixel.0,
                out.report.grasp.pixel.1,
                out.report.grasp.total,
                out.report.trajectory.duration_s
            );
        }),
        Cli::Viz(args) => viz::run_viz(args).map(|paths| {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }),
        Cli::Bench(args) => bench::run_bench(args).map(|s| {
            println!(
                "bench: {}/{} trials succeeded ({:.1}%), mean pixel error {:.2} px",
                s.successes,
                s.n,
                100.0 * s.success_rate,
                s.mean_pixel_error_px
            );
        }),
        Cli::DumpConfig => {
            println!("{}", PipelineConfig::default().to_json_pretty());
            Ok(())
        }
    };

    if let Err(err) = result {
        eprintln!("{}", error_record(&err));
        std::process::exit(exit_code(&err));
    }
}
