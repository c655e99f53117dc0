//! Golden-file reports for the first five bench scenes, run through the
//! real `plan` path (scene files on disk, manifest ingestion, report
//! serialization). Regenerate intentionally with:
//!
//! ```text
//! UPDATE_GOLDEN=1 cargo test -p leafgrasp-cli --test golden
//! ```

use std::path::PathBuf;

use leafgrasp_cli::plan::{run_plan, PlanArgs};
use leafgrasp_core::synth::{bench_suite, render_scene, write_scene, NoiseModel};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn reports_match_pinned_goldens() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let dir = tempfile::tempdir().unwrap();
    for (i, spec) in bench_suite(5, 42, NoiseModel::default()).iter().enumerate() {
        let name = format!("bench-{i:02}");
        let rendered = render_scene(spec).unwrap();
        let manifest = write_scene(dir.path(), &name, spec, &rendered).unwrap();
        let out_dir = dir.path().join(format!("out-{i}"));
        run_plan(&PlanArgs {
            manifest,
            config: None,
            out_dir: out_dir.clone(),
            seed: i as u64,
        })
        .unwrap();

        let produced = std::fs::read_to_string(out_dir.join("grasp_report.json")).unwrap();
        let golden_path = golden_dir().join(format!("report_{name}.json"));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&golden_path, &produced).unwrap();
            continue;
        }
        let golden = std::fs::read_to_string(&golden_path).unwrap_or_else(|_| {
            panic!(
                "missing golden {} (run with UPDATE_GOLDEN=1 to create)",
                golden_path.display()
            )
        });
        assert_eq!(
            produced, golden,
            "report for {name} drifted from the pinned golden"
        );
    }
}
