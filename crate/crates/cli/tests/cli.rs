use std::path::Path;
use std::process::{Command, Output};

use plantrack::harness::{build_scene, run_trial, StudyResult, TrialConfig, TrialSeeds};
use plantrack::io::{count_frames, read_json, write_json, DetectionFile, TrackFile};
use plantrack::{MetricsReport, PlantScene};
use serde_json::json;

fn plantrack(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plantrack"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let out = cmd.args(args).output().unwrap();
    assert!(out.stdout.is_empty(), "results go to files, not stdout");
    out
}

fn ok(out: Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn small_trial() -> serde_json::Value {
    json!({"sequence_length": 12, "viewpoint_pool_size": 30})
}

fn write_config(dir: &Path, value: serde_json::Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, value.to_string()).unwrap();
    p
}

#[test]
fn file_pipeline_matches_in_memory_trial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, json!({"seed": 17, "trial": small_trial()}));
    let frames = d.join("frames");
    let s = |p: &Path| p.to_str().unwrap().to_owned();

    ok(plantrack(&["render", "--out", &s(&frames)], Some(&cfg)));
    assert_eq!(count_frames(&frames), 12);
    ok(plantrack(&["track", "--frames", &s(&frames), "--out", &s(&d.join("tracks.json"))], Some(&cfg)));
    ok(plantrack(
        &["eval", "--frames", &s(&frames), "--tracks", &s(&d.join("tracks.json")), "--out", &s(&d.join("metrics.json"))],
        Some(&cfg),
    ));

    let trial: TrialConfig = serde_json::from_value(small_trial()).unwrap();
    let expected = run_trial(&trial, 17).unwrap();
    let tracks: TrackFile = read_json(&d.join("tracks.json")).unwrap();
    assert_eq!(tracks.sequence, expected.sequence);
    let ids = |r: &[plantrack::tracker::TrackRecord]| r.iter().map(|r| (r.frame, r.tracklet_id, r.bbox)).collect::<Vec<_>>();
    assert_eq!(ids(&tracks.records), ids(&expected.records));
    let report: MetricsReport = read_json(&d.join("metrics.json")).unwrap();
    assert_eq!(report, expected.report);
    let csv = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(MetricsReport::CSV_HEADER));
}

#[test]
fn generate_writes_the_trial_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"seed": 4}));
    let out = dir.path().join("scene.json");
    ok(plantrack(&["generate", "--out", out.to_str().unwrap()], Some(&cfg)));
    let scene: PlantScene = read_json(&out).unwrap();
    assert_eq!(scene, build_scene(&TrialConfig::default(), TrialSeeds::new(4).scene).unwrap());
}

#[test]
fn supplied_detections_replace_the_simulator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, json!({"seed": 2, "trial": small_trial()}));
    let frames = d.join("frames");
    ok(plantrack(&["render", "--out", frames.to_str().unwrap()], Some(&cfg)));
    let dets = d.join("dets.json");
    write_json(&dets, &DetectionFile { frames: vec![Vec::new(); 12] }).unwrap();
    let tracks = d.join("tracks.json");
    ok(plantrack(
        &["track", "--frames", frames.to_str().unwrap(), "--detections", dets.to_str().unwrap(), "--out", tracks.to_str().unwrap()],
        Some(&cfg),
    ));
    assert!(read_json::<TrackFile>(&tracks).unwrap().records.is_empty());

    write_json(&dets, &DetectionFile { frames: vec![Vec::new(); 3] }).unwrap();
    let out = plantrack(
        &["track", "--frames", frames.to_str().unwrap(), "--detections", dets.to_str().unwrap(), "--out", tracks.to_str().unwrap()],
        Some(&cfg),
    );
    assert!(!out.status.success());
}

#[test]
fn ablate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        json!({
            "seed": 9,
            "trial": {"sequence_length": 8, "viewpoint_pool_size": 20},
            "study": {
                "repetitions": 2,
                "baseline": "clean",
                "arms": [
                    {"label": "clean", "overrides": {}},
                    {"label": "noisy", "overrides": {"pose_noise": {"t_noise": 0.05, "r_noise": 0.05}}}
                ]
            }
        }),
    );
    let results = d.join("results.json");
    ok(plantrack(&["ablate", "--out", results.to_str().unwrap()], Some(&cfg)));
    let r: StudyResult = read_json(&results).unwrap();
    assert_eq!(r.arms.len(), 2);
    assert!(r.arms.iter().all(|a| a.reports.len() == 2));

    let report_dir = d.join("report");
    ok(plantrack(&["report", "--results", results.to_str().unwrap(), "--out", report_dir.to_str().unwrap()], None));
    assert!(report_dir.join("summary.csv").exists());
    assert!(report_dir.join("trials.csv").exists());
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = plantrack(&["generate", "--out", "x.json"], Some(&missing));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let bad = write_config(dir.path(), json!({"seed": 1, "trail": {}}));
    assert!(!plantrack(&["generate", "--out", "x.json"], Some(&bad)).status.success());

    let no_study = write_config(dir.path(), json!({"seed": 1}));
    let out = plantrack(&["ablate", "--out", dir.path().join("r.json").to_str().unwrap()], Some(&no_study));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("study"));

    let invalid = write_config(dir.path(), json!({"seed": 1, "trial": {"sequence_length": 0}}));
    assert!(!plantrack(&["render", "--out", dir.path().join("f").to_str().unwrap()], Some(&invalid)).status.success());
}
