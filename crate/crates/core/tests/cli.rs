use std::path::Path;
use std::process::{Command, Output};

use ledgen::io::{read_depth, DatasetManifest, DepthFormat, Split};

fn ledgen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledgen"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn generate(dir: &Path) -> DatasetManifest {
    let out = ledgen(&["generate", "--out", "data", "--count", "10", "--size", "64", "--seed", "3", "--json"], dir);
    let summary = json(&out);
    assert_eq!(summary["entries"], 20);
    DatasetManifest::load(&dir.join("data/manifest.json")).unwrap()
}

/// Copies each test entry's ground truth into `pred/<id>.pfm`.
fn perfect_predictions(dir: &Path, manifest: &DatasetManifest) {
    std::fs::create_dir_all(dir.join("pred")).unwrap();
    for e in manifest.ids(Split::Test) {
        let gt = dir.join("data").join(&e.depth_path);
        let depth = read_depth(&gt, DepthFormat::from_path(&gt).unwrap()).unwrap();
        ledgen::io::pfm::write_depth_pfm(&dir.join("pred").join(format!("{}.pfm", e.id)), &depth).unwrap();
    }
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let manifest = generate(dir);
    perfect_predictions(dir, &manifest);

    let report = json(&ledgen(
        &["eval", "--manifest", "data/manifest.json", "--pred", "pred", "--mask", "full", "--verify", "--json"],
        dir,
    ));
    assert_eq!(report["rmse"], 0.0);
    assert_eq!(report["silog"], 0.0);
    assert_eq!(report["delta1"], 1.0);
    assert!(report["n_pixels"].as_u64().unwrap() > 0);

    let binned = json(&ledgen(
        &["eval", "--manifest", "data/manifest.json", "--pred", "pred", "--bins", "--mode", "frame", "--json"],
        dir,
    ));
    assert_eq!(binned["bins"].as_array().unwrap().len(), 10);
}

#[test]
fn verify_rejects_a_resized_depth_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let manifest = generate(dir);
    perfect_predictions(dir, &manifest);
    let victim = dir.join("data").join(&manifest.entries[0].depth_path);
    let small = ledgen::depth::DepthMap::constant(8, 8, 5.0).unwrap();
    ledgen::io::pfm::write_depth_pfm(&victim, &small).unwrap();

    let out = ledgen(&["eval", "--manifest", "data/manifest.json", "--pred", "pred", "--verify"], dir);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn subset_keeps_evaluation_working() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let manifest = generate(dir);
    perfect_predictions(dir, &manifest);

    let summary = json(&ledgen(
        &["subset", "--manifest", "data/manifest.json", "--out", "half/manifest.json", "--fraction", "0.5", "--seed", "1", "--json"],
        dir,
    ));
    let sub = DatasetManifest::load(&dir.join("half/manifest.json")).unwrap();
    assert_eq!(summary["entries"].as_u64().unwrap() as usize, sub.entries.len());
    assert_eq!(sub.ids(Split::Test).len(), manifest.ids(Split::Test).len());
    assert!(sub.ids(Split::Train).len() <= manifest.ids(Split::Train).len().div_ceil(2));

    let out = ledgen(&["eval", "--manifest", "half/manifest.json", "--pred", "pred", "--verify", "--json"], dir);
    assert_eq!(json(&out)["rmse"], 0.0);
}

#[test]
fn project_renders_walls_and_reports_cell_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = json(&ledgen(&["project", "--wall", "10", "--wall", "20", "--out", "fig", "--size", "96", "--json"], dir));
    for name in ["wall_10m.png", "wall_20m.png", "walls.png"] {
        assert!(dir.join("fig").join(name).is_file(), "{name}");
    }
    for wall in summary["walls"].as_array().unwrap() {
        let expected = wall["expected_cell_m"].as_f64().unwrap();
        let measured = wall["measured_cell_m"].as_f64().unwrap();
        assert!((measured / expected - 1.0).abs() < 0.02);
    }

    let manifest = generate(dir);
    let depth = format!("data/{}", manifest.entries[0].depth_path);
    json(&ledgen(&["project", "--depth", &depth, "--out", "shaded", "--json"], dir));
    assert!(dir.join("shaded/projected.png").is_file());
}

#[test]
fn pattern_export_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    json(&ledgen(&["pattern", "--cell", "0.5", "--out", "pat", "--json"], dir));
    assert!(dir.join("pat/control.png").is_file());
    assert!(dir.join("pat/photometry.png").is_file());

    assert_eq!(ledgen(&["pattern", "--cell", "0.125", "--out", "pat"], dir).status.code(), Some(2));
    assert_eq!(ledgen(&["pattern", "--bogus"], dir).status.code(), Some(64));
    assert_eq!(ledgen(&["eval", "--manifest", "nope.json", "--pred", "p"], dir).status.code(), Some(3));

    let out = Command::new(env!("CARGO_BIN_EXE_ledgen"))
        .args(["gradcheck", "--instances", "1"])
        .env("LEDGEN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
}
