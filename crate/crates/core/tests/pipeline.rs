use std::path::Path;

use serde_json::Value;
use worldgen::pipeline::{self, PipelineConfig, PipelineError, RunStatus};
use worldgen::tiler::TileRole;

fn sample(dir: &Path) -> Value {
    let path = pipeline::write_sample_dataset(dir, 7).unwrap();
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config(dir: &Path, v: &Value) -> PipelineConfig {
    PipelineConfig::from_json(&v.to_string(), dir).unwrap()
}

fn checksums(m: &pipeline::Manifest) -> std::collections::BTreeMap<String, String> {
    m.checksums().into_iter().collect()
}

#[test]
fn elevation_only_gives_heightmap_tiles_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sample(dir.path());
    let elevation = v["inputs"]["elevation"].clone();
    v["inputs"] = serde_json::json!({ "elevation": elevation });
    let m = pipeline::run_pipeline(&config(dir.path(), &v)).unwrap();
    assert_eq!(m.tile_sets.len(), 1);
    assert_eq!(m.tile_sets[0].role, TileRole::Heightmap);
    assert!(m.meshes.is_empty() && m.textures.is_empty());
    assert!(m.files.iter().all(|f| f.path.starts_with("terrain/")));
    assert!(pipeline::cmd_validate(&dir.path().join("out")).unwrap().ok());
}

#[test]
fn disabling_an_input_leaves_other_stages_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sample(dir.path());
    let full = checksums(&pipeline::run_pipeline(&config(dir.path(), &v)).unwrap());
    for input in ["isolines", "volume", "streamlines", "buildings"] {
        let mut w = v.clone();
        w["inputs"].as_object_mut().unwrap().remove(input);
        w["output_dir"] = format!("out_no_{input}").into();
        let part = checksums(&pipeline::run_pipeline(&config(dir.path(), &w)).unwrap());
        assert!(!part.is_empty());
        for (path, sum) in &part {
            assert_eq!(full.get(path), Some(sum), "{path} changed without {input}");
        }
        assert!(part.len() < full.len());
    }
    // Thread count and rerun do not matter either.
    v["output_dir"] = "out_again".into();
    assert_eq!(full, checksums(&pipeline::run_pipeline(&config(dir.path(), &v)).unwrap()));
}

#[test]
fn failing_stage_leaves_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let v = sample(dir.path());
    std::fs::write(dir.path().join("landuse.geojson"), b"{\"type\": \"FeatureCollection\", \"features\": [").unwrap();
    let f = pipeline::run_pipeline(&config(dir.path(), &v)).unwrap_err();
    assert_eq!(f.error.exit_code(), 3);
    assert_eq!(f.manifest.status, RunStatus::Partial);
    let stages: Vec<&str> = f.manifest.timings.iter().map(|t| t.stage.as_str()).collect();
    assert_eq!(stages, ["terrain", "roads"]);
    let on_disk = pipeline::Manifest::load(&dir.path().join("out")).unwrap();
    assert_eq!(on_disk.files.len(), f.manifest.files.len());
    assert!(on_disk.error.unwrap().contains("landuse"));
    let report = pipeline::cmd_validate(&dir.path().join("out")).unwrap();
    let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
    assert_eq!(failed, ["manifest status"]);
}

#[test]
fn unmapped_labels_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sample(dir.path());
    v["landuse_classes"].as_object_mut().unwrap().remove("pasture");
    v["landuse_classes"].as_object_mut().unwrap().remove("park");
    let (masks_err, run_err) = {
        let cfg = config(dir.path(), &v);
        (pipeline::build_masks(&cfg).unwrap_err(), pipeline::run_pipeline(&cfg).unwrap_err().error)
    };
    for e in [masks_err, run_err] {
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("park") || msg.contains("pasture"), "{msg}");
    }
}

#[test]
fn missing_road_widths_rejected_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sample(dir.path());
    v.as_object_mut().unwrap().remove("road_widths");
    let e = PipelineConfig::from_json(&v.to_string(), dir.path()).unwrap_err();
    assert!(matches!(e, PipelineError::Config(_)));
}

#[test]
fn validate_names_corrupted_and_missing_tiles() {
    let dir = tempfile::tempdir().unwrap();
    let v = sample(dir.path());
    let m = pipeline::run_pipeline(&config(dir.path(), &v)).unwrap();
    let out = dir.path().join("out");
    let victim = &m.tile_sets[1].files[0].path;
    let mut bytes = std::fs::read(out.join(victim)).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(out.join(victim), bytes).unwrap();
    let r = pipeline::cmd_validate(&out).unwrap();
    let failed: Vec<String> = r.failures().map(|c| c.name.clone()).collect();
    assert!(failed.contains(&format!("checksum {victim}")), "{failed:?}");

    let gone = &m.tile_sets[0].files[3].path;
    std::fs::remove_file(out.join(gone)).unwrap();
    let r = pipeline::cmd_validate(&out).unwrap();
    let dense = r.checks.iter().find(|c| c.name == "tile set heightmap dense rectangle").unwrap();
    assert!(!dense.ok);
    assert!(dense.detail.contains("heightmap_x1_y1"), "{}", dense.detail);
}

#[test]
fn bench_rows_and_count_errors() {
    let dir = tempfile::tempdir().unwrap();
    let v = sample(dir.path());
    let cfg = config(dir.path(), &v);
    let out = dir.path().join("bench");
    let r = pipeline::cmd_bench(&cfg, Some(&[1]), &out).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(out.join(pipeline::bench::REPORT_JSON).is_file());
    let e = pipeline::cmd_bench(&cfg, Some(&[1_000_000_000]), &out).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let mut w = v.clone();
    w["inputs"].as_object_mut().unwrap().remove("streamlines");
    assert!(pipeline::cmd_bench(&config(dir.path(), &w), None, &out).is_err());
}
