use std::fs;
use std::process::{Command, Output};

fn practice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_practice"))
        .args(args)
        .output()
        .expect("run practice")
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).expect("json error record")
}

#[test]
fn synth_then_analyze_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mid = dir.path().join("take.mid");
    let mid = mid.to_str().unwrap();
    let out = practice(&["synth", "--kind", "timing", "--reps", "4", "--out", mid]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = practice(&["analyze", mid, "--kind", "timing"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["drill"], "timing");
    assert_eq!(report["note_count"], 32);
    assert!(report["timing"].is_object());
}

#[test]
fn noiseless_synth_is_deterministic_across_formats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mid");
    let b = dir.path().join("b.mid");
    for (path, format) in [(&a, "single"), (&b, "multi")] {
        let out = practice(&[
            "synth", "--kind", "duration", "--jitter", "0.03", "--seed", "5", "--format", format,
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let ra = practice(&["analyze", a.to_str().unwrap(), "--kind", "duration"]);
    let rb = practice(&["analyze", b.to_str().unwrap(), "--kind", "duration"]);
    assert_eq!(ra.stdout, rb.stdout);
}

#[test]
fn config_file_and_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("drill.toml");
    fs::write(
        &cfg,
        "kind = \"chord-progression\"\n\n[grid]\nbpm = 90.0\nbeats_per_bar = 4\nsubdivision = 2\ncycle_beats = 16.0\ntolerance_beats = 0.05\n\n[progression]\nkey = \"C\"\nchords = \"C Am F G\"\n",
    )
    .unwrap();
    let mid = dir.path().join("take.mid");
    let report = dir.path().join("report.json");
    let out = practice(&[
        "synth", "--config", cfg.to_str().unwrap(), "--pitch", "64", "--reps", "2", "--out",
        mid.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = practice(&[
        "analyze", mid.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(value["grid"]["bpm"], 90.0);
    let waffle = &value["harmony"]["waffle"];
    assert_eq!(waffle["bars"], 4);
}

#[test]
fn invalid_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mid = dir.path().join("take.mid");
    practice(&["synth", "--kind", "timing", "--out", mid.to_str().unwrap()]);
    let out = practice(&["analyze", mid.to_str().unwrap(), "--kind", "timing", "--subdivision", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "config");
    assert_eq!(rec["error"]["field"], "grid.subdivision");
}

#[test]
fn corrupt_file_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mid = dir.path().join("bad.mid");
    let mut bytes = b"MThd\0\0\0\x06\0\0\0\x01\x01\xe0MTrk\0\0\0\x03".to_vec();
    bytes.extend_from_slice(&[0x00, 0x90, 0x3c]);
    fs::write(&mid, bytes).unwrap();
    let out = practice(&["analyze", mid.to_str().unwrap(), "--kind", "duration"]);
    assert_eq!(out.status.code(), Some(3));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "parse");
    assert_eq!(rec["error"]["offset"], 22);
}

#[test]
fn missing_file_is_io_error() {
    let out = practice(&["analyze", "/nonexistent/take.mid", "--kind", "timing"]);
    assert!(!out.status.success());
    assert_eq!(error_record(&out)["error"]["kind"], "io");
}

#[test]
fn schemas_are_json() {
    for of in ["report", "config", "frame"] {
        let out = practice(&["schema", "--of", of]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(v["properties"].is_object(), "{of}");
    }
}
