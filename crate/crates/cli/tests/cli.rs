use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimcavity_cli::raster::{ingest_raster, Raster, RasterOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimcavity"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

const SMALL_BANDS: &str = r#"{
  "membrane": {"position": {"value": 300, "unit": "um"}, "tilt_z": {"value": 0.3, "unit": "mrad"}},
  "sweep": {"positions": {"unit": "um", "start": 300, "stop": 301.063, "points": 201}}
}"#;

#[test]
fn bands_writes_provenance_and_ingestible_tables() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", SMALL_BANDS);
    let out = run(dir.path(), &["--config", "c.json", "--out", "o", "bands"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["bands_analytic.csv", "diagonal.csv", "spectrum.csv", "bands.json"] {
        let text = std::fs::read_to_string(dir.path().join("o").join(name)).unwrap();
        assert!(text.contains("config_sha256"), "{name}");
        assert!(text.contains("mimcavity 0.1.0"), "{name}");
        assert!(text.contains("units"), "{name}");
    }
    let Raster::Series(s) = ingest_raster(&dir.path().join("o/bands_analytic.csv"), &RasterOptions::new(1.0)).unwrap() else {
        panic!()
    };
    assert_eq!(s.len(), 201);
    assert_eq!(s.columns.len(), 5);
    assert_eq!(s.metadata["command"], "bands");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "b.json", SMALL_BANDS);
    write(
        dir.path(),
        "g.json",
        r#"{"sweep": {"positions": {"unit": "um", "start": 0, "stop": 500, "points": 6},
                      "tilts": {"unit": "mrad", "values": [0, 0.25]}}}"#,
    );
    for (cfg, cmd) in [("b.json", "bands"), ("g.json", "gapmap")] {
        let mut outputs = Vec::new();
        for threads in ["1", "8", "1", "8"] {
            let o = format!("o_{cmd}_{threads}_{}", outputs.len());
            let out = run(dir.path(), &["--config", cfg, "--out", &o, "--threads", threads, cmd]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path().join(&o))
                .unwrap()
                .map(|e| {
                    let e = e.unwrap();
                    (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
                })
                .collect();
            files.sort();
            outputs.push((files, out.stdout));
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{cmd} output differs between runs");
    }
}

#[test]
fn config_errors_exit_2_with_key() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", r#"{"membrane": {"tilt_x": {"value": 1, "unit": "mrad"}}}"#);
    let out = run(dir.path(), &["--config", "c.json", "bands"]);
    assert_eq!(out.status.code(), Some(2));
    let j = error_json(&out);
    assert_eq!(j["error"]["kind"], "config");
    assert_eq!(j["error"]["key"], "membrane.tilt_x");

    let out = run(dir.path(), &["--method", "guess", "bands"]);
    assert_eq!(out.status.code(), Some(2));
    error_json(&out);

    write(dir.path(), "n.json", "{}");
    let out = run(dir.path(), &["--config", "n.json", "fit"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["key"], "fit");
}

#[test]
fn ingestion_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.csv", "position[um],detuning[MHz],branch[label]\n0,NaN,upper\n");
    write(dir.path(), "c.json", r#"{"fit": {"kind": "hyperbola", "data": "d.csv"}}"#);
    let out = run(dir.path(), &["--config", "c.json", "--out", "o", "fit"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"]["kind"], "ingestion");
}

#[test]
fn numerical_errors_exit_3() {
    // Too few samples for the fit.
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.csv", "travel[um],tilt[mrad]\n0,0.1\n1,0.2\n");
    write(dir.path(), "c.json", r#"{"calibrate": {"data": "d.csv"}}"#);
    let out = run(dir.path(), &["--config", "c.json", "--out", "o", "calibrate"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "numerical");
}

#[test]
fn hyperbola_fit_recovers_synthetic_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let (a, half, xc) = (2e15f64, 2.5e6f64, 325.0f64);
    let mut text = String::from("position[um],detuning[MHz],branch[label]\n");
    for i in 0..41 {
        let x = xc - 0.02 + 0.04 * i as f64 / 40.0;
        let u = (x - xc) * 1e-6;
        let r = (a * a * u * u + half * half).sqrt() / 1e6;
        text.push_str(&format!("{x:.12},{r:.12},upper\n{x:.12},{:.12},lower\n", -r));
    }
    write(dir.path(), "d.csv", &text);
    write(dir.path(), "c.json", r#"{"fit": {"kind": "hyperbola", "data": "d.csv"}}"#);
    let out = run(dir.path(), &["--config", "c.json", "--out", "o", "fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let gap = j["fit"]["gap"].as_f64().unwrap();
    assert!((gap / 5e6 - 1.0).abs() < 1e-6, "gap {gap}");
    let summary = std::fs::read_to_string(dir.path().join("o/fit.json")).unwrap();
    assert!(summary.contains("\"gap\": 5.0000"), "{summary}");
}

#[test]
fn oracle_passes_at_default_geometry() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"membrane": {"position": {"value": 500, "unit": "um"}, "tilt_z": {"value": 0.4, "unit": "mrad"}}}"#,
    );
    let out = run(dir.path(), &["--config", "c.json", "--out", "o", "oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(j["max_relative_error"].as_f64().unwrap() < 0.01);
}

#[test]
fn json_tables_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"sweep": {"positions": {"unit": "um", "start": 0, "stop": 1.1, "points": 41}},
            "output": {"directory": "res", "tables": "json"}}"#,
    );
    let out = run(dir.path(), &["--config", "c.json", "bands"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("res/bands_analytic.json")).unwrap();
    let j: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(j["columns"]["position"].as_array().unwrap().len(), 41);
    assert_eq!(j["provenance"]["units"][0][1], "m");
}
