//! End-to-end runs of the `pcs-rod` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn pcs_rod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcs-rod")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_is_a_config_error() {
    let out = pcs_rod(&["ik", "--config", "/nonexistent/experiment.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("ERROR:config:"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("shape_reg.json")).unwrap();
    let bad = text.replacen("\"gains\"", "\"gainz\"", 1);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let out = pcs_rod(&["shape-reg", "--config", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("ERROR:config:") && err.contains("gainz"), "{err}");
}

#[test]
fn bad_arguments_exit_with_one() {
    let out = pcs_rod(&["tip-track", "--config", "x.json", "--mode", "joint"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("ERROR:config:"));
    assert_eq!(pcs_rod(&["--help"]).status.code(), Some(0));
}

#[test]
fn ik_writes_shapes_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcs_rod(&["ik", "--config", path_str(&config("ik_two_sections.json")), "--out", path_str(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.starts_with("ik: converged=true"), "{summary}");
    for f in ["ik_solution_1_shape.csv", "ik_solution_2_shape.csv", "ik_shape_xy.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let svg = std::fs::read_to_string(dir.path().join("ik_shape_xy.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn shape_regulation_csv_is_reproducible_and_parses() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = pcs_rod(&["shape-reg", "--config", path_str(&config("shape_reg.json")), "--out", path_str(dir.path())]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let name = "shape_reg_trace.csv";
    let first = std::fs::read(a.path().join(name)).unwrap();
    assert_eq!(first, std::fs::read(b.path().join(name)).unwrap());

    let mut reader = csv::Reader::from_reader(first.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.len(), 1 + 12 + 6 + 12 + 2);
    assert_eq!(header[0], "t");
    assert_eq!(header[1], "q_bar_1");
    assert_eq!(&header[13..19], ["tip_x", "tip_y", "tip_z", "r_x", "r_y", "r_z"]);
    assert_eq!(header[19], "wrench_1");
    assert_eq!(&header[31..], ["error", "energy"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    // 5 s at 1e-3 s, every 10th step
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[500][0] - 5.0).abs() < 1e-12);
    let e0 = rows[0][31];
    let i = 100; // t = 1 s
    assert!((rows[i][31] / e0 - (-2.0f64).exp()).abs() < 1e-6);
}

#[test]
fn check_passes_on_the_default_rod() {
    let out = pcs_rod(&["check", "--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 9, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn shipped_configs_pass_check() {
    for name in ["ik_two_sections.json", "shape_reg.json", "tip_track_strain.json", "tip_track_task.json"] {
        let out = pcs_rod(&["check", "--config", path_str(&config(name))]);
        assert!(out.status.success(), "{name}: {}{}", String::from_utf8_lossy(&out.stdout), stderr(&out));
    }
}

#[test]
fn strain_mode_tip_tracking_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcs_rod(&["tip-track", "--config", path_str(&config("tip_track_strain.json")), "--out", path_str(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    let after: f64 = summary
        .split_whitespace()
        .find_map(|w| w.strip_prefix("max_tip_error_after_3s_m="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(after < 1e-3, "{summary}");
    for f in ["tip_track_strain_trace.csv", "tip_track_strain_tip_path.svg", "tip_track_strain_wrench.svg", "tip_track_strain_error.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}
