use std::path::Path;
use std::process::Command;

use mbf_core::cli::{main_with_args, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK};
use mbf_core::io::{read_mbf, Manifest};
use serde_json::json;

fn write_config(dir: &Path, cfg: &serde_json::Value) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(cmd: &str, config: &str, out: &Path) -> u8 {
    main_with_args(["mbf", cmd, "--config", config, "--out", out.to_str().unwrap()])
}

fn levy_1d(points: usize, replicates: usize) -> serde_json::Value {
    json!({
        "model": {"family": {"type": "levy_fbm", "hurst": 0.5, "dim": 1}},
        "grid": {"lower": [0.125], "upper": [1.0], "resolution": [points]},
        "seed": 24301,
        "replicates": replicates
    })
}

#[test]
fn synth_is_reproducible_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &levy_1d(8, 3));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("synth", &cfg, &a), EXIT_OK);
    assert_eq!(run("synth", &cfg, &b), EXIT_OK);
    let fa = std::fs::read(a.join("field.mbf")).unwrap();
    assert_eq!(fa, std::fs::read(b.join("field.mbf")).unwrap());
    let (header, values) = read_mbf(&fa[..]).unwrap();
    assert_eq!(header.resolution, vec![8]);
    assert_eq!(values.len(), 3);

    let manifest: Manifest = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "synth");
    assert_eq!(manifest.seed, 24301);
    assert_eq!(manifest.files.len(), 1);
    assert_eq!(manifest.files[0].sha256, mbf_core::io::sha256_file(&a.join("field.mbf")).unwrap());
}

#[test]
fn cov_writes_semicolon_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &levy_1d(4, 2000));
    assert_eq!(run("cov", &cfg, dir.path()), EXIT_OK);
    let text = std::fs::read_to_string(dir.path().join("cov.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s;t;analytic;empirical;stderr;z"));
    // All pairs i <= j of four points.
    assert_eq!(lines.count(), 10);
}

#[test]
fn bad_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = levy_1d(4, 1);
    cfg["model"]["family"]["hurst"] = json!(1.2);
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run("synth", &path, dir.path()), EXIT_CONFIG);
    assert_eq!(run("synth", dir.path().join("missing.json").to_str().unwrap(), dir.path()), EXIT_CONFIG);
    assert_eq!(run("lass", &write_config(dir.path(), &levy_1d(4, 1)), dir.path()), EXIT_CONFIG);
}

#[test]
fn wrong_lass_expectation_is_an_acceptance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = levy_1d(4, 1);
    cfg["lass"] = json!({"t0": [0.5], "alpha": [0.5], "rho_exponents": [4, 6, 8, 10], "expect": "gamma_limit"});
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run("lass", &path, dir.path()), EXIT_ACCEPTANCE);
    cfg["lass"]["expect"] = json!("fbm_limit");
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run("lass", &path, dir.path()), EXIT_OK);
}

#[test]
fn heatmap_only_for_strided_planes() {
    let dir = tempfile::tempdir().unwrap();
    let plane = json!({
        "model": {"family": {"type": "fb_sheet", "hurst": [0.4, 0.6]}},
        "grid": {"lower": [0.0, 0.0], "upper": [1.0, 1.0], "resolution": [129, 129]},
        "seed": 1,
        "replicates": 2,
        "holder": {"stride": 16, "heatmap": true},
        "tolerances": {"exponent": 1.0}
    });
    let out = dir.path().join("plane");
    let code = run("holder", &write_config(dir.path(), &plane), &out);
    assert_ne!(code, EXIT_CONFIG);
    let pgm = std::fs::read(out.join("holder.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n9 9\n65535\n"));
    let header = std::fs::read_to_string(out.join("holder.csv")).unwrap();
    assert!(header.lines().next().unwrap().starts_with("t0;"));

    let mut line = levy_1d(64, 2);
    line["holder"] = json!({"stride": 8, "heatmap": true});
    let out = dir.path().join("line");
    run("holder", &write_config(dir.path(), &line), &out);
    assert!(!out.join("holder.pgm").exists());
}

#[test]
fn binary_reports_usage_errors() {
    let bin = env!("CARGO_BIN_EXE_mbf");
    let status = Command::new(bin).arg("nonsense").output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_CONFIG as i32));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("synth"));
}
