use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use waveguide_imaging::format::{load_data_matrix, load_volume_csv};
use wgimage::commands::{image_from_u, noisy, synthesize_in_memory};
use wgimage::{load_config, CliError, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wgimage"))
}

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_balls.json")
}

/// Small, fast setup: k = 1 (12 TE + 6 TM), one ball.
fn small_config(out: &Path) -> Value {
    json!({
        "waveguide": { "a": 10.0, "b": 10.0 },
        "k": 1.0,
        "measurement": { "r": -10.0, "n1": 8, "n2": 8 },
        "scene": {
            "id": "small ball",
            "pitch": 0.5,
            "inclusions": [
                { "shape": { "type": "ball", "center": [4.0, 6.0, -3.0], "radius": 0.6 }, "epsilon": [2.0, 2.0] }
            ]
        },
        "model": { "type": "born" },
        "noise": { "level": 0.05, "seed": 11 },
        "imaging": {
            "x1": { "start": 1.0, "stop": 9.0, "step": 0.5 },
            "x2": { "start": 1.0, "stop": 9.0, "step": 0.5 },
            "x3": { "start": -4.0, "stop": -2.0, "step": 0.5 }
        },
        "output": { "dir": out }
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn error_body(out: &Output) -> Value {
    assert!(
        !out.status.success(),
        "expected failure, stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"));
    v["error"].clone()
}

#[test]
fn two_ball_config_loads_with_82_te_and_64_tm_modes() {
    let setup = load_config(&repo_config()).unwrap();
    assert_eq!((setup.basis.m(), setup.basis.n()), (82, 64));
    assert!(!setup.scene.is_empty());
    let out = run(&["--config", repo_config().to_str().unwrap(), "modes"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().last().unwrap(), "M=82 N=64 total propagating=146");
    assert_eq!(text.lines().filter(|l| l.ends_with(" yes")).count(), 146);
}

#[test]
fn cutoff_wavenumber_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg["k"] = json!(std::f64::consts::PI / 10.0);
    let path = write_config(dir.path(), "cutoff.json", &cfg);
    let err = error_body(&run(&["--config", path.to_str().unwrap(), "modes"]));
    assert_eq!(err["kind"], "ValidationError");
    assert_eq!(err["cause"], "CutoffResonance");
    assert_eq!(err["path"], "k");
    assert_eq!(err["line"], json!(2 + cfg_line_of_k(&cfg)));
}

/// `to_string_pretty` orders keys alphabetically; `k` follows `imaging`.
fn cfg_line_of_k(cfg: &Value) -> usize {
    let text = serde_json::to_string_pretty(cfg).unwrap();
    text.lines().position(|l| l.trim_start().starts_with("\"k\"")).unwrap() - 1
}

#[test]
fn voxels_near_the_plane_are_rejected_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let near = json!({ "shape": { "type": "ball", "center": [5.0, 5.0, -9.0], "radius": 0.6 }, "epsilon": [2.0, 0.0] });
    cfg["scene"]["inclusions"].as_array_mut().unwrap().push(near);
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let err = RunConfig::from_json(&text).unwrap().validate(Some(&text)).unwrap_err();
    match &err {
        CliError::Validation { path, kind, line, .. } => {
            assert_eq!(path, "scene.inclusions[1]");
            assert_eq!(kind, "SeparationViolated");
            // the error points at the opening brace of the offending inclusion
            let lines: Vec<&str> = text.lines().collect();
            let l = line.expect("line is located");
            assert_eq!(lines[l - 1].trim(), "{");
            assert!(lines[l..l + 12].iter().any(|t| t.contains("-9.0")), "line {l}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"k\": 3.0,\n  \"waveguide\": { \"a\": 10 \"b\": 10 }\n}").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "modes"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_body(&out);
    assert_eq!(err["kind"], "ParseError");
    assert_eq!(err["line"], 3);
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg["measurement"]["n3"] = json!(4);
    let path = write_config(dir.path(), "extra.json", &cfg);
    assert_eq!(
        error_body(&run(&["--config", path.to_str().unwrap(), "modes"]))["kind"],
        "ParseError"
    );
}

#[test]
fn undersampled_grid_and_bad_lattice_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg["measurement"]["n1"] = json!(4);
    let text = serde_json::to_string(&cfg).unwrap();
    let err = RunConfig::from_json(&text).unwrap().validate(None).unwrap_err();
    assert!(
        matches!(&err, CliError::Validation { path, .. } if path == "measurement"),
        "{err:?}"
    );

    let mut cfg = small_config(dir.path());
    cfg["imaging"]["x3"] = json!({ "start": -10.5, "stop": -2.0, "step": 0.5 });
    let text = serde_json::to_string(&cfg).unwrap();
    let err = RunConfig::from_json(&text).unwrap().validate(None).unwrap_err();
    assert!(
        matches!(&err, CliError::Validation { path, .. } if path == "imaging"),
        "{err:?}"
    );

    let mut cfg = small_config(dir.path());
    cfg["noise"]["level"] = json!(-0.1);
    let text = serde_json::to_string(&cfg).unwrap();
    let err = RunConfig::from_json(&text).unwrap().validate(None).unwrap_err();
    assert!(
        matches!(&err, CliError::Validation { path, .. } if path == "noise.level"),
        "{err:?}"
    );
}

#[test]
fn verify_on_a_single_born_voxel_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg["k"] = json!(3.0);
    cfg["measurement"] = json!({ "r": -10.0, "n1": 20, "n2": 20 });
    cfg["scene"]["inclusions"] = json!([
        { "shape": { "type": "box", "min": [4.8, 4.8, -5.2], "max": [4.95, 4.95, -5.05] }, "epsilon": [2.0, 2.0] }
    ]);
    cfg["scene"]["pitch"] = json!(0.25);
    let path = write_config(dir.path(), "one.json", &cfg);
    let setup = load_config(&path).unwrap();
    assert_eq!(setup.scene.len(), 1);
    let out = run(&["--config", path.to_str().unwrap(), "verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["factorization", "adjointness", "h_psi identity", "orthogonality"]
    );
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn psf_peaks_at_the_source_node() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg["k"] = json!(3.0);
    cfg["measurement"] = json!({ "r": -10.0, "n1": 20, "n2": 20 });
    cfg["imaging"] = json!({
        "x1": { "start": 3.0, "stop": 7.0, "step": 0.25 },
        "x2": { "start": 3.0, "stop": 7.0, "step": 0.25 },
        "x3": { "start": -7.0, "stop": -3.0, "step": 0.25 }
    });
    let path = write_config(dir.path(), "psf.json", &cfg);
    let out = run(&["--config", path.to_str().unwrap(), "psf", "--xstar", "5,5,-5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let vol = load_volume_csv(dir.path().join("psf.csv")).unwrap();
    let (_, peak) = vol.argmax().unwrap();
    assert_eq!((peak.x1, peak.x2, peak.x3), (5.0, 5.0, -5.0));
}

#[test]
fn file_round_trip_matches_the_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), "rt.json", &cfg);
    let p = path.to_str().unwrap();
    assert!(run(&["--config", p, "synthesize"]).status.success());
    let out = run(&["--config", p, "image"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let setup = load_config(&path).unwrap();
    let mem = synthesize_in_memory(&setup, setup.config.model).unwrap();
    let disk = load_data_matrix(dir.path().join("data.wgum")).unwrap();
    assert_eq!(disk, mem.u);
    assert_eq!(disk.scene_id, "small ball");
    let vol_mem = image_from_u(&setup, &noisy(&setup, &mem.u, 11).unwrap()).unwrap();
    let vol_disk = load_volume_csv(dir.path().join("image.csv")).unwrap();
    assert_eq!(vol_disk.values, vol_mem.values);
    let scene: waveguide_imaging::Scene =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scene.json")).unwrap()).unwrap();
    assert_eq!(scene, setup.scene);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), "flags.json", &cfg);
    let p = path.to_str().unwrap();
    let alt = dir.path().join("alt");
    assert!(run(&[
        "--config",
        p,
        "--output",
        alt.to_str().unwrap(),
        "--threads",
        "1",
        "synthesize"
    ])
    .status
    .success());
    assert!(alt.join("data.wgum").exists() && !dir.path().join("data.wgum").exists());

    let image = |seed: &str| {
        let o = run(&[
            "--config",
            p,
            "--output",
            alt.to_str().unwrap(),
            "--seed",
            seed,
            "image",
        ]);
        assert!(o.status.success());
        load_volume_csv(alt.join("image.csv")).unwrap().values
    };
    let (a, b, c) = (image("1"), image("1"), image("2"));
    assert_eq!(a, b);
    assert_ne!(a, c);

    let ls = dir.path().join("ls");
    assert!(run(&[
        "--config",
        p,
        "--output",
        ls.to_str().unwrap(),
        "--model",
        "ls",
        "synthesize"
    ])
    .status
    .success());
    let born = load_data_matrix(alt.join("data.wgum")).unwrap();
    let multiple = load_data_matrix(ls.join("data.wgum")).unwrap();
    assert_ne!(born.values(), multiple.values());
}

#[test]
fn failures_exit_nonzero_with_a_json_body() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), "f.json", &cfg);
    let p = path.to_str().unwrap();

    let err = error_body(&run(&["--config", "/nonexistent/config.json", "modes"]));
    assert_eq!(err["kind"], "Io");
    assert_eq!(error_body(&run(&["modes"]))["kind"], "UsageError");
    assert_eq!(
        error_body(&run(&["--config", p, "psf", "--xstar", "5,5"]))["kind"],
        "UsageError"
    );
    assert_eq!(
        error_body(&run(&["--config", p, "psf", "--xstar", "50,5,-3"]))["kind"],
        "PointOutsideHalfGuide"
    );
    assert_eq!(error_body(&run(&["--config", p, "image"]))["kind"], "Io");
    assert_eq!(
        error_body(&run(&["--config", p, "--model", "fem", "modes"]))["kind"],
        "UsageError"
    );

    // a numeric failure: the iteration cannot converge in a single step
    let mut cfg = small_config(dir.path());
    cfg["model"] = json!({ "type": "ls", "tol": 1e-14, "max_iter": 1 });
    cfg["scene"]["inclusions"][0]["epsilon"] = json!([6.0, 1.0]);
    let path = write_config(dir.path(), "ls.json", &cfg);
    let out = run(&["--config", path.to_str().unwrap(), "synthesize"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_body(&out)["kind"], "LSDiverged");
}

#[test]
fn export_converts_between_csv_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), "e.json", &cfg);
    let p = path.to_str().unwrap();
    assert!(run(&["--config", p, "psf", "--xstar", "4,6,-3"]).status.success());
    let csv = dir.path().join("psf.csv");
    let vtk = dir.path().join("psf.vtk");
    let back = dir.path().join("back.csv");
    assert!(run(&["export", csv.to_str().unwrap(), vtk.to_str().unwrap()])
        .status
        .success());
    assert!(run(&["export", vtk.to_str().unwrap(), back.to_str().unwrap()])
        .status
        .success());
    let (a, b) = (load_volume_csv(&csv).unwrap(), load_volume_csv(&back).unwrap());
    assert_eq!(a.values, b.values);
    assert_eq!(a.lattice.dims(), b.lattice.dims());
    assert_eq!(
        error_body(&run(&["export", csv.to_str().unwrap(), "out.png"]))["kind"],
        "UsageError"
    );
}
