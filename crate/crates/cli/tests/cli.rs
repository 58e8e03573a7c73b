use hygrohom_cli::{run, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VALIDATION};
use std::path::{Path, PathBuf};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/example.json")
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("hygrohom").chain(list.iter().copied()).map(String::from).collect()
}

fn edited(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn validate_accepts_fixture() {
    let cfg = fixture();
    assert_eq!(run(args(&["validate", "--config", cfg.to_str().unwrap()])), EXIT_OK);
}

#[test]
fn validate_rejects_positive_ambient_pressure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), |v| v["laws"]["constants"]["p_inf"] = 1000.0.into());
    assert_eq!(run(args(&["validate", "--config", cfg.to_str().unwrap()])), EXIT_VALIDATION);
}

#[test]
fn usage_errors() {
    assert_eq!(run(args(&[])), EXIT_USAGE);
    assert_eq!(run(args(&["bake", "--config", "x.json"])), EXIT_USAGE);
    assert_eq!(run(args(&["meso"])), EXIT_USAGE);
    assert_eq!(run(args(&["--help"])), EXIT_OK);
}

#[test]
fn missing_config_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(run(args(&["validate", "--config", missing.to_str().unwrap()])), EXIT_SOLVER);
}

#[test]
fn cell_writes_tensor_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture();
    let out = dir.path().join("cell");
    let code = run(args(&[
        "cell",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--contrast",
        "4.0",
    ]));
    assert_eq!(code, EXIT_OK);
    let csv = std::fs::read_to_string(out.join("cell_tensor.csv")).unwrap();
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row[0], 4.0);
    // Disk of aggregate in a cement matrix: isotropic, between the phase means.
    let frac = 1.0 - std::f64::consts::PI * 0.09;
    let harmonic = 1.0 / (frac / 4.0 + (1.0 - frac));
    let arithmetic = frac * 4.0 + (1.0 - frac);
    for k in [row[1], row[4]] {
        assert!(k > harmonic * 0.98 && k < arithmetic * 1.02, "{k}");
    }
    assert!((row[1] - row[4]).abs() < 1e-8 * row[1]);
    assert!(row[2].abs() < 1e-8 * row[1]);
    for f in ["mobility_table.json", "conductivity_table.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn cell_rejects_nonpositive_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture();
    let code = run(args(&[
        "cell",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--contrast=-1",
    ]));
    assert_eq!(code, EXIT_VALIDATION);
}

fn meso_run(cfg: &Path, out: &Path) -> i32 {
    run(args(&["meso", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]))
}

#[test]
fn meso_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), |v| {
        v["time"]["n_steps"] = 4.into();
        v["output"]["every"] = 2.into();
    });
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(meso_run(&cfg, &a), EXIT_OK);
    assert_eq!(meso_run(&cfg, &b), EXIT_OK);
    let mut files: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f.ends_with(".csv") || f.ends_with(".vtk"))
        .collect();
    files.sort();
    assert!(files.contains(&"p_00004.csv".to_string()));
    assert!(files.contains(&"theta_00002.vtk".to_string()));
    assert!(!files.contains(&"r_00001.csv".to_string()));
    for f in files.iter().filter(|f| *f != "steps.csv") {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["invariants"]["completed"], true);
    assert_eq!(manifest["invariants"]["max_principle_ok"], true);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn solver_failure_exits_two_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), |v| {
        v["time"]["n_steps"] = 4.into();
        v["time"]["peclet_max"] = 1e-30.into();
        v["time"]["peclet_warn"] = 1e-30.into();
        v["initial"]["p"] = serde_json::json!({"kind": "random", "lo": -3.9e6, "hi": -1e4, "seed": 3});
    });
    let out = dir.path().join("run");
    assert_eq!(meso_run(&cfg, &out), EXIT_SOLVER);
    assert!(out.join("p_00000.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["invariants"]["completed"], false);
}

#[test]
fn translate_and_macro_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), |v| {
        v["grid"]["n"] = 8.into();
        v["time"]["n_steps"] = 8.into();
        v["output"]["formats"] = serde_json::json!(["csv"]);
    });
    let out = dir.path().join("tr");
    let code = run(args(&["translate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(code, EXIT_OK);
    let csv = std::fs::read_to_string(out.join("translations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("tau,E_p,E_theta,E_r\n"));
}

#[test]
fn converge_requires_sweep_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), |v| {
        v.as_object_mut().unwrap().remove("sweep");
    });
    let code = run(args(&["converge", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    assert_eq!(code, EXIT_VALIDATION);
}
