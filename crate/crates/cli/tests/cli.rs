use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
a = 1.0
gamma = 1.0
chi_c = 2.0
chi_u = 0.5
r0 = 1.0
mass = 3.0

[f_act]
family = "hill"
saturation = 1.0
half_max = 1.0
exponent = 2.0

[f_und]
family = "linear"
slope = 1.0

[analysis]
modes = [0, 2]
v_max = 0.06
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_motility"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn missing_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = CONFIG.replace("gamma = 1.0\n", "");
    let out = run(dir.path(), &config, &["resting-state"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn unknown_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), CONFIG, &["--set", "analysis.ordr=12", "branch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordr"));
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), CONFIG, &["dispersion"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/dispersion_roots.csv")).unwrap();
    assert_eq!(csv, "chi_c,m,index,re,im,residual\n");
    let json = fs::read_to_string(dir.path().join("out/dispersion.json")).unwrap();
    assert_eq!(json.trim(), "[]");
}

#[test]
fn dispersion_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--set", "analysis.chi_c_grid=[1.0, 2.5, 3.5]", "dispersion"];
    let first = run(dir.path(), CONFIG, &args);
    assert_eq!(first.status.code(), Some(0));
    let a = fs::read(dir.path().join("out/dispersion_roots.csv")).unwrap();
    let b_json = fs::read(dir.path().join("out/dispersion.json")).unwrap();
    let second = run(dir.path(), CONFIG, &args);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(a, fs::read(dir.path().join("out/dispersion_roots.csv")).unwrap());
    assert_eq!(b_json, fs::read(dir.path().join("out/dispersion.json")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.lines().count() > 1);
}

#[test]
fn branch_and_shape_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), CONFIG, &["branch"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/branch.csv")).unwrap();
    assert!(csv.starts_with("v,chi_c,p1,"));
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/branch.json")).unwrap()).unwrap();
    assert_eq!(json["complete"], true);

    let out = run(dir.path(), CONFIG, &["--set", "analysis.contour_points=16", "shape", "--velocity", "0.04"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/shape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn verify_subset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(dir.path(), CONFIG, &["verify", "--only", "2,3"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    let a = fs::read(dir.path().join("out/verify.json")).unwrap();
    let second = run(dir.path(), CONFIG, &["verify", "--only", "2,3"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(a, fs::read(dir.path().join("out/verify.json")).unwrap());
    let table = fs::read_to_string(dir.path().join("out/verify.txt")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn solver_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), CONFIG, &["shape", "--velocity", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), CONFIG, &["--set", "analysis.newton_tol=1e-300", "branch"]);
    assert!(matches!(out.status.code(), Some(3) | Some(4)), "{:?}", out.status);
}
