use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn make_fixture(spec: &str, dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_make-fixture")).args([spec, "--dir"]).arg(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn untangle(dir: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_untangle"))
        .arg("--rest")
        .arg(dir.join("rest.mesh"))
        .arg("--init")
        .arg(dir.join("init.mesh"))
        .arg("--out")
        .arg(dir.join("out.mesh"))
        .arg("--report")
        .arg(dir.join("report.json"))
        .args(extra)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn successful_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture("point_swap_square:8", dir.path());
    let locks = dir.path().join("locks.txt");
    let out = untangle(dir.path(), &["--locks", locks.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["success"], true);
    assert!(r["min_det"].as_f64().unwrap() > 0.0);
    assert_eq!(r["config"]["threads"], 2);
    assert!(dir.path().join("out.mesh").is_file());
}

#[test]
fn regular_targets_on_the_fan() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture("triangle_fan_12", dir.path());
    let out = untangle(dir.path(), &["--targets", "regular", "--scheme", "newton", "--eps-rule", "theory"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path())["config"]["targets"], "regular");
}

#[test]
fn unfinished_run_exits_one_and_still_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture("point_swap_square:8", dir.path());
    let out = untangle(dir.path(), &["--eps-rule", "theory", "--max-outer", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["success"], false);
    assert_eq!(r["trace"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("out.mesh").is_file());
}

#[test]
fn malformed_mesh_exits_two_with_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "MeshVersionFormatted 2\nDimension 3\nVertices\n4\n0 0 0 0\n1 0 0 0\n0 1 0 0\n0 0 1 0\nTetrahedra\n1\n0 2 3 4 0\nEnd\n";
    fs::write(dir.path().join("rest.mesh"), bad).unwrap();
    fs::write(dir.path().join("init.mesh"), bad).unwrap();
    let out = untangle(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rest.mesh:11"), "{err}");
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = untangle(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn bad_option_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture("triangle_fan_12", dir.path());
    let out = untangle(dir.path(), &["--scheme", "gradient"]);
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_make-fixture")).arg("cavity_cube:2:10").output().unwrap();
    assert!(!out.status.success());
}
