use std::fs;
use std::io::BufReader;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bemtrans"))
}

#[test]
fn list_prints_the_feasible_cells() {
    let out = bin().args(["list", "--objects", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("pmchwt ") && l.contains("mass")).unwrap();
    let counts: Vec<&str> = line.split_whitespace().skip(2).collect();
    assert_eq!(counts, ["4", "24", "24"]);
    assert!(!text.lines().any(|l| l.starts_with("muller ") && l.contains("osrc")));
}

#[test]
fn export_mesh_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.msh");
    let out = bin()
        .args(["export-mesh", "--subdivisions", "2", "--radius", "0.01", "--center", "0.1,0,0", "-o"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = bemtrans::mesh::import_msh(BufReader::new(fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(mesh.vertex_count(), 162);
    assert!((mesh.vertices[0][0] - 0.1).abs() <= 0.01 + 1e-12);
    assert!(!bin().args(["export-mesh", "-o"]).arg(&path).output().unwrap().status.success());
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(
        &cfg,
        r#"
formulations = ["pmchwt", "muller"]
preconditioners = ["mass", "osrc"]
[grid]
n = 9
[[scenes]]
name = "tiny"
frequencies = [1e5]
objects = [{ material = "fat", radius = 5e-3 }]
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out_dir).env("BEMTRANS_THREADS", "1").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("skipped"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["cells"], 4);
    assert_eq!(json["skipped"], 1);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "formulations = [\"nope\"]\n").unwrap();
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["list"]).env("BEMTRANS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(bin().args(["verify", "--only", "11"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn verify_reports_each_selected_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("v.json");
    let out = bin().args(["verify", "--only", "1,9", "--json"]).arg(&json).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert!(v[0]["seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn shipped_config_is_valid() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml");
    let cfg = bemtrans::harness::BenchmarkConfig::load(std::path::Path::new(path)).unwrap();
    assert_eq!(cfg.scenes.len(), 2);
    assert_eq!(cfg.preconditioner_specs().unwrap().len(), 5);
}
