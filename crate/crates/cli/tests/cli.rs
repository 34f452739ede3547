use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn jetcone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetcone"))
        .args(args)
        .env_remove("JETCONE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn cones_dual_gamma() {
    let o = jetcone(&["cones", "dual", "--gamma", "2", "--jet", "1,(1,0),0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "Inside");
}

#[test]
fn cones_classify_vertex() {
    let o = jetcone(&["cones", "classify", "--family", "D,P", "--jet", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "Boundary");
    let o = jetcone(&["cones", "classify", "--family", "P", "--jet", "-1,(0,0),((1,0),(0,2))"]);
    assert_eq!(stdout(&o).trim(), "Inside");
}

#[test]
fn cones_parabolic_approximator() {
    let o = jetcone(&["cones", "approximator", "--family", "Dn,Pn", "--parabolic", "--T", "1", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "parabolic");
    assert_eq!(v["t_end"], 1.0);
    assert_eq!(v["blowup"]["axis"], 2);
    assert_eq!(v["blowup"]["side"], "upper");
}

#[test]
fn malformed_inputs_exit_2() {
    for args in [
        vec!["cones", "dual", "--family", "P", "--jet", "1,(1,0"],
        vec!["cones", "dual", "--jet", "0"],
        vec!["cones", "classify", "--family", "Z", "--jet", "0"],
        vec!["garding", "--poly", "sigma:x:1", "--p", "1"],
        vec!["counterexample", "--beta", "1", "--gamma-z", "3"],
    ] {
        let o = jetcone(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stdout(&o));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn garding_lorentz_eigenvalues() {
    let o = jetcone(&["garding", "--poly", "lorentz", "--p", "3,-1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ev: Vec<f64> = serde_json::from_value(v["eigenvalues"].clone()).unwrap();
    assert!((ev[0] - 2.0).abs() < 1e-12 && (ev[1] - 4.0).abs() < 1e-12);
    assert_eq!(v["g"], 8.0);
    assert_eq!(v["cone"], "Inside");
    let o = jetcone(&["garding", "--poly", "sigma:3:2", "--certify", "200"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn counterexample_reports_n_star_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let o = jetcone(&["counterexample", "--beta", "1", "--gamma-z", "1.25", "--csv", csv.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["n_star"], 12);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("n,lhs,m"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn compare_krylov_full_mode_fails() {
    let reduced = jetcone(&["compare", "--operator", "krylov", "--counts", "31,31,21", "--mode", "reduced", "--no-timestamp"]);
    assert_eq!(reduced.status.code(), Some(0), "{}", String::from_utf8_lossy(&reduced.stderr));
    let full = jetcone(&["compare", "--operator", "krylov", "--counts", "31,31,21", "--mode", "full", "--no-timestamp"]);
    assert_eq!(full.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&full)).unwrap();
    assert!(v.get("error").is_none());
    let c = &v["result"]["comparisons"][0];
    for key in ["experiment", "params", "prechecks", "boundary_max", "interior_max", "witnesses", "pass"] {
        assert!(c.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn fibereg_command_certifies_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("ot.json");
    let manifest = read_json(&example("ot.json"));
    std::fs::write(&op, manifest["experiments"][1]["operator"].to_string()).unwrap();
    let o = jetcone(&["fibereg", "--operator", op.to_str().unwrap(), "--pairs", "2000", "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["result"]["certificate"]["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn bundled_ot_manifest_passes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let path = example("ot.json");
    let m = path.to_str().unwrap();
    let o1 = jetcone(&["run", m, "--out", a.to_str().unwrap(), "--jobs", "2", "--no-timestamp"]);
    assert_eq!(o1.status.code(), Some(0), "{}{}", stdout(&o1), String::from_utf8_lossy(&o1.stderr));
    let o2 = jetcone(&["run", m, "--out", b.to_str().unwrap(), "--jobs", "2", "--no-timestamp"]);
    assert_eq!(o2.status.code(), Some(0));
    let summary = read_json(&a.join("summary.json"));
    assert_eq!(summary["pass"], true);
    assert!(summary.get("timestamp").is_none());
    for name in ["summary.json", "ot-battery.json", "ot-fibereg.json", "zmp-unit-square.json"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    let battery = read_json(&a.join("ot-battery.json"));
    assert_eq!(battery["result"]["corruption_detected"], true);
    assert_eq!(battery["result"]["passing"], 20);
}

#[test]
fn bundled_failure_manifest_demonstrates_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = jetcone(&["run", example("cil_failure.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&out.join("standard-condition-failure.json"));
    assert_eq!(r["pass"], true);
    assert!(r.get("timestamp").is_some());
    let steps = r["result"]["steps"].as_array().unwrap();
    let last = steps.last().unwrap();
    assert!(last["lhs"].as_f64().unwrap() >= 0.9 && last["m"].as_f64().unwrap() <= 1e-3);
    assert!(out.join("standard-condition-failure.csv").exists());
}

#[test]
fn seed_variable_overrides_manifest_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(
        &m,
        r#"{"version": 1, "experiments": [{"kind": "zmp", "name": "z", "params": {"count": 3},
            "domain": {"lower": [0, 0], "upper": [1, 1], "counts": [21, 21]}, "seed": 5}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_jetcone"))
        .args(["run", m.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timestamp"])
        .env("JETCONE_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("z.json"))["seed"], 99);
    let bad = Command::new(env!("CARGO_BIN_EXE_jetcone"))
        .args(["run", m.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("JETCONE_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_manifests_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"version": 1, "experiments": [{"kind": "teleport"}]}"#,
        r#"{"version": 1, "experiments": [{"kind": "comparison", "operator": "heat"}]}"#,
        r#"{"version": 1, "experiments": [{"kind": "comparison"}]}"#,
        r#"{"version": 2, "experiments": [{"kind": "zmp"}]}"#,
        r#"{"version": 1, "experiments": [{"kind": "zmp", "params": {"count": 1, "extra": 0}}]}"#,
        r#"{"version": 1, "experiments": [{"kind": "counterexample", "params": {"beta": 1, "gamma_z": 3}}]}"#,
        r#"{"version": 1, "experiments": [{"kind": "zmp", "name": "a"}, {"kind": "zmp", "name": "a"}]}"#,
        r#"{"version": 1, "experiments": []}"#,
        "not json",
    ];
    for (k, text) in cases.iter().enumerate() {
        let m = dir.path().join(format!("m{k}.json"));
        std::fs::write(&m, text).unwrap();
        let o = jetcone(&["run", m.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = jetcone(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_experiment_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(
        &m,
        r#"{"version": 1, "experiments": [{"kind": "comparison", "name": "full", "operator": "krylov",
            "params": {"counts": [31, 31, 21], "mode": "full"}}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = jetcone(&["run", m.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(read_json(&out.join("summary.json"))["pass"], false);
    let r = read_json(&out.join("full.json"));
    assert!(r.get("error").is_none(), "{}", r["error"]);
    assert_eq!(r["result"]["comparisons"][0]["pass"], false);
}

fn validator(name: &str) -> jsonschema::Validator {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    jsonschema::validator_for(&read_json(&root.join(name))).unwrap()
}

#[test]
fn bundled_manifests_and_reports_match_the_schemas() {
    let manifest = validator("manifest.schema.json");
    for name in ["ot.json", "cil_failure.json", "parabolic.json"] {
        let m = read_json(&example(name));
        assert!(manifest.is_valid(&m), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = jetcone(&["run", example("cil_failure.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(validator("report.schema.json").is_valid(&read_json(&out.join("standard-condition-failure.json"))));
    assert!(validator("summary.schema.json").is_valid(&read_json(&out.join("summary.json"))));
}
