use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geodesy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodesy"))
        .args(args)
        .env_remove("GEODESY_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

/// The 2x2 hand environment: a=0.5, b=0.7, c=0.9, d=0.4.
const SQUARE: &str = r#"{
  "box": {"lo": [0, 0], "hi": [1, 1]},
  "edges": [
    {"base": [0, 0], "axis": 0, "weight": 0.5},
    {"base": [1, 0], "axis": 1, "weight": 0.7},
    {"base": [0, 0], "axis": 1, "weight": 0.9},
    {"base": [0, 1], "axis": 0, "weight": 0.4}
  ]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn passage_to_self_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = geodesy(&[
        "passage", "--seed", "1", "--dist", "exponential:1", "--box", "3", "--source", "0,0", "--target", "point:0,0",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), "0.000000000");
}

#[test]
fn passage_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(dir.path(), "square.json", SQUARE);
    let out = dir.path().join("out");
    let o = geodesy(&[
        "passage", "--dist", &format!("fixture:{fixture}"), "--source", "0,0", "--target", "point:1,1",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), "1.200000000");
    let path: Value = serde_json::from_str(&fs::read_to_string(out.join("geodesic.json")).unwrap()).unwrap();
    assert_eq!(path, serde_json::json!([[0, 0], [1, 0], [1, 1]]));
    let csv = fs::read_to_string(out.join("passage.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,dist,pred_axis,pred_sign\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn exit_codes_for_bad_flags_and_infeasible_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = geodesy(&["passage", "--dist", "exponential:1", "--box", "3", "--source", "0,0", "--target", "point:-2,0", "--mask", "half-plane", "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    let o = geodesy(&["passage", "--dist", "exponential:-1", "--box", "3", "--source", "0,0", "--target", "point:1,0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = geodesy(&["passage", "--dist", "exponential:1", "--box", "3", "--source", "9,9", "--target", "point:1,0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = geodesy(&["passage", "--dist", "exponential:1", "--box", "100000", "--source", "0,0", "--target", "point:1,0", "--out", out]);
    assert_eq!(o.status.code(), Some(2), "memory cap");
    assert_eq!(geodesy(&["nonsense"]).status.code(), Some(2));
}

const COEXIST: &str = r#"{
  "experiment": "coexistence",
  "dist": {"kind": "exponential", "rate": 1.0},
  "L": 16, "reps": 2, "seed0": 3,
  "params": {"ell": 2}
}"#;

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", COEXIST);
    let results = dir.path().join("results");
    let run = |workers: &str| {
        let o = geodesy(&["experiment", "--config", &cfg, "--workers", workers, "--results", results.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
        let dest = Path::new(&stdout(&o)).to_path_buf();
        (fs::read(dest.join("records.csv")).unwrap(), dest)
    };
    let (first, dest) = run("1");
    let (second, dest2) = run("2");
    assert_eq!(first, second);
    assert_eq!(dest, dest2);
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 3);

    let summary: Value = serde_json::from_str(&fs::read_to_string(dest.join("summary.json")).unwrap()).unwrap();
    let f = summary["result"]["fraction"].as_f64().unwrap();
    assert!([0.0, 0.5, 1.0].contains(&f));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dest.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(dest.ends_with(&hash[..16]));
    assert_eq!(manifest["seed0"], 3);
    // only the finished run directory is left behind
    assert_eq!(fs::read_dir(&results).unwrap().count(), 1);
}

#[test]
fn experiment_errors() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results");
    let r = results.to_str().unwrap();

    let bad = write(dir.path(), "bad.json", &COEXIST.replace("\"ell\": 2", "\"ell\": 2, \"extra\": true"));
    let o = geodesy(&["experiment", "--config", &bad, "--results", r]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{o:?}");

    let margin = write(
        dir.path(),
        "margin.json",
        r#"{"experiment": "halfplane_compare", "dist": {"kind": "exponential", "rate": 1.0},
            "L": 8, "reps": 2, "seed0": 0, "params": {"target_alpha": 100}}"#,
    );
    let o = geodesy(&["experiment", "--config", &margin, "--results", r]);
    assert_eq!(o.status.code(), Some(4), "{o:?}");
    assert!(!results.exists() || fs::read_dir(&results).unwrap().count() == 0);

    let good = write(dir.path(), "good.json", COEXIST);
    let o = Command::new(env!("CARGO_BIN_EXE_geodesy"))
        .args(["experiment", "--config", &good, "--results", r])
        .env("GEODESY_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn render_tree_partition_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(dir.path(), "square.json", SQUARE);
    let d = dir.path();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();

    let o = geodesy(&["partition", "--dist", &format!("fixture:{fixture}"), "--seeds", "0,0;1,1", "--out", &p("part.json")]);
    assert!(o.status.success(), "{o:?}");
    let o = geodesy(&["render", "--input", &p("part.json"), "--out", &p("part.svg")]);
    assert!(o.status.success(), "{o:?}");
    let svg = fs::read_to_string(p("part.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="cell""#).count(), 4);
    assert_eq!(svg.matches(r##"fill="#1f77b4"/>"##).count(), 2);
    assert_eq!(svg.matches(r##"fill="#ff7f0e"/>"##).count(), 2);

    let o = geodesy(&["tree", "--dist", "exponential:1", "--box", "0,0:0,0", "--root", "0,0", "--out", &p("one.json")]);
    assert!(o.status.success(), "{o:?}");
    geodesy(&["render", "--input", &p("one.json"), "--out", &p("one.svg")]);
    assert_eq!(fs::read_to_string(p("one.svg")).unwrap().matches(r#"class="cell""#).count(), 1);

    let o = geodesy(&["tree", "--seed", "4", "--dist", "uniform:0.5,1.5", "--box", "6", "--root", "0,0", "--out", &p("tree.json")]);
    assert!(o.status.success());
    let o = geodesy(&["passage", "--seed", "4", "--dist", "uniform:0.5,1.5", "--box", "6", "--source", "5,5", "--target", "point:0,0", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    for _ in 0..2 {
        let o = geodesy(&["render", "--input", &p("tree.json"), "--out", &p("tree.svg"), "--highlight", &p("geodesic.json")]);
        assert!(o.status.success(), "{o:?}");
    }
    let a = fs::read(p("tree.svg")).unwrap();
    geodesy(&["render", "--input", &p("tree.json"), "--out", &p("tree2.svg"), "--highlight", &p("geodesic.json")]);
    assert_eq!(a, fs::read(p("tree2.svg")).unwrap());
    assert!(String::from_utf8(a).unwrap().contains(r#"class="path""#));

    let o = geodesy(&["render", "--input", &p("heatmap.json"), "--out", &p("heat.svg")]);
    assert!(o.status.success(), "{o:?}");

    let junk = write(d, "junk.json", "{\"nodes\": 3");
    assert_eq!(geodesy(&["render", "--input", &junk, "--out", &p("x.svg")]).status.code(), Some(2));
    assert!(!d.join("x.svg").exists());
}

#[test]
fn env_fixture_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("env.json");
    let o = geodesy(&["env", "--seed", "9", "--dist", "shifted-exponential:0.1,2", "--box", "2", "--out", f.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let args = |dist: &str| {
        let mut a = vec!["passage", "--seed", "9", "--dist"];
        a.push(Box::leak(dist.to_string().into_boxed_str()));
        a.extend(["--box", "2", "--source", "-2,-2", "--target", "halfspace:1,1@3", "--out"]);
        a.push(Box::leak(dir.path().to_str().unwrap().to_string().into_boxed_str()));
        a
    };
    let hashed = geodesy(&args("shifted-exponential:0.1,2"));
    let fixture = geodesy(&args(&format!("fixture:{}", f.display())));
    assert!(hashed.status.success() && fixture.status.success(), "{hashed:?}");
    assert!(stdout(&hashed).parse::<f64>().unwrap() > 0.0);
    assert_eq!(stdout(&hashed), stdout(&fixture));
}
