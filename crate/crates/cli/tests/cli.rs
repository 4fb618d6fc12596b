use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn config(dir: &Path, extra: Value) -> PathBuf {
    let mut doc = json!({
        "phantom": {
            "dim": 2, "grid_n": 16, "b_radius": 1.0,
            "omega_center": [0.0, 0.0], "omega_radius": 0.5, "detectors": 24,
            "f0": [{"center": [0.0, 0.0], "radius": 3.0, "amplitude": 2.718281828459045}],
            "f1": [{"center": [0.1, 0.0], "radius": 0.3, "amplitude": 0.5}],
            "q": [{"center": [0.0, 0.0], "radius": 0.35, "amplitude": 0.2}]
        },
        "plan": {"interior_detectors": 4}
    });
    if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
        d.extend(e);
    }
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    path
}

fn pat(cfg: &Path, out: &Path, mode: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pat"))
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(["--mode", mode])
        .args(extra)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn failure(o: &Output, code: i32) -> Value {
    assert_eq!(o.status.code(), Some(code), "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(line.lines().last().unwrap()).unwrap()
}

#[test]
fn phantom_writes_fields_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("out");
    let s = ok(&pat(&cfg, &out, "phantom", &[]));
    let hash = s["config_hash"].as_str().unwrap();
    for f in ["f0", "f1", "q"] {
        let side: Value = serde_json::from_slice(&std::fs::read(out.join(format!("phantom/{f}.json"))).unwrap()).unwrap();
        assert_eq!(side["config_hash"], hash);
        assert_eq!(side["kind"], "scalar-field");
        let raw = std::fs::metadata(out.join(format!("phantom/{f}.f64"))).unwrap().len();
        assert_eq!(raw, 8 * 16 * 16);
    }
}

#[test]
fn unknown_key_exits_with_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let r = failure(&pat(&cfg, &dir.path().join("o"), "phantom", &["--override", "plan.typo=1"]), 2);
    assert_eq!(r["error"], "validation");
}

#[test]
fn missing_input_exits_with_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    failure(&pat(&cfg, &dir.path().join("o"), "recon2d", &[]), 2);
    failure(&pat(&cfg, &dir.path().join("o"), "plot", &["--override", "plot_inputs=[\"nope\"]"]), 2);
}

#[test]
fn cost_cap_exits_with_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"full": {"options": {"cost_cap": 1000.0}}}));
    let r = failure(&pat(&cfg, &dir.path().join("o"), "forward-full", &[]), 3);
    assert_eq!(r["error"], "cost-cap");
    assert!(r["predicted_cost"].as_f64().unwrap() > 1000.0);
}

#[test]
fn overflowing_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"noise": 1e300}));
    let out = dir.path().join("o");
    ok(&pat(&cfg, &out, "forward2d", &[]));
    let r = failure(&pat(&cfg, &out, "recon2d", &[]), 4);
    assert_eq!(r["error"], "numerical");
    assert!(r["stage"].is_string());
}

fn raw_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "f64" || x == "pgm" || x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"noise": 1e-3, "seed": 7}));
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        for mode in ["phantom", "forward2d", "recon2d", "plot"] {
            ok(&pat(&cfg, &out, mode, &["--threads", threads]));
        }
        runs.push(raw_files(&out));
    }
    assert!(runs[0].len() >= 6);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_changes_noisy_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"noise": 1e-3}));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&pat(&cfg, &a, "forward2d", &["--seed", "1"]));
    ok(&pat(&cfg, &b, "forward2d", &["--seed", "2"]));
    assert_ne!(std::fs::read(a.join("data/separated.f64")).unwrap(), std::fs::read(b.join("data/separated.f64")).unwrap());
}

#[test]
fn metrics_follow_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("o");
    for mode in ["forward2d", "recon2d"] {
        ok(&pat(&cfg, &out, mode, &[]));
    }
    let s = ok(&pat(&cfg, &out, "metrics", &[]));
    let q = s["metrics"]["q"]["omega"]["rel_l2"].as_f64().unwrap();
    let f1 = s["metrics"]["f1"]["omega"]["rel_l2"].as_f64().unwrap();
    assert!(q < 0.2 && f1 < 0.2, "{s}");
    assert!(out.join("metrics.json").exists());
}

#[test]
fn bump_image_peaks_at_the_bump_centre() {
    let dir = tempfile::tempdir().unwrap();
    // q bump centred on node (8, 10) of the 17² grid
    let cfg = config(dir.path(), json!({
        "phantom": {
            "dim": 2, "grid_n": 17, "b_radius": 1.0,
            "omega_center": [0.0, 0.0], "omega_radius": 0.5, "detectors": 24,
            "f0": [{"center": [0.0, 0.0], "radius": 3.0, "amplitude": 2.718281828459045}],
            "q": [{"center": [0.0, 0.25], "radius": 0.2, "amplitude": 0.2}]
        },
        "plot_inputs": ["phantom/q"]
    }));
    let out = dir.path().join("o");
    ok(&pat(&cfg, &out, "phantom", &[]));
    ok(&pat(&cfg, &out, "plot", &[]));
    let img = std::fs::read(out.join("plots/phantom_q.pgm")).unwrap();
    let header = b"P5\n17 17\n255\n";
    assert_eq!(&img[..header.len()], header);
    let px = &img[header.len()..];
    let argmax = (0..px.len()).max_by_key(|&i| px[i]).unwrap();
    // rows run top to bottom with decreasing y: y index 10 sits in row 6
    assert_eq!((argmax % 17, argmax / 17), (8, 6));
    assert_eq!(px[argmax], 255);
    let side: Value = serde_json::from_slice(&std::fs::read(out.join("plots/phantom_q.pgm.json")).unwrap()).unwrap();
    assert!((side["max"].as_f64().unwrap() - 0.2 / std::f64::consts::E).abs() < 1e-12);
    assert_eq!(side["min"].as_f64().unwrap(), 0.0);
}

#[test]
fn series_csv_has_header_and_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("o");
    ok(&pat(&cfg, &out, "forward2d", &[]));
    let s = ok(&pat(&cfg, &out, "plot", &[]));
    let csv_name = s["artifacts"].as_array().unwrap().iter().filter_map(|a| a.as_str()).find(|a| a.contains("data_detector")).unwrap().to_string();
    let text = std::fs::read_to_string(out.join(&csv_name)).unwrap();
    let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "t,value");
    let side: Value = serde_json::from_slice(&std::fs::read(out.join("data/separated.json")).unwrap()).unwrap();
    let n = side["meta"]["times"]["n"].as_u64().unwrap() as usize;
    assert_eq!(lines.len(), n + 1);
    for l in &lines[1..] {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
    }
}

#[test]
fn data_from_another_phantom_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("o");
    ok(&pat(&cfg, &out, "forward2d", &[]));
    let r = failure(&pat(&cfg, &out, "recon2d", &["--override", "phantom.q=[]"]), 2);
    assert!(r["message"].as_str().unwrap().contains("different phantom"), "{r}");
}
