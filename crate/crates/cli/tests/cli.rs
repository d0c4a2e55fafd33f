use std::path::Path;
use std::process::{Command, Output};

fn wpl(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_wpl")).args(args).output().expect("spawn wpl");
    assert!(out.status.success(), "wpl {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn example_extend_decompose_norm() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("f1.json");
    wpl(&["example", "--family", "f1", "--R", "256", "--out", prof.to_str().unwrap()]);
    assert_eq!(json(&prof)["M"], 1024);

    let point = wpl(&["extend", "--profile", prof.to_str().unwrap(), "--R", "256", "--x", "0", "--t", "0"]);
    let v: serde_json::Value = serde_json::from_slice(&point.stdout).unwrap();
    assert!(v["abs"].as_f64().unwrap() > 0.0);

    let dec = dir.path().join("d.json");
    wpl(&["decompose", "--profile", prof.to_str().unwrap(), "--R", "256", "--out", dec.to_str().unwrap()]);
    let d = json(&dec);
    assert!(d["S"].as_f64().unwrap() > 0.0 && !d["packets"].as_array().unwrap().is_empty());

    let fld = dir.path().join("f.fld");
    wpl(&["extend", "--profile", prof.to_str().unwrap(), "--R", "64", "--nx", "257", "--nt", "129", "--out", fld.to_str().unwrap()]);
    let norms = wpl(&["norm", "--field", fld.to_str().unwrap(), "--p", "2,4"]);
    let n: serde_json::Value = serde_json::from_slice(&norms.stdout).unwrap();
    assert_eq!(n["lp"].as_array().unwrap().len(), 2);
}

#[test]
fn polytope_reports_conjecture_point() {
    let out = wpl(&["polytope", "--point", "F"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["necessary"], true);
    assert_eq!(v[0]["sufficient"], false);
    assert_eq!(v[0]["violated"], serde_json::json!([5]));
    let all = wpl(&["polytope"]);
    let v: serde_json::Value = serde_json::from_slice(&all.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}

#[test]
fn partition_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    let mut s = String::from("x,t,w\n");
    for i in 0..200 {
        let a = i as f64 * 2.399963;
        let r = ((i as f64 + 0.5) / 200.0).sqrt();
        s.push_str(&format!("{},{},1\n", r * a.cos(), r * a.sin()));
    }
    std::fs::write(&pts, s).unwrap();
    let out = dir.path().join("part.json");
    wpl(&["partition", "--points", pts.to_str().unwrap(), "--D", "2", "--seed", "3", "--out", out.to_str().unwrap()]);
    let p = json(&out);
    assert_eq!(p["bisectors"].as_array().unwrap().len(), 2);
    assert!(p["imbalance"].as_f64().unwrap() <= 0.1);
}

#[test]
fn decouple_is_deterministic_with_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_wpl"))
            .args(["decouple", "--delta-list", "1/16,1/36,1/64", "--trials", "3", "--out", path.to_str().unwrap()])
            .env("WPL_SEED", "11")
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("delta,trial,ratio\n"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn sweep_config_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family": "many", "p": 5, "R_list": [256, 400, 576], "claimed": "5,1/20,1/5"}"#).unwrap();
    let csv = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    wpl(&["sweep", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("family,R,N,p,lp_norm,l2_norm,S,ratio\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let fit = wpl(&["fit", "--input", csv.to_str().unwrap(), "--x", "R", "--y", "ratio"]);
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(v["slope"].as_f64().unwrap().abs() < 0.1);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_wpl")).args(["example", "--family", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown family"));
}
