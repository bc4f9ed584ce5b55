use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sprsrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sprsrec")).args(args).output().expect("run binary")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn signal_encode_decode_roundtrip() {
    let dir = tempdir().unwrap();
    let x = dir.path().join("x.bin");
    let sketch = dir.path().join("y.bin");
    let o = sprsrec(&["gen-signal", "--n", "4096", "--k", "5", "--seed", "3", "--out", p(&x), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let head: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let head: Vec<u64> = serde_json::from_value(head["head"].clone()).unwrap();
    assert_eq!(head.len(), 5);

    let sys = ["--k", "5", "--engine", "lw:3", "--seed", "11"];
    let mut args = vec!["encode", "--input", p(&x), "--out", p(&sketch)];
    args.extend(sys);
    assert!(sprsrec(&args).status.success());

    let mut args = vec!["decode", "--input", p(&sketch), "--n", "4096", "--format", "json"];
    args.extend(sys);
    let o = sprsrec(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let est: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    let idx: Vec<u64> = est.iter().map(|e| e["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, head);
    assert!(est.iter().all(|e| (e["value"].as_f64().unwrap().abs() - 1.0).abs() < 1e-9));

    // a system with another k has a different sketch layout
    let o = sprsrec(&["decode", "--input", p(&sketch), "--n", "4096", "--k", "3", "--engine", "lw:3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn matrix_and_omp() {
    let dir = tempdir().unwrap();
    let m = dir.path().join("phi.csv");
    assert!(sprsrec(&["gen-matrix", "--m", "3", "--n", "3", "--seed", "1", "--out", p(&m)]).status.success());
    let text = std::fs::read_to_string(&m).unwrap();
    assert_eq!(text.lines().count(), 3);
    std::fs::write(&m, "1,0,0\n0,1,0\n0,0,1\n").unwrap();
    let y = dir.path().join("y.bin");
    let mut bytes = b"SPRSREC1".to_vec();
    bytes.extend(3u64.to_le_bytes());
    for v in [0.0f64, 2.5, 0.0] {
        bytes.extend(v.to_le_bytes());
    }
    std::fs::write(&y, bytes).unwrap();
    let o = sprsrec(&["omp", "--matrix", p(&m), "--input", p(&y), "--k", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "index,value");
    let (i, v) = lines[1].split_once(',').unwrap();
    assert_eq!(i, "1");
    assert!((v.parse::<f64>().unwrap() - 2.5).abs() < 1e-12);

    std::fs::write(&m, "1,0,0\n0,NaN,0\n0,0,1\n").unwrap();
    assert_eq!(sprsrec(&["omp", "--matrix", p(&m), "--input", p(&y), "--k", "1"]).status.code(), Some(3));
}

#[test]
fn experiment_csv_is_reproducible() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"seed":5,"trials":4,"signal":{"n":256,"k":3,"tail":{"model":"gaussian","sigma":0.01}},
            "decoder":{"decoder":"toplevel","eps":0.5},"c":3.0}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(sprsrec(&["experiment", "--config", p(&cfg), "--out", p(&a)]).status.success());
    assert!(sprsrec(&["experiment", "--config", p(&cfg), "--out", p(&b)]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("trial,seed,l2_error,tail_norm,ratio,success,measurements\n"));
    assert_eq!(text.lines().count(), 5);

    std::fs::write(&cfg, r#"{"schema_version":9,"seed":5,"trials":4,"signal":{"n":256,"k":3},"decoder":{"decoder":"oracle"},"c":3.0}"#)
        .unwrap();
    assert_eq!(sprsrec(&["experiment", "--config", p(&cfg)]).status.code(), Some(1));
}

#[test]
fn verify_expander_and_infeasible_enumeration() {
    let o = sprsrec(&["verify-expander", "--n", "64", "--degree", "8", "--buckets", "256", "--t", "2", "--seed", "4", "--format", "json"]);
    assert!(o.status.success());
    let cert: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cert["t"], 2);
    let o = sprsrec(&["verify-expander", "--n", "100000", "--degree", "8", "--buckets", "256", "--t", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lw_join_and_rs_recover() {
    let dir = tempdir().unwrap();
    let lw = dir.path().join("lw.json");
    // projections of (1, 2, 3) with coordinate i removed
    std::fs::write(&lw, r#"{"projections":[[[2,3]],[[1,3]],[[1,2]]]}"#).unwrap();
    let o = sprsrec(&["lw-join", "--input", p(&lw)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1,2,3\n");

    let rs = dir.path().join("rs.json");
    // 1 + x over GF(16) at points 0..5 is (1, 0, 3, 2, 5)
    std::fs::write(&rs, r#"{"field_width":4,"b":2,"sets":[[1],[0],[3],[2],[7]],"rho":0.2}"#).unwrap();
    let o = sprsrec(&["rs-recover", "--input", p(&rs), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "[17]");
}

#[test]
fn lowerbound_demo_exit_codes() {
    let o = sprsrec(&["lowerbound-demo", "--m", "10", "--n", "300", "--seed", "2", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["sketch_gap"].as_f64().unwrap() < 1e-9);
    assert!(!(v["omp_ok_on_v"].as_bool().unwrap() && v["omp_ok_on_v_reflected"].as_bool().unwrap()));
    let o = sprsrec(&["lowerbound-demo", "--m", "30", "--n", "60"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sprsrec(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(sprsrec(&["gen-matrix", "--m", "x", "--n", "3"]).status.code(), Some(1));
    assert_eq!(sprsrec(&["decode", "--input", "/nonexistent", "--engine", "bogus"]).status.code(), Some(1));
    assert_eq!(sprsrec(&["--help"]).status.code(), Some(0));
}
