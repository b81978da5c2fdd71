use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tarski-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_single_instance_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = lab(&["gen", "--n", "3", "--C", "1,2,1,3", "--i", "2", "--out", d]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("T33_C1-2-1-3_i2.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["n"], 3);
    assert_eq!(meta["C"], serde_json::json!([1, 2, 1, 3]));
    assert_eq!(meta["fixed_point"], serde_json::json!({ "x": 12, "y": 12 }));
    let inst: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("T33_C1-2-1-3_i2.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(inst["n"], 33);
    assert_eq!(inst["values"].as_array().unwrap().len(), 33 * 33);
}

#[test]
fn gen_whole_family_for_n2() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["gen", "--n", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(
        names.iter().filter(|n| !n.ends_with(".meta.json")).count(),
        24
    );
    assert_eq!(names.len(), 48);
}

#[test]
fn gen_rejects_bad_index() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "gen",
        "--n",
        "3",
        "--C",
        "1,2,1,3",
        "--i",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let o = lab(&[
        "gen",
        "--n",
        "3",
        "--i",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(
        code(&lab(&[
            "gen", "--n", "2", "--C", "2,1,2", "--i", "3", "--out", d
        ])),
        0
    );
    let f = dir.path().join("T10_C2-1-2_i3.json");
    let o = lab(&[
        "solve",
        f.to_str().unwrap(),
        "--algo",
        "brute",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["queries_used"], 100);
    let brute_fp = r["fixed_point"].clone();
    let o = lab(&["solve", f.to_str().unwrap(), "--format", "json"]);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["fixed_point"], brute_fp);
    assert_eq!(r["algorithm"], "nested");
}

#[test]
fn solve_reports_validation_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":2,"k":2,"values":[[1,1],[1,2],[2,1]]}"#).unwrap();
    let o = lab(&["solve", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[2, 2]"));

    std::fs::write(&bad, r#"{"n":2,"k":1,"values":[[2],[1]]}"#).unwrap();
    let o = lab(&["solve", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not monotone"));

    let o = lab(&[
        "solve",
        Path::new("/definitely/missing.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn bound_tables_are_reproducible() {
    let a = lab(&["bound", "os", "--m", "2,4,8"]);
    let b = lab(&["bound", "os", "--m", "2,4,8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("problem,size,numerator,denominator,sa,lb")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[..2], ["os", "2"]);
    assert!((first[5].parse::<f64>().unwrap() - 0.0571909).abs() < 1e-6);
}

#[test]
fn bound_json_and_matrix_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "bound",
        "nos",
        "--a",
        "2",
        "--b",
        "2",
        "--format",
        "json",
        "--dump-matrix",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rows[0]["sa"].as_f64().unwrap() >= 1.2426);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("nos_2x2.json")).unwrap())
            .unwrap();
    assert_eq!(m["dim"], 8);
}

#[test]
fn bound_cap_and_usage_errors() {
    assert_eq!(code(&lab(&["bound", "nos", "--a", "6", "--b", "5"])), 2);
    assert_eq!(code(&lab(&["bound", "os", "--eps", "0.7"])), 2);
    assert_eq!(code(&lab(&["bound", "quux"])), 2);
    assert_eq!(code(&lab(&["verify", "--suite", "nope"])), 2);
}

#[test]
fn verify_reports_are_deterministic() {
    let run = || {
        lab(&[
            "verify", "--suite", "covering", "--n", "2", "--format", "json",
        ])
    };
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let r: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(r["checks_run"], 100);
    assert_eq!(r["failures"], serde_json::json!([]));
    let o = lab(&["verify", "--suite", "embedding", "--n", "2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "suite,check,counterexample\n");
}

#[test]
fn verify_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = lab(&[
        "--jobs",
        "2",
        "verify",
        "--suite",
        "hilbert",
        "--m",
        "16",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["suite"], "hilbert");
}
