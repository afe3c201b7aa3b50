use std::path::Path;
use std::process::{Command, Output};

fn ncbasis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncbasis"))
        .args(args)
        .env_remove("NCBASIS_SEED")
        .output()
        .expect("spawn ncbasis")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_haar_writes_a_loadable_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let o = ncbasis(&["gen-haar", "--alpha", "0.5", "--level", "2", "--side", "left", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("elements: 16"), "{text}");
    let sys: ncbasis::HaarSystem = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(sys.len(), 16);

    let o = ncbasis(&["gen-haar", "--alpha", "0.3333333333", "--level", "3", "--out", path(&out)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("elements: 64"));

    let rerun = dir.path().join("report.csv");
    let o = ncbasis(&[
        "certify", "--system", path(&out), "--samples", "300", "--restarts", "3",
        "--schedule", "1,16,64", "--out", path(&rerun),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&rerun).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(ncbasis(&["gen-haar", "--alpha", "0.7"]).status.code(), Some(2));
    assert_eq!(ncbasis(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(ncbasis(&["certify", "--level", "5"]).status.code(), Some(2));
    assert_eq!(ncbasis(&["certify", "--side", "right", "--system", "/nonexistent.json"]).status.code(), Some(2));
    let o = ncbasis(&["verify", "--suite", "measure", "--alpha", "0.3333", "--level", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("total_mass") && !text.contains("false"));
}

#[test]
fn schur_suite_stays_below_two() {
    let o = ncbasis(&[
        "certify", "--suite", "schur", "--level", "3", "--p", "2", "--samples", "500",
        "--restarts", "5", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in report["rows"].as_array().unwrap() {
        assert!(row["estimate"].as_f64().unwrap() <= 2.0 + 1e-6);
    }
    assert_eq!(report["bound_kind"], "schur");
}

#[test]
fn embedded_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let o = ncbasis(&[
        "certify", "--suite", "product", "--left", "alpha=1/3", "--right", "units=1",
        "--samples", "300", "--restarts", "3", "--seed", "11", "--format", "json",
        "--out", path(&first),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = ncbasis(&["certify", "--config", path(&first), "--out", path(&second)]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read_to_string(&first).unwrap();
    let b = std::fs::read_to_string(&second).unwrap();
    // identical apart from the recorded output path
    assert_eq!(a.replace("a.json", "b.json"), b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["bound_kind"], "derived");
    assert_eq!(v["config"]["metadata"]["right_units_scale"], 2f64.sqrt());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncbasis"));
        cmd.args(["certify", "--level", "1", "--samples", "200", "--restarts", "2"]).args(extra);
        match env {
            Some(s) => cmd.env("NCBASIS_SEED", s),
            None => cmd.env_remove("NCBASIS_SEED"),
        };
        String::from_utf8(cmd.output().unwrap().stdout).unwrap()
    };
    let from_env = run(Some("42"), &[]);
    let from_flag = run(None, &["--seed", "42"]);
    assert_eq!(from_env, from_flag);
    assert!(from_env.lines().nth(1).unwrap().ends_with(",42,true"));
}
