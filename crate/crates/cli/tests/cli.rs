use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tracehole(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracehole"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("TRACEHOLE_RESULTS")
        .output()
        .unwrap()
}

fn summary(out: &Path, run_id: &str) -> serde_json::Value {
    let text = fs::read_to_string(out.join(run_id).join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn verify_1d_reports_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tracehole(
        tmp.path(),
        &["verify-1d", "--p", "2", "--alpha", "0.5", "--run-id", "v"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path(), "v");
    let closed = s["closed_form"].as_f64().unwrap();
    let fem = s["fem_value"].as_f64().unwrap();
    assert!((closed - 10.8696).abs() < 1e-4);
    assert!((fem - closed).abs() / closed < 5e-3);
    assert!(s["sweep_argmin_abuts_endpoint"].as_bool().unwrap());
    assert!(tmp.path().join("v/data.csv").exists());
    assert!(tmp.path().join("v/extremal.csv").exists());
}

#[test]
fn large_q_is_accepted_when_p_reaches_the_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tracehole(
        tmp.path(),
        &[
            "solve",
            "--domain",
            "disk:1",
            "--resolution",
            "0.3",
            "--p",
            "2",
            "--q",
            "7",
            "--hole-arc",
            "0:1",
            "--run-id",
            "s",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path(), "s");
    assert!(s["s_value"].as_f64().unwrap() > 0.0);
    for f in ["summary.json", "data.csv", "mesh.json", "extremal.csv"] {
        assert!(tmp.path().join("s").join(f).exists(), "{f}");
    }
}

#[test]
fn supercritical_q_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tracehole(
        tmp.path(),
        &[
            "solve",
            "--domain",
            "disk:1",
            "--resolution",
            "0.3",
            "--p",
            "1.5",
            "--q",
            "3.5",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("p_*"), "{err}");
}

#[test]
fn identical_specs_give_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |id: &'static str| {
        vec![
            "optimize",
            "--domain",
            "disk:1",
            "--resolution",
            "0.25",
            "--alpha",
            "0.3",
            "--seed",
            "5",
            "--n-starts",
            "3",
            "--run-id",
            id,
        ]
    };
    for id in ["a", "b"] {
        let o = tracehole(tmp.path(), &args(id));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("a/summary.json")).unwrap();
    let b = fs::read(tmp.path().join("b/summary.json")).unwrap();
    assert_eq!(a, b);
    let a = fs::read(tmp.path().join("a/data.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/data.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "resolution = 0.2\nalpah = 0.3\n").unwrap();
    let o = tracehole(
        tmp.path(),
        &["solve", "--config", cfg.to_str().unwrap(), "--domain", "disk:1"],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpah") && err.contains("line 2"), "{err}");
}

#[test]
fn iteration_cap_exits_with_two_and_still_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tracehole(
        tmp.path(),
        &[
            "solve",
            "--domain",
            "disk:1",
            "--resolution",
            "0.2",
            "--hole-arc",
            "0:1",
            "--max-inner-iterations",
            "3",
            "--run-id",
            "c",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path(), "c");
    assert_eq!(s["converged"], serde_json::Value::Bool(false));
}

#[test]
fn config_file_drives_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
resolution = 0.2
[domain]
kind = "rectangle"
params = { width = 2.0, height = 1.0 }
[cfg]
p = 3.0
q = 2.0
[hole]
arcs = [[0.0, 0.5]]
"#,
    )
    .unwrap();
    let o = tracehole(
        tmp.path(),
        &["solve", "--config", cfg.to_str().unwrap(), "--run-id", "r"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path(), "r");
    assert_eq!(s["spec"]["cfg"]["p"].as_f64(), Some(3.0));
    assert!(s["positivity"]["violation"] == serde_json::Value::Bool(false));
}

#[test]
fn missing_fields_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tracehole(tmp.path(), &["optimize", "--domain", "disk:1", "--resolution", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}
