use std::fs;
use std::process::{Command, Output};

fn rzlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rzlab")).args(args).output().expect("run rzlab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_field_file_names_the_path() {
    let o = rzlab(&["field", "dump", "does-not-exist.rzf"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does-not-exist.rzf"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_check_are_rejected() {
    assert!(!rzlab(&["verify", "--bogus"]).status.success());
    let o = rzlab(&["check", "NOT_A_CHECK"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NOT_A_CHECK"));
}

#[test]
fn interp_at_p2_has_bound_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = rzlab(&["check", "INTERP", "--p", "2", "--n", "8", "--trials", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "check_id,d,n,R,potential,p,measured,bound,tolerance,verdict,seed,runtime_s"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "INTERP");
    assert_eq!(row[5], "2.0");
    assert_eq!(row[7], "1.0");
    assert_eq!(row[9], "pass");
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), text);
    let json = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(json.contains("\"check_id\": \"INTERP\""));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d": 1, "n": 32, "potential": "const:2"}"#).unwrap();
    let o = rzlab(&["check", "GREEN_MASS", "--config", cfg.to_str().unwrap(), "--n", "16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], ["GREEN_MASS", "1", "16"]);

    fs::write(&cfg, r#"{"dd": 1}"#).unwrap();
    let o = rzlab(&["check", "GREEN_MASS", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn field_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv_in = dir.path().join("f.csv");
    let mut text = String::from("i0,x0,value\n");
    for i in 0..8 {
        text.push_str(&format!("{i},{},{}\n", -1.0 + 0.25 * i as f64, i * i));
    }
    fs::write(&csv_in, &text).unwrap();
    let rzf = dir.path().join("f.rzf");
    let o = rzlab(&["field", "load", csv_in.to_str().unwrap(), "--out", rzf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = rzlab(&["field", "dump", rzf.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), text);
}

#[test]
fn scan_writes_tidy_csv() {
    let o = rzlab(&["scan", "CE3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("scan,d,eps,p,x_name,x,y_name,y\n"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("CE3,") && l.contains(",rho,")));
    assert!(stderr(&o).contains("slope"));
}

#[test]
fn kernel_without_potential_matches_gaussian() {
    let o = rzlab(&["kernel", "--fk", "--x", "0", "--y", "0.5", "--t", "0.25", "--paths", "1000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key} "))).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!((value("fk") - value("gaussian")).abs() < 1e-12);
}

#[test]
fn core_suite_passes() {
    let o = rzlab(&["verify", "--suite", "core", "--n", "8", "--trials", "8", "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 11);
}
