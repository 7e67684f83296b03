use std::path::Path;
use std::process::{Command, Output};

use vlstein_core::{binary_example_exponent, gaussian_example_exponent};

fn vlstein(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlstein")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ALPHA_SWEEP: &str = r#"{
  "rate": 0.8,
  "epsilon": 0.1,
  "sweep": {"parameter": "alpha", "start": 0.05, "stop": 0.45, "steps": 9}
}"#;

#[test]
fn dumped_config_reparses_to_the_same_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let first = vlstein(&["simulate-link", "--alpha", "0.1", "--epsilon", "0.2", "--mu", "0.05", "--n", "8", "--seed", "5", "--dump-config"]);
    // aux is missing, so the dump must fail validation.
    assert_eq!(first.status.code(), Some(2));

    let cfg = write(dir.path(), "base.json", r#"{"aux": {"kind": "bsc", "p": 0.125}, "trials": 300}"#);
    let first = vlstein(&["simulate-link", "--config", &cfg, "--alpha", "0.1", "--epsilon", "0.2", "--mu", "0.05", "--n", "8", "--seed", "5", "--dump-config"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let dumped = write(dir.path(), "dumped.json", &stdout(&first));
    let second = vlstein(&["simulate-link", "--config", &dumped, "--dump-config"]);
    assert_eq!(stdout(&first), stdout(&second));

    let a = vlstein(&["simulate-link", "--config", &cfg, "--alpha", "0.1", "--epsilon", "0.2", "--mu", "0.05", "--n", "8", "--seed", "5"]);
    let b = vlstein(&["simulate-link", "--config", &dumped]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"epsilon": 0.25, "source": {"kind": "table", "table": [[0.3, 0.05, 0.05], [0.05, 0.2, 0.05], [0.05, 0.05, 0.2]]},
            "sweep": {"parameter": "R", "start": 0.1, "stop": 0.7, "steps": 3}}"#,
    );
    let (o1, o2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&o1, &o2] {
        let r = vlstein(&["sweep", "--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        assert!(r.stdout.is_empty(), "data must go to the file only");
    }
    let a = std::fs::read(&o1).unwrap();
    assert_eq!(a, std::fs::read(&o2).unwrap());
    assert!(rows(std::str::from_utf8(&a).unwrap()).iter().all(|r| r[4] == "optimizer"));

    let link = ["simulate-link", "--alpha", "0.1", "--epsilon", "0.2", "--mu", "0.05", "--n", "8", "--trials", "2000", "--seed", "9"];
    let with_aux = write(dir.path(), "aux.json", r#"{"aux": {"kind": "bsc", "p": 0.125}}"#);
    let mut args = link.to_vec();
    args.extend(["--config", &with_aux]);
    assert_eq!(vlstein(&args).stdout, vlstein(&args).stdout);
}

#[test]
fn alpha_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "alpha.json", ALPHA_SWEEP);
    let out = vlstein(&["sweep", "--config", &cfg]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "param,value,theta_vl,theta_fl,theta_source");
    let rows = rows(&text);
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let (vl, fl): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(vl >= fl, "row {r:?}");
        assert_eq!(r[4], "closed_form");
    }
    let row = rows.iter().find(|r| (r[1].parse::<f64>().unwrap() - 0.1).abs() < 1e-12).unwrap();
    let vl: f64 = row[2].parse().unwrap();
    assert!((vl - binary_example_exponent(0.1, 0.8, 0.1).unwrap()).abs() < 1e-15);
    assert!(String::from_utf8_lossy(&out.stderr).contains("9 rows"));
}

#[test]
fn rho_sweep_starts_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rho.json",
        r#"{"rate": 0.9, "epsilon": 0.1, "sweep": {"parameter": "rho", "start": 0.0, "stop": 1.0, "steps": 11}}"#,
    );
    let rows = rows(&stdout(&vlstein(&["sweep", "--config", &cfg])));
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.0);
    let last: f64 = rows[10][2].parse().unwrap();
    assert!((last - gaussian_example_exponent(1.0, 0.9, 0.1).unwrap()).abs() < 1e-15);
    assert!((last - 1.0).abs() < 1e-12);
}

#[test]
fn exponent_mode_emits_one_row() {
    let out = vlstein(&["exponent", "--alpha", "0.1", "--rate", "0.8", "--epsilon", "0.1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "theta,iux,iuy,theta_source");
    let r = &rows(&text)[0];
    let theta: f64 = r[0].parse().unwrap();
    assert!((theta - binary_example_exponent(0.1, 0.8, 0.1).unwrap()).abs() < 2e-3);
    // The rate constraint is active: (1 - eps) I(U;X) = R.
    assert!((0.9 * r[1].parse::<f64>().unwrap() - 0.8).abs() < 1e-3);
}

#[test]
fn exponent_dmc_reports_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dmc.json", r#"{"dmc": {"kind": "bec", "e": 0.5}}"#);
    let out = vlstein(&["exponent-dmc", "--config", &cfg, "--alpha", "0.1", "--kappa", "1.6", "--epsilon", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &rows(&stdout(&out))[0];
    assert!((r[0].parse::<f64>().unwrap() - 0.5).abs() < 1e-9);
    assert!((r[1].parse::<f64>().unwrap() - 0.8).abs() < 1e-9);
}

#[test]
fn verify_passes() {
    let out = vlstein(&["verify", "--trials", "1000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rows(&stdout(&out)).iter().all(|r| r[2] == "0"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", r#"{"rate": 0.8, "epsilom": 0.1}"#);
    let out = vlstein(&["exponent", "--config", &typo, "--alpha", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilom"));

    let out = vlstein(&["exponent", "--alpha", "0.1", "--rate", "0.8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let out = vlstein(&["exponent", "--alpha", "1.5", "--rate", "0.8", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let bad_sweep = write(dir.path(), "s.json", r#"{"rate": 0.8, "epsilon": 0.1, "sweep": {"parameter": "alpha", "start": 0.1, "stop": 0.2, "steps": 1}}"#);
    let out = vlstein(&["sweep", "--config", &bad_sweep]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.steps"));
}

#[test]
fn oversized_codebook_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "big.json", r#"{"aux": {"kind": "identity", "size": 2}}"#);
    let out = vlstein(&["simulate-link", "--config", &cfg, "--alpha", "0.1", "--epsilon", "0.2", "--mu", "0.05", "--n", "64"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
