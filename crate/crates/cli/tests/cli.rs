use std::path::{Path, PathBuf};
use std::process::Command;

use holotrace_cli::{cmd_bound, cmd_certify, cmd_det, CliError, Overrides, Params, RunConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(format!("{name}.json"))).unwrap()
}

fn doubling_text(weight: f64, b: f64, extra: &str) -> String {
    format!(
        r#"{{"system": {{"domain": {{"type": "disk", "center": [0.5, 0.0], "radius": 1}},
        "branches": [
          {{"map": {{"type": "affine", "a": [0.5, 0.0], "b": [0.0, 0.0]}}, "weight": {{"num": [[{weight}, 0.0]], "den": [[1.0, 0.0]]}}}},
          {{"map": {{"type": "affine", "a": [0.5, 0.0], "b": [{b}, 0.0]}}, "weight": {{"num": [[{weight}, 0.0]], "den": [[1.0, 0.0]]}}}}
        ]}}{extra}}}"#
    )
}

fn holotrace(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_holotrace")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn fleet_configs_round_trip() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        let text = cfg.to_json();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_json(), text);
    }
}

proptest! {
    #[test]
    fn serialised_configs_are_canonical(
        order in 1usize..40, eigs in 0usize..6, basis in 1usize..60, tilde in 0.01f64..0.99,
        granularity in 1usize..8, quadrature in any::<bool>(), budget in 1u64..10_000_000,
        weight in -2.0f64..2.0, b in 0.0f64..0.5,
    ) {
        let mut cfg = RunConfig::parse(&doubling_text(weight, b, "")).unwrap();
        cfg.params = Params { order, eigs, basis, tilde, granularity, quadrature, budget };
        let text = cfg.to_json();
        let parsed = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.to_json(), text);
    }
}

#[test]
fn bound_report_for_doubling() {
    let r = cmd_bound(&config("doubling")).unwrap();
    assert_eq!(r.tilde, 0.85);
    assert!((r.class.c - 0.157).abs() < 0.01, "c = {}", r.class.c);
    assert!(r.eigenvalue_bound.big_b <= 10.0 + 1e-9);
    assert!((r.eigenvalue_bound.b - r.class.c / 2.0).abs() <= 1e-12);
    assert_eq!(r.table.len(), 20);
    assert_eq!(r.sweep.len(), 8);
    assert!(r.sweep.iter().all(|row| row.c.is_some() || row.note.is_some()));
}

#[test]
fn det_report_for_doubling() {
    let r = cmd_det(&config("doubling")).unwrap();
    assert_eq!(r.order, 12);
    assert!((r.coefficients[0].value - Complex64::new(-2.0, 0.0)).norm() + r.coefficients[0].radius <= 1e-10);
    assert!((r.coefficients[1].value - Complex64::new(4.0 / 3.0, 0.0)).norm() + r.coefficients[1].radius <= 1e-10);
    assert_eq!(r.tail_bounds.len(), 5);
    assert_eq!(r.tail_bounds[0].n, 13);
}

#[test]
fn zero_weights_give_zero_coefficients() {
    let cfg = RunConfig::parse(&doubling_text(0.0, 0.5, "")).unwrap();
    let r = cmd_det(&cfg).unwrap();
    assert!(r.coefficients.iter().all(|c| c.value == Complex64::new(0.0, 0.0) && c.radius == 0.0));
}

#[test]
fn no_requested_eigenvalues_gives_an_empty_report() {
    let mut cfg = config("doubling");
    cfg.apply(&Overrides { eigs: Some(0), ..Default::default() }).unwrap();
    let r = cmd_certify(&cfg).unwrap();
    assert!(r.eigenvalues.is_empty());
    assert!(r.complete(0));
}

#[test]
fn insufficient_order_reports_failed_inequalities() {
    let r = cmd_certify(&config("single")).unwrap();
    assert!(!r.eigenvalues.is_empty());
    assert!(!r.complete(5));
    assert!(r.eigenvalues.iter().all(|e| e.certified || e.failed_inequality.is_some()));
}

#[test]
fn budget_and_configuration_errors_are_classified() {
    let mut cfg = config("doubling");
    cfg.apply(&Overrides { order: Some(30), ..Default::default() }).unwrap();
    let e = cmd_det(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 4);
    assert!(e.to_string().contains("19"), "{e}");
    let e = RunConfig::parse(&doubling_text(0.5, 0.5, r#", "params": {"tilde": 1.5}"#)).unwrap_err();
    assert!(matches!(e, CliError::Config(_)));
    let e = RunConfig::parse(&doubling_text(0.5, 0.5, r#", "params": {"order": 0}"#)).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let ok = configs().join("doubling.json").to_string_lossy().into_owned();
    assert_eq!(holotrace(&["bound", &ok]).status.code(), Some(0));

    // the second branch maps the disk onto a disk leaving the domain
    let expanding = write(dir.path(), "expanding.json", &doubling_text(0.5, 2.0, ""));
    let out = holotrace(&["bound", &expanding]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let single = configs().join("single.json").to_string_lossy().into_owned();
    assert_eq!(holotrace(&["certify", &single]).status.code(), Some(3));

    let out = holotrace(&["det", &ok, "--order", "40"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("determinant"));

    let missing = dir.path().join("missing.json").to_string_lossy().into_owned();
    assert_eq!(holotrace(&["det", &missing]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("doubling.json").to_string_lossy().into_owned();
    for cmd in ["det", "certify", "oracle", "bound", "cover"] {
        let a = dir.path().join(format!("{cmd}-a.json"));
        let b = dir.path().join(format!("{cmd}-b.json"));
        let run = |p: &Path| holotrace(&[cmd, &cfg, "--order", "10", "--out", &p.to_string_lossy()]);
        let (ra, rb) = (run(&a), run(&b));
        assert_eq!(ra.stdout, rb.stdout, "{cmd}");
        let (ja, jb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(ja, jb, "{cmd}");
        serde_json::from_slice::<serde_json::Value>(&ja).unwrap();
    }
}
