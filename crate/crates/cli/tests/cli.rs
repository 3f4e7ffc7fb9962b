use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn config(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    p.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_compdyn"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn temp_config(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("compdyn-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn classify_json(path: &str) -> Value {
    let (code, out, err) = run(&["classify", path, "--json"]);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn status<'a>(report: &'a Value, prop: &str) -> &'a str {
    report["verdicts"][prop]["status"].as_str().unwrap()
}

#[test]
fn two_sided_decay_report() {
    let r = classify_json(&config("two-sided-decay.json"));
    assert_eq!(status(&r, "SSS"), "Holds");
    assert_eq!(status(&r, "Shadowing"), "Holds");
    assert_eq!(status(&r, "GeneralizedHyperbolic"), "Holds");
    assert_eq!(status(&r, "Hyperbolic"), "Fails");
    assert_eq!(status(&r, "E"), "Fails");
    assert_eq!(r["audit"]["ok"], true);
    assert_eq!(r["tool"], "compdyn");
    assert_eq!(r["horizon"]["n"], 200);
    assert_eq!(r["horizon"]["k_span"], 500);
}

#[test]
fn flat_measure_is_open() {
    let r = classify_json(&config("flat.json"));
    assert_eq!(status(&r, "SSS"), "Undecided");
    assert_eq!(r["verdicts"]["SSS"]["citation"], "OpenProblem");
}

#[test]
fn table_output_lists_every_property() {
    let (code, out, _) = run(&["classify", &config("two-sided-growth.json")]);
    assert_eq!(code, 0);
    for prop in [
        "PE",
        "UPE",
        "UE",
        "Shadowing",
        "Hyperbolic",
        "GeneralizedHyperbolic",
        "SSS",
        "StructStable",
    ] {
        assert!(out.lines().any(|l| l.starts_with(prop)), "{prop}\n{out}");
    }
    let sss = out.lines().find(|l| l.starts_with("SSS")).unwrap();
    assert!(sss.contains("Fails") && sss.contains(" C "), "{sss}");
}

#[test]
fn invalid_configs_exit_2() {
    let (code, _, err) = run(&["classify", &config("bad-partition.json")]);
    assert_eq!(code, 2);
    assert!(err.contains("sum of beta"), "{err}");

    let broken = temp_config(
        "broken.json",
        "{\"kind\": \"shift\",\n \"p\": 1,\n \"weights\": [}\n",
    );
    let (code, _, err) = run(&["classify", &broken]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");

    let (code, _, err) = run(&["classify", "/nonexistent/config.json"]);
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn injected_violation_exits_3_with_report() {
    let (code, out, err) = run(&[
        "classify",
        &config("two-sided-growth.json"),
        "--json",
        "--inject-violation",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("GeneralizedHyperbolic => Shadowing"), "{err}");
    let r: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["audit"]["ok"], false);
}

#[test]
fn reports_are_byte_identical() {
    for args in [
        vec!["classify".to_owned(), config("cells.json"), "--json".into()],
        vec![
            "classify".to_owned(),
            config("three-cycle.json"),
            "--json".into(),
            "--seed".into(),
            "5".into(),
        ],
        vec![
            "shadow".to_owned(),
            config("shift-split.json"),
            "--json".into(),
            "--seed".into(),
            "3".into(),
        ],
        vec![
            "audit".to_owned(),
            "--count".into(),
            "20".into(),
            "--seed".into(),
            "11".into(),
            "--json".into(),
        ],
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (c1, a, _) = run(&args);
        let (c2, b, _) = run(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b, "{args:?}");
    }
}

fn csv_norms(out: &str) -> Vec<(i64, f64)> {
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n,norm"));
    lines
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn simulate_orbit_norms() {
    let (code, out, _) = run(&[
        "simulate",
        &config("shift-2.json"),
        "--vector",
        "0=1",
        "--to",
        "3",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        csv_norms(&out),
        vec![(0, 1.0), (1, 2.0), (2, 4.0), (3, 8.0)]
    );

    let (_, out, _) = run(&[
        "simulate",
        &config("shift-1.json"),
        "--vector",
        "-2=0.5,3=-1.5",
        "--from",
        "-5",
        "--to",
        "5",
        "--normalize",
    ]);
    assert!(csv_norms(&out).iter().all(|(_, v)| (v - 1.0).abs() < 1e-12));

    let (_, out, _) = run(&[
        "simulate",
        &config("two-sided-decay.json"),
        "--vector",
        "0=1",
        "--from",
        "-1",
        "--to",
        "1",
    ]);
    assert_eq!(csv_norms(&out), vec![(-1, 0.5), (0, 1.0), (1, 0.5)]);

    let (code, _, _) = run(&["simulate", &config("shift-2.json"), "--vector", "0@3=1"]);
    assert_eq!(code, 2);
}

#[test]
fn shadow_reports() {
    let (code, out, _) = run(&["shadow", &config("shift-2.json"), "--json"]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert!(r["epsilon"].as_f64().unwrap() <= 1e-3 + 1e-12);
    assert_eq!(r["within_bound"], true);
    assert_eq!(r["bound"].as_f64().unwrap(), 1e-3);

    let (code, out, _) = run(&[
        "shadow",
        &config("shift-split.json"),
        "--delta",
        "0.01",
        "--length",
        "51",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("within_bound  pass"), "{out}");

    for name in ["flat.json", "three-cycle.json"] {
        let (code, _, err) = run(&["shadow", &config(name)]);
        assert_eq!(code, 4, "{name}: {err}");
    }
}

#[test]
fn reduce_matches_induced_weights() {
    let weights = |path: &str| -> Vec<f64> {
        let (code, out, err) = run(&["reduce", path]);
        assert_eq!(code, 0, "{err}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["kind"], "shift");
        let w = &v["weights"];
        ["core", "neg_period", "pos_period"]
            .iter()
            .flat_map(|k| w[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
            .collect()
    };
    assert!(weights(&config("decay.json")).iter().all(|w| *w == 2.0));
    assert!(weights(&config("flat.json")).iter().all(|w| *w == 1.0));
    let p2 = temp_config(
        "decay-p2.json",
        r#"{"kind": "dissipative", "p": 2,
            "ratio": {"core": ["1/2"], "neg_period": ["1/2"], "pos_period": ["1/2"]}}"#,
    );
    assert!(weights(&p2).iter().all(|w| (w - 2f64.sqrt()).abs() < 1e-15));

    let (code, _, _) = run(&["reduce", &config("shift-2.json")]);
    assert_eq!(code, 2);
}

#[test]
fn reduce_round_trip_agrees() {
    for name in [
        "decay.json",
        "growth.json",
        "two-sided-decay.json",
        "two-sided-growth.json",
        "flat.json",
        "half-flat.json",
        "cells.json",
    ] {
        let diss = classify_json(&config(name));
        let (_, reduced, _) = run(&["reduce", &config(name)]);
        let path = temp_config(&format!("reduced-{name}"), &reduced);
        let shift = classify_json(&path);
        assert_eq!(shift["kind"], "shift");
        for prop in [
            "Hyperbolic",
            "Shadowing",
            "GeneralizedHyperbolic",
            "PE",
            "E",
            "UE",
        ] {
            assert_eq!(status(&shift, prop), status(&diss, prop), "{name} {prop}");
        }
        if status(&shift, "SSS") == "Holds" {
            assert_eq!(status(&diss, "SSS"), "Holds", "{name}");
        }
    }
}

#[test]
fn audit_sweep_is_clean() {
    let (code, out, err) = run(&["audit", "--count", "200", "--seed", "7"]);
    assert_eq!(code, 0, "{err}");
    let line = out.lines().find(|l| l.starts_with("violations")).unwrap();
    assert_eq!(line.split_whitespace().last(), Some("0"));
}

#[test]
fn audit_single_constant_system() {
    let (code, out, _) = run(&[
        "audit",
        "--count",
        "1",
        "--config",
        &config("flat.json"),
        "--json",
    ]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["summary"]["violations"].as_array().unwrap().len(), 0);
    assert_eq!(
        r["summary"]["status_counts"]["SSS"],
        serde_json::json!([0, 0, 1])
    );
}

#[test]
fn audit_injection_and_bad_count() {
    let (code, out, _) = run(&["audit", "--count", "3", "--inject-violation"]);
    assert_eq!(code, 3);
    assert!(
        out.contains("violated GeneralizedHyperbolic => Shadowing"),
        "{out}"
    );
    let (code, _, _) = run(&["audit", "--count", "0"]);
    assert_eq!(code, 2);
}
