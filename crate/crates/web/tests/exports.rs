use compdyn_web::{classify_rates, orbit_norms, shadow_demo};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn status(v: &Value, prop: &str) -> String {
    v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["property"] == prop)
        .map(|r| r["status"].as_str().unwrap().to_owned())
        .unwrap()
}

#[test]
fn classify_two_sided_decay() {
    let v = parse(classify_rates(2.0, 0.5, 1.0));
    assert_eq!(status(&v, "SSS"), "Holds");
    assert_eq!(status(&v, "Hyperbolic"), "Fails");
    assert_eq!(status(&v, "GeneralizedHyperbolic"), "Holds");
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 9);
}

#[test]
fn classify_rejects_bad_input() {
    let v = parse(classify_rates(-1.0, 0.5, 1.0));
    assert!(v["error"].is_string());
    let v = parse(classify_rates(2.0, 0.5, 0.5));
    assert!(v["error"].as_str().unwrap().contains("p = 0.5"));
}

#[test]
fn orbit_of_doubling_shift() {
    let v = parse(orbit_norms(2.0, 2.0, 1.0, 0, 3));
    let points: Vec<(i64, f64)> = serde_json::from_value(v["points"].clone()).unwrap();
    let expected = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    assert_eq!(points.len(), expected.len());
    for ((n, got), want) in points.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "n = {n}: {got}");
    }
    assert!(parse(orbit_norms(2.0, 2.0, 1.0, 0, 10_000))["error"].is_string());
}

#[test]
fn shadow_split_and_refusal() {
    let v = parse(shadow_demo(0.5, 2.0, 1e-3, 101, 1));
    assert_eq!(v["within_bound"], true);
    assert_eq!(v["distances"].as_array().unwrap().len(), 101);
    assert!(v["epsilon"].as_f64().unwrap() <= v["bound"].as_f64().unwrap() * (1.0 + 1e-9));
    let v = parse(shadow_demo(1.0, 1.0, 1e-3, 101, 1));
    assert!(v["error"].as_str().unwrap().contains("splitting"));
}
