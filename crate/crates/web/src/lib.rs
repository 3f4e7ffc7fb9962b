//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; failures come
//! back as `{"error": "..."}` so the page needs no exception handling.

use compdyn::classify::{classify_dissipative, Property, Verdict};
use compdyn::simulate::{
    self, make_pseudotrajectory, norm, shadow, Operator, SparseVector, Splitting,
};
use compdyn::systems::{DissipativeSystem, MeasureSequence, Site, WeightSequence};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_STEPS: u32 = 200;
const MAX_LENGTH: u32 = 1001;

fn respond(result: Result<serde_json::Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
struct Row<'a> {
    property: String,
    #[serde(flatten)]
    verdict: &'a Verdict,
}

fn classify_inner(g_neg: f64, g_pos: f64, p: f64) -> Result<serde_json::Value, String> {
    let measures = MeasureSequence::two_sided(g_neg, g_pos).map_err(|e| e.to_string())?;
    let sys = DissipativeSystem::new(p, measures).map_err(|e| e.to_string())?;
    let report = classify_dissipative(&sys).map_err(|e| e.to_string())?;
    let rows: Vec<Row> = Property::ALL
        .iter()
        .map(|prop| Row {
            property: prop.to_string(),
            verdict: report.get(*prop),
        })
        .collect();
    Ok(json!({ "g_neg": g_neg, "g_pos": g_pos, "p": p, "verdicts": rows }))
}

/// Verdicts for `μ_k` with ratio `g_neg` on `k < 0` and `g_pos` on `k ≥ 0`.
#[wasm_bindgen]
pub fn classify_rates(g_neg: f64, g_pos: f64, p: f64) -> String {
    respond(classify_inner(g_neg, g_pos, p))
}

fn split_shift(w_neg: f64, w_pos: f64, p: f64) -> Result<Operator, String> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(format!("p = {p} must be at least 1"));
    }
    let w = WeightSequence::split(w_neg, w_pos).map_err(|e| e.to_string())?;
    Ok(Operator::shift(&w, p))
}

fn orbit_inner(
    w_neg: f64,
    w_pos: f64,
    p: f64,
    k: i32,
    steps: u32,
) -> Result<serde_json::Value, String> {
    if steps > MAX_STEPS {
        return Err(format!("at most {MAX_STEPS} steps"));
    }
    let op = split_shift(w_neg, w_pos, p)?;
    let x = SparseVector::<f64>::basis(Site::line(k.into()));
    let n = i64::from(steps);
    let norms = simulate::orbit_norms(&op, &x, -n..=n).map_err(|e| e.to_string())?;
    let points: Vec<(i64, f64)> = (-n..=n).zip(norms).collect();
    Ok(json!({ "k": k, "points": points }))
}

/// `‖B_w^n e_k‖_p` for `|n| ≤ steps`, with `w_j = w_neg` for `j ≤ 0` and
/// `w_pos` for `j > 0`.
#[wasm_bindgen]
pub fn orbit_norms(w_neg: f64, w_pos: f64, p: f64, k: i32, steps: u32) -> String {
    respond(orbit_inner(w_neg, w_pos, p, k, steps))
}

fn shadow_inner(
    w_neg: f64,
    w_pos: f64,
    delta: f64,
    length: u32,
    seed: u32,
) -> Result<serde_json::Value, String> {
    if length > MAX_LENGTH {
        return Err(format!("length at most {MAX_LENGTH}"));
    }
    let op = split_shift(w_neg, w_pos, 1.0)?;
    let split = Splitting::for_operator(&op).map_err(|e| e.to_string())?;
    let e0 = SparseVector::basis(Site::line(0));
    let x0 = e0.scaled(1.0 / norm(&op, &e0));
    let pt = make_pseudotrajectory(&op, &x0, delta, length as usize, seed.into())
        .map_err(|e| e.to_string())?;
    let r = shadow(&op, &pt, &split).map_err(|e| e.to_string())?;
    Ok(json!({
        "delta": delta,
        "start": pt.start,
        "epsilon": r.epsilon,
        "bound": r.bound,
        "within_bound": r.within_bound(),
        "max_residual": r.max_residual,
        "distances": r.distances,
    }))
}

/// Shadows a seeded δ-pseudotrajectory of the split shift (`p = 1`) and
/// returns the distance to the true orbit at every step.
#[wasm_bindgen]
pub fn shadow_demo(w_neg: f64, w_pos: f64, delta: f64, length: u32, seed: u32) -> String {
    respond(shadow_inner(w_neg, w_pos, delta, length, seed))
}
