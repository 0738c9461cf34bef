//! Browser bindings. Each operation has a plain `*_impl` function taking and
//! returning JSON strings, so it can be tested natively; the exported
//! wrappers only convert errors into JS exceptions.

use regsens_core::breakdown::{
    bp_explain_away, bp_sign_change, naive_breakdown, ExplainAway, SignChange,
};
use regsens_core::idset::{cumulative_set, idset_curve, solve_identified_set, CurvePoint};
use regsens_core::moments::{check_r2long, resolve_r2long, summarize, R2Rule};
use regsens_core::{IntervalUnion, MomentMatrix, RegressionSummary};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Covariance of the demonstration model, for the page's initial state.
pub const DEMO_MOMENTS: &str = r#"{"order":["y","x","w1"],"cov":[[4.75,1.75,1.5],[1.75,1,0.5],[1.5,0.5,1]],"denominator":"n-1"}"#;

fn summary_of(moments_json: &str) -> Result<RegressionSummary, String> {
    let m = MomentMatrix::from_json(moments_json).map_err(|e| e.to_string())?;
    summarize(&m).map_err(|e| e.to_string())
}

fn r2_of(rule: &str, s: &RegressionSummary) -> Result<f64, String> {
    let rule: R2Rule = rule
        .parse()
        .map_err(|e: regsens_core::Error| e.to_string())?;
    let v = resolve_r2long(rule, s).map_err(|e| e.to_string())?;
    check_r2long(v.value, s)
        .map(|v| v.value)
        .map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializes")
}

#[derive(Serialize)]
struct IdsetOut {
    beta_med: f64,
    r2long: f64,
    roots: Vec<f64>,
    excluded: Vec<f64>,
    curve: Vec<CurvePoint>,
}

/// Identified set at a fixed δ, plus δ(b) over `[lo, hi]` for plotting.
pub fn idset_impl(
    moments_json: &str,
    rule: &str,
    delta: f64,
    lo: f64,
    hi: f64,
) -> Result<String, String> {
    let s = summary_of(moments_json)?;
    let r2 = r2_of(rule, &s)?;
    let set = solve_identified_set(&s, delta, r2).map_err(|e| e.to_string())?;
    let curve = if set.degenerate_medium || !(lo < hi) {
        Vec::new()
    } else {
        idset_curve(&s, r2, lo, hi, 801).map_err(|e| e.to_string())?
    };
    Ok(json(&IdsetOut {
        beta_med: s.beta_med,
        r2long: r2,
        roots: set.roots,
        excluded: set.excluded,
        curve,
    }))
}

#[derive(Serialize)]
struct BreakdownOut {
    beta_med: f64,
    r2long: f64,
    explain_away: Option<ExplainAway>,
    sign_change: Option<SignChange>,
    sign_change_restricted: Option<SignChange>,
    naive_incorrect: Option<f64>,
    errors: Vec<String>,
}

/// Breakdown points; `m` is an absolute magnitude bound, ignored when not
/// finite.
pub fn breakdown_impl(moments_json: &str, rule: &str, m: f64) -> Result<String, String> {
    let s = summary_of(moments_json)?;
    let r2 = r2_of(rule, &s)?;
    let mut errors = Vec::new();
    let mut keep = |what: &str, e: regsens_core::Error| errors.push(format!("{what}: {e}"));
    let ea = bp_explain_away(&s, r2)
        .map_err(|e| keep("explain-away", e))
        .ok();
    let sc = bp_sign_change(&s, r2, None)
        .map_err(|e| keep("sign-change", e))
        .ok();
    let scm = if m.is_finite() {
        bp_sign_change(&s, r2, Some(m))
            .map_err(|e| keep("sign-change (bounded)", e))
            .ok()
    } else {
        None
    };
    let naive = naive_breakdown(&s, r2).map_err(|e| keep("naive", e)).ok();
    Ok(json(&BreakdownOut {
        beta_med: s.beta_med,
        r2long: r2,
        explain_away: ea,
        sign_change: sc,
        sign_change_restricted: scm,
        naive_incorrect: naive,
        errors,
    }))
}

#[derive(Serialize)]
struct BoundsOut {
    set: IntervalUnion,
    text: String,
    contains_zero: bool,
}

/// The set over |δ| ≤ δ̄.
pub fn bounds_impl(moments_json: &str, rule: &str, delta_bar: f64) -> Result<String, String> {
    let s = summary_of(moments_json)?;
    let r2 = r2_of(rule, &s)?;
    if !(delta_bar >= 0.0 && delta_bar.is_finite()) {
        return Err(format!("δ̄ must be finite and >= 0, got {delta_bar}"));
    }
    let set = cumulative_set(&s, delta_bar, r2, None).map_err(|e| e.to_string())?;
    Ok(json(&BoundsOut {
        text: set.to_string(),
        contains_zero: set.contains(0.0),
        set,
    }))
}

#[wasm_bindgen]
pub fn demo_moments() -> String {
    DEMO_MOMENTS.to_string()
}

#[wasm_bindgen]
pub fn identified_set(
    moments_json: &str,
    rule: &str,
    delta: f64,
    lo: f64,
    hi: f64,
) -> Result<String, JsError> {
    idset_impl(moments_json, rule, delta, lo, hi).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn breakdown(moments_json: &str, rule: &str, m: f64) -> Result<String, JsError> {
    breakdown_impl(moments_json, rule, m).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bounds(moments_json: &str, rule: &str, delta_bar: f64) -> Result<String, JsError> {
    bounds_impl(moments_json, rule, delta_bar).map_err(|e| JsError::new(&e))
}
