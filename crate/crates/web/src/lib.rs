//! Browser bindings. Every export returns a JSON string; errors come back
//! as `{"error": "..."}` so the page never has to catch.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use teleo_core::planner::{iid_policy, ufs_counterexample_report};
use teleo_core::teleo::{success_exact, success_interval, zoo, Policy};
use teleo_core::Probability;

fn respond(v: Result<Value, String>) -> String {
    match v {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn num(p: &Probability) -> Value {
    json!({ "exact": p.to_string(), "approx": p.to_f64() })
}

/// Success of the i.i.d. driver who continues with probability `k/steps`,
/// for every `k`.
pub fn absent_minded(steps: u32) -> Result<Value, String> {
    if !(1..=400).contains(&steps) {
        return Err("steps must be between 1 and 400".into());
    }
    let env = zoo::absent_minded_env();
    let mut points = Vec::new();
    let mut best: Option<(Probability, Probability)> = None;
    for k in 0..=steps {
        let p = Probability::frac(k as i64, steps as i64);
        let q = Probability::frac((steps - k) as i64, steps as i64);
        let v = success_exact(&iid_policy(&[p.clone(), q], 1), &env).map_err(|e| e.to_string())?;
        if best.as_ref().is_none_or(|(_, b)| &v > b) {
            best = Some((p.clone(), v.clone()));
        }
        points.push(json!({ "p": num(&p), "value": num(&v) }));
    }
    let (p, v) = best.expect("at least one point");
    Ok(json!({ "points": points, "best": { "p": num(&p), "value": num(&v) } }))
}

#[wasm_bindgen]
pub fn absent_minded_curve(steps: u32) -> String {
    respond(absent_minded(steps))
}

/// Imperfect mimic against the policy that gives up with probability
/// `alpha` (written `p/q`).
pub fn ufs(n: u32, alpha: &str) -> Result<Value, String> {
    if !(2..=6).contains(&n) {
        return Err("n must be between 2 and 6".into());
    }
    let alpha: Probability = alpha.trim().parse().map_err(|e: teleo_core::Error| e.to_string())?;
    let r = ufs_counterexample_report(n, &alpha).map_err(|e| e.to_string())?;
    let evolved: Vec<Value> = r
        .evolved
        .iter()
        .map(|e| json!({ "state": e.state.0 + 1, "imperfect": num(&e.imperfect), "alpha": num(&e.alpha) }))
        .collect();
    Ok(json!({
        "n": n,
        "alpha": num(&r.alpha),
        "policy_value": num(&r.policy_value),
        "alpha_policy_value": num(&r.alpha_policy_value),
        "evolved": evolved,
        "strict_improvement": r.strict_improvement,
    }))
}

#[wasm_bindgen]
pub fn ufs_explorer(n: u32, alpha: &str) -> String {
    respond(ufs(n, alpha))
}

/// Lower and upper success bounds at horizons `0..=horizon` in a testing
/// environment. With `mismatch` the tested policy always plays the other
/// action.
pub fn testing(horizon: usize, mismatch: bool) -> Result<Value, String> {
    if horizon > 40 {
        return Err("horizon must be at most 40".into());
    }
    let target = Policy::constant(1, 2, 3);
    let env = zoo::uniform_testing(&target).map_err(|e| e.to_string())?;
    let pi = if mismatch { Policy::constant(0, 2, 3) } else { target };
    let mut rows = Vec::new();
    let mut exact = None;
    for h in 0..=horizon {
        let iv = success_interval(&pi, &env, h).map_err(|e| e.to_string())?;
        rows.push(json!({ "horizon": h, "lo": num(&iv.lo), "hi": num(&iv.hi) }));
        exact = iv.exact;
    }
    Ok(json!({ "rows": rows, "exact": exact.as_ref().map(num) }))
}

#[wasm_bindgen]
pub fn testing_intervals(horizon: usize, mismatch: bool) -> String {
    respond(testing(horizon, mismatch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_peaks_at_half() {
        let v = absent_minded(10).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 11);
        assert_eq!(v["best"]["p"]["exact"], "1/2");
        assert_eq!(v["best"]["value"]["exact"], "1/4");
        assert_eq!(v["points"][0]["value"]["exact"], "0");
        assert!(absent_minded(0).is_err());
    }

    #[test]
    fn ufs_values() {
        let v = ufs(2, "1/100").unwrap();
        assert_eq!(v["policy_value"]["exact"], "2/3");
        assert_eq!(v["strict_improvement"], true);
        assert!(ufs(2, "3/2").is_err());
        assert!(respond(ufs(1, "1/2")).contains("error"));
    }

    #[test]
    fn intervals_close_in() {
        let v = testing(12, true).unwrap();
        assert_eq!(v["exact"]["exact"], "3/4");
        let rows = v["rows"].as_array().unwrap();
        let width = |r: &Value| r["hi"]["approx"].as_f64().unwrap() - r["lo"]["approx"].as_f64().unwrap();
        assert!(rows.windows(2).all(|w| width(&w[1]) <= width(&w[0])));
        assert!(width(&rows[12]) < 1e-3);
        assert_eq!(testing(3, false).unwrap()["exact"]["exact"], "1");
    }
}
