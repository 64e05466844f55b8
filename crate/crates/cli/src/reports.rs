//! JSON reports. Exact quantities are written as rational strings (`"1/2"`).

use serde_json::{json, Value};
use soficlab::approx::to_f64;
use soficlab::{AmalgamResult, DefectReport, SoficApproximation, VerifyReport};

pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn generator_traces(a: &SoficApproximation) -> Value {
    let gens: Vec<Value> = a
        .generators()
        .iter()
        .enumerate()
        .map(|(i, g)| json!({ "generator": i + 1, "fixed_fraction": g.fixed_fraction().to_string() }))
        .collect();
    json!({ "points": a.n(), "generators": gens })
}

pub fn defects(d: &DefectReport) -> Value {
    let relators: Vec<Value> = d
        .relator_defects
        .iter()
        .map(|v| json!({ "relator": v.word.to_string(), "defect": v.value.to_string() }))
        .collect();
    let words: Vec<Value> = d
        .word_traces
        .iter()
        .map(|v| json!({ "word": v.word.to_string(), "fixed_fraction": v.value.to_string() }))
        .collect();
    json!({
        "radius": d.radius,
        "max_relator_defect": d.max_relator_defect.to_string(),
        "max_trace": d.max_trace.to_string(),
        "mean_trace": d.mean_trace,
        "relators": relators,
        "word_traces": words,
    })
}

pub fn amalgam(r: &AmalgamResult) -> Value {
    json!({
        "points": r.action.n(),
        "h_residuals": r.h_residuals.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "label_residual": r.label_residual.to_string(),
    })
}

pub fn verify(r: &VerifyReport) -> Value {
    let classes: Vec<Value> = r
        .classes
        .iter()
        .map(|c| {
            json!({
                "encoding": c.encoding,
                "matched": c.matched,
                "mass": c.mass,
                "label_violations": c.label_violations,
                "collision_violations": c.collision_violations,
                "separation_violations": c.separation_violations,
            })
        })
        .collect();
    json!({
        "pass": r.pass,
        "epsilon": r.epsilon,
        "sup": r.sup.to_string(),
        "sup_value": to_f64(r.sup),
        "tv": r.tv.to_string(),
        "worst_class": r.worst_class.as_ref().map(|(k, d)| json!({ "encoding": k, "difference": d })),
        "e1": r.e1,
        "e2": r.e2,
        "e3": r.e3,
        "e4": r.e4,
        "realized_classes": r.realized_classes,
        "ball_size": r.ball_size,
        "epsilon1": r.epsilon1,
        "within_budget": r.within_budget,
        "classes": classes,
    })
}
