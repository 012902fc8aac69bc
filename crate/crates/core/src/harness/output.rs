//! CSV and JSON emitters. Every decimal is rounded to 12 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::model::ScenarioConfig;

use super::{BeliefKind, RunResult, TrajectoryRecord};

/// Version tag of the long trajectory CSV layout.
pub const TRAJECTORY_SCHEMA: &str = "trajectory-long/v1";
pub const TRAJECTORY_HEADER: &str = "step,agent,algorithm,hypothesis,belief";

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest representation of the rounded value.
pub fn format_decimal(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    Number::from_f64(round_sig(x)).expect("finite").to_string()
}

/// Rounds every non-integer number in a JSON tree.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn to_rounded_value<T: Serialize>(t: &T) -> Value {
    let mut v = serde_json::to_value(t).expect("serializable");
    round_json(&mut v);
    v
}

pub fn to_json_pretty<T: Serialize>(t: &T) -> String {
    serde_json::to_string_pretty(&to_rounded_value(t)).expect("serializable")
}

/// Long-format trajectory: one row per recorded step, agent, belief kind and hypothesis.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    cfg: &ScenarioConfig,
    traj: &TrajectoryRecord,
    kinds: &[BeliefKind],
) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for rec in &traj.steps {
        for agent in 0..cfg.n_agents() {
            for &kind in kinds {
                let Some(beliefs) = rec.beliefs(kind) else { continue };
                for (theta, label) in cfg.hypotheses.labels.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{agent},{kind},{label},{}",
                        rec.step,
                        format_decimal(beliefs[agent].prob(theta))
                    )?;
                }
            }
        }
    }
    w.flush()
}

/// Paired comparison: each algorithm's belief on the agent's true state, one row per step and agent.
pub fn write_comparison_csv<W: Write>(mut w: W, cfg: &ScenarioConfig, traj: &TrajectoryRecord) -> io::Result<()> {
    let names: Vec<&str> = BeliefKind::ALL.iter().map(|k| k.name()).collect();
    writeln!(w, "step,agent,true_state,{}", names.join(","))?;
    for rec in &traj.steps {
        for agent in 0..cfg.n_agents() {
            let truth = cfg.true_states[agent];
            let cells: Vec<String> = BeliefKind::ALL
                .iter()
                .map(|&k| rec.beliefs(k).map_or_else(String::new, |b| format_decimal(b[agent].prob(truth))))
                .collect();
            let label = cfg.hypotheses.label(truth).unwrap_or_default();
            writeln!(w, "{},{agent},{label},{}", rec.step, cells.join(","))?;
        }
    }
    w.flush()
}

/// Summary document written next to a trajectory CSV.
pub fn run_summary_json(cfg: &ScenarioConfig, result: &RunResult) -> Value {
    let summary: serde_json::Map<String, Value> = result
        .summary
        .iter()
        .map(|(k, rows)| (k.name().to_string(), to_rounded_value(rows)))
        .collect();
    let mut v = json!({
        "trajectory_schema": TRAJECTORY_SCHEMA,
        "scenario": {
            "n_agents": cfg.n_agents(),
            "n_hypotheses": cfg.n_hypotheses(),
            "horizon": cfg.horizon,
            "seed": cfg.seed,
            "epsilon": cfg.epsilon,
        },
        "summary": summary,
        "limiting_weights": result.limiting_weights,
        "final_weight_gap": result.final_weight_gap(),
        "rate_fits": result.rate_fits,
    });
    round_json(&mut v);
    v
}
