use serde::Serialize;

use crate::model::{CombinationMatrix, ScenarioConfig};

use super::{equivalence_sets, BeliefKind, HarnessError, TrajectoryRecord, MIN_FIT_HORIZON};

/// Gaps below this are treated as exhausted precision and left out of decay fits.
pub const GAP_FLOOR: f64 = 1e-13;

/// Fraction of the run, counted from the end, used for slope fits.
pub const FIT_WINDOW: f64 = 0.8;

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn window_start(horizon: usize) -> usize {
    horizon - (FIT_WINDOW * horizon as f64).floor() as usize
}

/// Least-squares slope of `log pi_{k,i}(theta)` against `i` over the trailing
/// part of the run. Expected to approach `-d_k(theta)`.
pub fn empirical_rate_fit(
    traj: &TrajectoryRecord,
    cfg: &ScenarioConfig,
    agent: usize,
    theta: usize,
) -> Result<f64, HarnessError> {
    if traj.horizon < MIN_FIT_HORIZON {
        return Err(HarnessError::HorizonTooShort { horizon: traj.horizon, required: MIN_FIT_HORIZON });
    }
    if equivalence_sets(cfg).get(agent).contains(&theta) {
        return Err(HarnessError::NotRejectable { agent, theta });
    }
    let start = window_start(traj.horizon);
    let points: Vec<(f64, f64)> = traj
        .steps
        .iter()
        .filter(|s| s.step > start)
        .filter_map(|s| s.beliefs(BeliefKind::NonCooperative).map(|b| (s.step as f64, b[agent].log_prob(theta))))
        .collect();
    least_squares_slope(&points).ok_or(HarnessError::HorizonTooShort {
        horizon: traj.horizon,
        required: MIN_FIT_HORIZON,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDecay {
    pub l: usize,
    pub k: usize,
    /// Negated slope of `log |a_{lk,i} - a_{lk,inf}|`.
    pub rate: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProbe {
    /// `(step, max |A_i - A_inf|)` at recorded steps.
    pub gap: Vec<(usize, f64)>,
    pub pair_rates: Vec<PairDecay>,
}

/// Weight gap series plus a decay-rate fit for each entry whose gap does not
/// vanish, using the trailing window and only values above [`GAP_FLOOR`].
pub fn weight_convergence_probe(traj: &TrajectoryRecord, a_inf: &CombinationMatrix) -> WeightProbe {
    let recorded: Vec<(usize, &CombinationMatrix)> =
        traj.steps.iter().filter_map(|s| s.weights.as_ref().map(|w| (s.step, w))).collect();
    let gap = recorded.iter().map(|&(i, w)| (i, w.max_abs_diff(a_inf))).collect();
    let start = window_start(traj.horizon);
    let n = a_inf.n();
    let mut pair_rates = Vec::new();
    for l in 0..n {
        for k in 0..n {
            let series: Vec<(f64, f64)> = recorded
                .iter()
                .map(|&(i, w)| (i as f64, (w.get(l, k) - a_inf.get(l, k)).abs()))
                .collect();
            if series.iter().all(|&(_, g)| g == 0.0) {
                continue;
            }
            let fit = |from: usize| -> Vec<(f64, f64)> {
                series
                    .iter()
                    .filter(|&&(i, g)| i > from as f64 && g > GAP_FLOOR)
                    .map(|&(i, g)| (i, g.ln()))
                    .collect()
            };
            let mut pts = fit(start);
            if pts.len() < 3 {
                pts = fit(0);
            }
            if let Some(slope) = least_squares_slope(&pts) {
                pair_rates.push(PairDecay { l, k, rate: -slope, points: pts.len() });
            }
        }
    }
    WeightProbe { gap, pair_rates }
}
