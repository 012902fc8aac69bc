use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::model::ScenarioConfig;

use super::{run_scenario, BeliefKind, HarnessError, RunOptions, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { min: v[0], p10: at(0.1), median: at(0.5), p90: at(0.9), max: v[v.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentAggregate {
    pub agent: usize,
    pub hit_rate: f64,
    pub mean_final_belief: f64,
    /// Runs in which the belief crossed the threshold and stayed there.
    pub reached_threshold: usize,
    /// Mean over those runs.
    pub mean_time_to_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateAggregate {
    pub agent: usize,
    pub theta: usize,
    pub expected: f64,
    pub median_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub n_seeds: usize,
    pub seeds: Vec<u64>,
    pub algorithms: BTreeMap<BeliefKind, Vec<AgentAggregate>>,
    /// Final `max |A_i - A_inf|` across runs.
    pub final_weight_gap: Option<Quantiles>,
    pub rates: Vec<RateAggregate>,
}

/// Runs seeds `cfg.seed + 0 .. cfg.seed + n_seeds - 1`.
pub fn monte_carlo(cfg: &ScenarioConfig, n_seeds: usize, opts: &RunOptions) -> Result<MonteCarloSummary, HarnessError> {
    if n_seeds == 0 {
        return Err(HarnessError::Generator("monte carlo needs at least one seed".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    monte_carlo_seeds(cfg, &seeds, opts)
}

/// Runs the given seeds concurrently. The aggregate depends only on the set of seeds.
pub fn monte_carlo_seeds(
    cfg: &ScenarioConfig,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<MonteCarloSummary, HarnessError> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let runs: Vec<RunResult> = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run_scenario(&c, opts)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(aggregate(seeds, &runs))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn aggregate(seeds: Vec<u64>, runs: &[RunResult]) -> MonteCarloSummary {
    let n_runs = runs.len() as f64;
    let mut algorithms = BTreeMap::new();
    for (&kind, first) in &runs[0].summary {
        let rows = (0..first.len())
            .map(|agent| {
                let per_run: Vec<_> = runs.iter().map(|r| &r.summary[&kind][agent]).collect();
                let times: Vec<f64> =
                    per_run.iter().filter_map(|s| s.time_to_threshold.map(|t| t as f64)).collect();
                AgentAggregate {
                    agent,
                    hit_rate: per_run.iter().filter(|s| s.hit).count() as f64 / n_runs,
                    mean_final_belief: mean(per_run.iter().map(|s| s.final_belief)).unwrap_or(f64::NAN),
                    reached_threshold: times.len(),
                    mean_time_to_threshold: mean(times.into_iter()),
                }
            })
            .collect();
        algorithms.insert(kind, rows);
    }
    let gaps: Vec<f64> = runs.iter().filter_map(RunResult::final_weight_gap).collect();
    let rates = runs[0]
        .rate_fits
        .iter()
        .enumerate()
        .map(|(j, fit)| {
            let slopes: Vec<f64> = runs.iter().filter_map(|r| r.rate_fits.get(j).map(|f| f.slope)).collect();
            RateAggregate {
                agent: fit.agent,
                theta: fit.theta,
                expected: fit.expected,
                median_slope: Quantiles::of(&slopes).map_or(f64::NAN, |q| q.median),
            }
        })
        .collect();
    MonteCarloSummary {
        n_seeds: seeds.len(),
        seeds,
        algorithms,
        final_weight_gap: Quantiles::of(&gaps),
        rates,
    }
}
