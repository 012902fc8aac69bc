//! Scenario execution and the diagnostics built on top of it.

mod analyze;
mod generators;
mod montecarlo;
pub mod output;
mod probes;
mod reference;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{self, AsymptoticsError, ObsEquivSets, OBS_EQUIV_TOL};
use crate::dynamics::{step_all, NetworkState, StepContext};
use crate::model::{validate_scenario, AgentStreams, BeliefVector, CombinationMatrix, ScenarioConfig, Violation};

pub use analyze::{analyze, Analysis, ComponentReport};
pub use generators::{
    generate_section5_scenario, two_cluster_topology, GeneratorParams, Topology, Variant,
};
pub use montecarlo::{
    monte_carlo, monte_carlo_seeds, AgentAggregate, MonteCarloSummary, Quantiles, RateAggregate,
};
pub use probes::{empirical_rate_fit, GAP_FLOOR, weight_convergence_probe, PairDecay, WeightProbe};
pub use reference::{run_steady_state_reference, tracking_gap, ReferenceTrajectory};

/// A belief counts as a hit once it exceeds this value.
pub const HIT_THRESHOLD: f64 = 0.99;

/// Number of consecutive steps above [`HIT_THRESHOLD`] for time-to-threshold.
pub const SUSTAIN_STEPS: usize = 10;

/// Simplex tolerance enforced on every belief during a run.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("scenario is invalid ({} violation(s)): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
    #[error("numeric fault at step {step}, agent {agent}: {what}")]
    NumericFault { step: usize, agent: usize, what: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hypothesis {theta} is not rejectable by agent {agent}")]
    NotRejectable { agent: usize, theta: usize },
    #[error("horizon {horizon} is shorter than the required {required}")]
    HorizonTooShort { horizon: usize, required: usize },
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error(transparent)]
    Analysis(#[from] AsymptoticsError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Which stored belief a series refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefKind {
    /// Private belief; the non-cooperative baseline.
    NonCooperative,
    /// Static-weight log-linear baseline.
    StaticCooperative,
    /// Cooperative belief of the adaptive scheme.
    SaslCooperative,
    /// Global belief of the adaptive scheme.
    SaslGlobal,
}

impl BeliefKind {
    pub const ALL: [BeliefKind; 4] = [
        BeliefKind::NonCooperative,
        BeliefKind::StaticCooperative,
        BeliefKind::SaslCooperative,
        BeliefKind::SaslGlobal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BeliefKind::NonCooperative => "non_cooperative",
            BeliefKind::StaticCooperative => "static_cooperative",
            BeliefKind::SaslCooperative => "sasl_cooperative",
            BeliefKind::SaslGlobal => "sasl_global",
        }
    }

    /// Kinds produced by a scenario's enabled algorithms.
    pub fn enabled(cfg: &ScenarioConfig) -> Vec<BeliefKind> {
        let f = cfg.algorithms;
        let mut out = Vec::new();
        if f.non_cooperative {
            out.push(BeliefKind::NonCooperative);
        }
        if f.static_cooperative {
            out.push(BeliefKind::StaticCooperative);
        }
        if f.sasl {
            out.push(BeliefKind::SaslCooperative);
            out.push(BeliefKind::SaslGlobal);
        }
        out
    }
}

impl fmt::Display for BeliefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which steps get a full snapshot. Every step below `dense_until` is kept,
/// then every `stride`-th; the final step is always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThinPolicy {
    pub dense_until: usize,
    pub stride: usize,
}

impl Default for ThinPolicy {
    fn default() -> Self {
        Self { dense_until: 2000, stride: 10 }
    }
}

impl ThinPolicy {
    pub fn every_step() -> Self {
        Self { dense_until: usize::MAX, stride: 1 }
    }

    pub fn keeps(&self, step: usize, horizon: usize) -> bool {
        step < self.dense_until || step == horizon || step.is_multiple_of(self.stride.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub thin: ThinPolicy,
    /// Keep per-step snapshots. When false only the final step is stored.
    pub record: bool,
    /// Replace the adaptive matrix by the closed-form limit at every step.
    pub force_limiting_weights: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { thin: ThinPolicy::default(), record: true, force_limiting_weights: false }
    }
}

/// Snapshot of every agent after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub pi: Vec<BeliefVector>,
    pub mu: Option<Vec<BeliefVector>>,
    pub mu_bar: Option<Vec<BeliefVector>>,
    pub nu: Option<Vec<BeliefVector>>,
    pub weights: Option<CombinationMatrix>,
}

impl StepRecord {
    fn capture(step: usize, state: &NetworkState, cfg: &ScenarioConfig, weights: Option<CombinationMatrix>) -> Self {
        let sasl = cfg.algorithms.sasl;
        let col = |f: fn(&crate::dynamics::AgentBeliefState) -> &BeliefVector| -> Vec<BeliefVector> {
            state.agents.iter().map(|a| f(a).clone()).collect()
        };
        Self {
            step,
            pi: col(|a| &a.pi),
            mu: sasl.then(|| col(|a| &a.mu)),
            mu_bar: sasl.then(|| col(|a| &a.mu_bar)),
            nu: cfg
                .algorithms
                .static_cooperative
                .then(|| state.agents.iter().map(|a| a.nu.clone().expect("baseline present")).collect()),
            weights,
        }
    }

    pub fn beliefs(&self, kind: BeliefKind) -> Option<&[BeliefVector]> {
        match kind {
            BeliefKind::NonCooperative => Some(&self.pi),
            BeliefKind::StaticCooperative => self.nu.as_deref(),
            BeliefKind::SaslCooperative => self.mu.as_deref(),
            BeliefKind::SaslGlobal => self.mu_bar.as_deref(),
        }
    }
}

/// Recorded history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub horizon: usize,
    pub steps: Vec<StepRecord>,
    /// `observations[i - 1][k]` is agent `k`'s draw at step `i`; never thinned.
    pub observations: Vec<Vec<usize>>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    /// `lambda_{k,i}(theta, other) = log b(theta) - log b(other)` over the recorded steps.
    pub fn log_ratio_series(
        &self,
        kind: BeliefKind,
        agent: usize,
        theta: usize,
        other: usize,
    ) -> Vec<(usize, f64)> {
        self.steps
            .iter()
            .filter_map(|s| s.beliefs(kind).map(|b| (s.step, b[agent].log_ratio(theta, other))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub true_state: usize,
    /// Final belief on the agent's true state.
    pub final_belief: f64,
    pub hit: bool,
    /// First step of a run of [`SUSTAIN_STEPS`] steps above [`HIT_THRESHOLD`].
    pub time_to_threshold: Option<usize>,
}

/// Least-squares slope of `log pi_{k,i}(theta)` for one rejectable hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub agent: usize,
    pub theta: usize,
    pub slope: f64,
    /// `-d_k(theta)`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trajectory: TrajectoryRecord,
    pub summary: BTreeMap<BeliefKind, Vec<AgentSummary>>,
    /// Closed-form limit of the adaptive weights.
    pub limiting_weights: CombinationMatrix,
    /// `(step, max |A_i - A_inf|)` for every step of the adaptive scheme.
    pub weight_gap: Vec<(usize, f64)>,
    /// Empty when the horizon is below the fitting minimum.
    pub rate_fits: Vec<RateFit>,
}

impl RunResult {
    pub fn summary_for(&self, kind: BeliefKind) -> Option<&[AgentSummary]> {
        self.summary.get(&kind).map(Vec::as_slice)
    }

    pub fn final_weight_gap(&self) -> Option<f64> {
        self.weight_gap.last().map(|&(_, g)| g)
    }
}

#[derive(Debug, Clone, Default)]
struct Streak {
    run: usize,
    first: Option<usize>,
}

impl Streak {
    fn push(&mut self, step: usize, value: f64) {
        if value > HIT_THRESHOLD {
            self.run += 1;
            if self.first.is_none() && self.run >= SUSTAIN_STEPS {
                self.first = Some(step + 1 - SUSTAIN_STEPS);
            }
        } else {
            self.run = 0;
        }
    }
}

fn agent_beliefs(state: &NetworkState, kind: BeliefKind, k: usize) -> Option<&BeliefVector> {
    let a = &state.agents[k];
    match kind {
        BeliefKind::NonCooperative => Some(&a.pi),
        BeliefKind::StaticCooperative => a.nu.as_ref(),
        BeliefKind::SaslCooperative => Some(&a.mu),
        BeliefKind::SaslGlobal => Some(&a.mu_bar),
    }
}

fn check_numerics(state: &NetworkState, kinds: &[BeliefKind], step: usize) -> Result<(), HarnessError> {
    for (agent, _) in state.agents.iter().enumerate() {
        for &kind in kinds {
            let b = agent_beliefs(state, kind, agent).expect("enabled kind present");
            if b.log_probs().iter().any(|x| x.is_nan() || *x > 0.0) || !b.is_on_simplex(SIMPLEX_TOL) {
                return Err(HarnessError::NumericFault {
                    step,
                    agent,
                    what: format!("{kind} belief left the simplex"),
                });
            }
        }
    }
    Ok(())
}

/// Observationally equivalent sets of a scenario at the default tolerance.
pub fn equivalence_sets(cfg: &ScenarioConfig) -> ObsEquivSets {
    ObsEquivSets::from_scenario(cfg, OBS_EQUIV_TOL)
}

/// Minimum horizon for slope fits of log beliefs.
pub const MIN_FIT_HORIZON: usize = 500;

/// Runs every enabled algorithm on one shared observation stream.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunResult, HarnessError> {
    let violations = validate_scenario(cfg);
    if !violations.is_empty() {
        return Err(HarnessError::Invalid(violations));
    }
    let n = cfg.n_agents();
    let sets = equivalence_sets(cfg);
    let limiting = asymptotics::limiting_matrix(&sets, &cfg.graph);
    let mut ctx = StepContext::new(cfg);
    if opts.force_limiting_weights {
        ctx = ctx.with_forced_weights(limiting.clone());
    }
    let kinds = BeliefKind::enabled(cfg);
    let mut tracked = kinds.clone();
    if !tracked.contains(&BeliefKind::NonCooperative) {
        tracked.insert(0, BeliefKind::NonCooperative);
    }

    let mut state = NetworkState::initial(cfg);
    let mut streams = AgentStreams::new(cfg.seed, n);
    let mut streaks: BTreeMap<BeliefKind, Vec<Streak>> =
        kinds.iter().map(|&k| (k, vec![Streak::default(); n])).collect();
    let mut steps = Vec::new();
    let mut observations = Vec::with_capacity(cfg.horizon);
    let mut weight_gap = Vec::new();

    for step in 1..=cfg.horizon {
        let outcome = step_all(&mut state, &ctx, &mut streams);
        check_numerics(&state, &tracked, step)?;
        if let Some(a) = &outcome.weights {
            for (k, col) in (0..n).map(|k| (k, a.column_sum(k))) {
                if !((col - 1.0).abs() <= crate::model::STOCHASTIC_TOL) {
                    return Err(HarnessError::NumericFault {
                        step,
                        agent: k,
                        what: format!("adaptive weight column sums to {col}"),
                    });
                }
            }
            weight_gap.push((step, a.max_abs_diff(&limiting)));
        }
        for (&kind, agents) in streaks.iter_mut() {
            for (k, streak) in agents.iter_mut().enumerate() {
                let b = agent_beliefs(&state, kind, k).expect("enabled kind present");
                streak.push(step, b.prob(cfg.true_states[k]));
            }
        }
        observations.push(outcome.observations);
        let keep = if opts.record { opts.thin.keeps(step, cfg.horizon) } else { step == cfg.horizon };
        if keep {
            steps.push(StepRecord::capture(step, &state, cfg, outcome.weights));
        }
    }
    if cfg.horizon == 0 {
        steps.push(StepRecord::capture(0, &state, cfg, None));
    }

    let summary = streaks
        .into_iter()
        .map(|(kind, agents)| {
            let rows = agents
                .into_iter()
                .enumerate()
                .map(|(k, streak)| {
                    let b = agent_beliefs(&state, kind, k).expect("enabled kind present");
                    let final_belief = b.prob(cfg.true_states[k]);
                    AgentSummary {
                        agent: k,
                        true_state: cfg.true_states[k],
                        final_belief,
                        hit: final_belief > HIT_THRESHOLD,
                        time_to_threshold: streak.first,
                    }
                })
                .collect();
            (kind, rows)
        })
        .collect();

    let trajectory = TrajectoryRecord { horizon: cfg.horizon, steps, observations };
    let mut rate_fits = Vec::new();
    if opts.record && cfg.horizon >= MIN_FIT_HORIZON {
        let kls = asymptotics::divergence_table(cfg);
        for k in 0..n {
            for theta in (0..cfg.n_hypotheses()).filter(|t| !sets.get(k).contains(t)) {
                let slope = empirical_rate_fit(&trajectory, cfg, k, theta)?;
                rate_fits.push(RateFit { agent: k, theta, slope, expected: -kls[k][theta] });
            }
        }
    }

    Ok(RunResult { trajectory, summary, limiting_weights: limiting, weight_gap, rate_fits })
}
