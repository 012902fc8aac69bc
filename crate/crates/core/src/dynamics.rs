//! Belief updates: stand-alone Bayes, log-linear fusion with static weights,
//! and the self-aware cooperative recursion with its global-belief override.
//!
//! All arithmetic happens on log probabilities; beliefs are only turned into
//! linear probabilities when a caller asks for them.

use thiserror::Error;

use crate::model::{
    logsumexp, sample_observation, AgentStreams, BeliefVector, CombinationMatrix,
    LikelihoodModel, ScenarioConfig, STOCHASTIC_TOL,
};
use crate::weights;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("observation {obs} out of range for alphabet of size {size}")]
    ObservationOutOfRange { obs: usize, size: usize },
    #[error("belief has {found} entries, likelihood model has {expected} rows")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{psis} beliefs but {weights} weights")]
    WeightCountMismatch { psis: usize, weights: usize },
    #[error("fusion weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("fusion weight {index} = {value} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("belief {participant} has a zero entry at hypothesis {theta}")]
    ZeroEntry { participant: usize, theta: usize },
    #[error("no beliefs to fuse")]
    NothingToFuse,
}

/// Bayes kernel shared by the local and the cooperative adapt step.
///
/// Panics if the normalizer vanishes, which cannot happen for a prior with
/// one positive entry and a full-support likelihood.
pub(crate) fn bayes_kernel(prev: &BeliefVector, log_lik: &[f64]) -> BeliefVector {
    let log: Vec<f64> = prev.log_probs().iter().zip(log_lik).map(|(p, l)| p + l).collect();
    BeliefVector::from_log_weights(log)
        .expect("Bayes update with a zero normalizer: corrupted belief or likelihood input")
}

/// One step of stand-alone Bayesian learning on agent-private data.
pub fn bayes_local_update(
    pi_prev: &BeliefVector,
    model: &LikelihoodModel,
    obs: usize,
) -> Result<BeliefVector, DynamicsError> {
    if pi_prev.len() != model.n_hypotheses() {
        return Err(DynamicsError::DimensionMismatch {
            expected: model.n_hypotheses(),
            found: pi_prev.len(),
        });
    }
    let size = model.alphabet_size();
    if obs >= size {
        return Err(DynamicsError::ObservationOutOfRange { obs, size });
    }
    Ok(bayes_kernel(pi_prev, &model.log_likelihood_column(obs)))
}

/// Adapt step of the cooperative recursion. Same map as [`bayes_local_update`],
/// applied to the cooperative belief; the result is the intermediate `psi`.
pub fn social_adapt(
    mu_prev: &BeliefVector,
    model: &LikelihoodModel,
    obs: usize,
) -> Result<BeliefVector, DynamicsError> {
    bayes_local_update(mu_prev, model, obs)
}

/// Log-linear (weighted geometric mean) fusion of neighborhood beliefs.
pub fn social_combine(psis: &[&BeliefVector], weights: &[f64]) -> Result<BeliefVector, DynamicsError> {
    if psis.is_empty() {
        return Err(DynamicsError::NothingToFuse);
    }
    if psis.len() != weights.len() {
        return Err(DynamicsError::WeightCountMismatch { psis: psis.len(), weights: weights.len() });
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(DynamicsError::InvalidWeight { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(DynamicsError::WeightsNotNormalized { sum });
    }
    let m = psis[0].len();
    for (participant, psi) in psis.iter().enumerate() {
        if psi.len() != m {
            return Err(DynamicsError::DimensionMismatch { expected: m, found: psi.len() });
        }
        if let Some(theta) = psi.log_probs().iter().position(|x| !x.is_finite()) {
            return Err(DynamicsError::ZeroEntry { participant, theta });
        }
    }
    Ok(fuse(psis.iter().copied().zip(weights.iter().copied()), m))
}

/// Fusion without checks. Zero-weight participants are skipped.
pub(crate) fn fuse<'a>(
    parts: impl Iterator<Item = (&'a BeliefVector, f64)>,
    m: usize,
) -> BeliefVector {
    let parts: Vec<(&BeliefVector, f64)> = parts.filter(|&(_, a)| a != 0.0).collect();
    if let [(only, a)] = parts[..] {
        if a == 1.0 {
            return only.clone();
        }
    }
    let mut log = vec![0.0; m];
    for (psi, a) in parts {
        for (acc, x) in log.iter_mut().zip(psi.log_probs()) {
            *acc += a * x;
        }
    }
    debug_assert!(logsumexp(&log).is_finite());
    BeliefVector::from_log_weights(log).expect("fusion of finite log beliefs is finite")
}

/// Falls back to the private belief when it rules out a hypothesis
/// (`pi < epsilon`) that the cooperative belief still supports (`mu > epsilon`).
pub fn global_belief(pi: &BeliefVector, mu: &BeliefVector, epsilon: f64) -> BeliefVector {
    if conflicts(pi, mu, epsilon) {
        pi.clone()
    } else {
        mu.clone()
    }
}

fn conflicts(pi: &BeliefVector, mu: &BeliefVector, epsilon: f64) -> bool {
    (0..pi.len()).any(|t| pi.prob(t) < epsilon && mu.prob(t) > epsilon)
}

/// Beliefs held by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBeliefState {
    /// Private belief from the agent's own data.
    pub pi: BeliefVector,
    /// Cooperative belief.
    pub mu: BeliefVector,
    /// Global belief (cooperative, overridden by `pi` on conflict).
    pub mu_bar: BeliefVector,
    /// Static-weight baseline belief, when that baseline runs.
    pub nu: Option<BeliefVector>,
}

impl AgentBeliefState {
    pub fn uniform(m: usize, with_baseline: bool) -> Self {
        let u = BeliefVector::uniform(m);
        Self { pi: u.clone(), mu: u.clone(), mu_bar: u.clone(), nu: with_baseline.then_some(u) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub agents: Vec<AgentBeliefState>,
}

impl NetworkState {
    /// Uniform priors for every belief.
    pub fn initial(cfg: &ScenarioConfig) -> Self {
        let with_baseline = cfg.algorithms.static_cooperative;
        Self {
            agents: (0..cfg.n_agents())
                .map(|_| AgentBeliefState::uniform(cfg.n_hypotheses(), with_baseline))
                .collect(),
        }
    }
}

/// Everything a step needs that does not change over a run.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub cfg: &'a ScenarioConfig,
    /// `log_lik[k][obs][theta]`.
    log_lik: Vec<Vec<Vec<f64>>>,
    neighborhoods: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    static_weights: Option<CombinationMatrix>,
    forced_weights: Option<CombinationMatrix>,
}

impl<'a> StepContext<'a> {
    /// `cfg` must already validate.
    pub fn new(cfg: &'a ScenarioConfig) -> Self {
        let n = cfg.n_agents();
        Self {
            cfg,
            log_lik: cfg.likelihoods.iter().map(LikelihoodModel::log_likelihood_columns).collect(),
            neighborhoods: cfg.graph.neighborhoods(),
            neighbors: (0..n).map(|k| cfg.graph.neighbors(k)).collect(),
            static_weights: cfg
                .algorithms
                .static_cooperative
                .then(|| cfg.static_weights_or_uniform()),
            forced_weights: None,
        }
    }

    /// Replaces the adaptive matrix by a fixed one at every step.
    pub fn with_forced_weights(mut self, weights: CombinationMatrix) -> Self {
        self.forced_weights = Some(weights);
        self
    }

    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    pub(crate) fn log_likelihood(&self, k: usize, obs: usize) -> &[f64] {
        &self.log_lik[k][obs]
    }
}

/// Draws `zeta_{k,i}` for every agent from its own stream.
pub fn draw_observations(cfg: &ScenarioConfig, streams: &mut AgentStreams) -> Vec<usize> {
    (0..cfg.n_agents())
        .map(|k| {
            sample_observation(&cfg.likelihoods[k], cfg.true_states[k], streams.get_mut(k))
                .expect("validated scenario has in-range true states")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<usize>,
    /// Combination matrix used by the cooperative step, when that step ran.
    pub weights: Option<CombinationMatrix>,
}

/// Draws one observation per agent and advances every enabled algorithm.
pub fn step_all(
    state: &mut NetworkState,
    ctx: &StepContext<'_>,
    streams: &mut AgentStreams,
) -> StepOutcome {
    let observations = draw_observations(ctx.cfg, streams);
    let order: Vec<usize> = (0..ctx.cfg.n_agents()).collect();
    let weights = step_with_observations(state, ctx, &observations, &order);
    StepOutcome { observations, weights }
}

/// Synchronous update of all agents on given observations.
///
/// `order` is the sequence in which agents are visited inside each phase;
/// every phase reads only the previous phase's outputs, so the result does not
/// depend on it.
pub fn step_with_observations(
    state: &mut NetworkState,
    ctx: &StepContext<'_>,
    observations: &[usize],
    order: &[usize],
) -> Option<CombinationMatrix> {
    let n = state.agents.len();
    let m = ctx.cfg.n_hypotheses();
    let flags = ctx.cfg.algorithms;

    // Adapt: psi from mu, then pi, both on the same observation.
    let mut psi: Vec<Option<BeliefVector>> = vec![None; n];
    let mut pi: Vec<Option<BeliefVector>> = vec![None; n];
    for &k in order {
        let log_lik = ctx.log_likelihood(k, observations[k]);
        if flags.sasl {
            psi[k] = Some(bayes_kernel(&state.agents[k].mu, log_lik));
        }
        pi[k] = Some(bayes_kernel(&state.agents[k].pi, log_lik));
    }
    let pi: Vec<BeliefVector> = pi.into_iter().map(|p| p.expect("every agent visited")).collect();

    let mut used = None;
    if flags.sasl {
        let psi: Vec<BeliefVector> = psi.into_iter().map(|p| p.expect("every agent visited")).collect();
        let a = match &ctx.forced_weights {
            Some(fixed) => fixed.clone(),
            None => weights::adaptive_matrix(&pi, &ctx.neighbors),
        };
        let mut mu: Vec<Option<BeliefVector>> = vec![None; n];
        for &k in order {
            let hood = ctx.neighborhood(k);
            mu[k] = Some(fuse(hood.iter().map(|&l| (&psi[l], a.get(l, k))), m));
        }
        for &k in order {
            let agent = &mut state.agents[k];
            agent.mu = mu[k].take().expect("every agent visited");
            agent.mu_bar = global_belief(&pi[k], &agent.mu, ctx.cfg.epsilon);
        }
        used = Some(a);
    }

    if let Some(a) = &ctx.static_weights {
        let mut phi: Vec<Option<BeliefVector>> = vec![None; n];
        for &k in order {
            let nu = state.agents[k].nu.as_ref().expect("baseline state present");
            phi[k] = Some(bayes_kernel(nu, ctx.log_likelihood(k, observations[k])));
        }
        let phi: Vec<BeliefVector> = phi.into_iter().map(|p| p.expect("every agent visited")).collect();
        for &k in order {
            let hood = ctx.neighborhood(k);
            state.agents[k].nu = Some(fuse(hood.iter().map(|&l| (&phi[l], a.get(l, k))), m));
        }
    }

    for (agent, p) in state.agents.iter_mut().zip(pi) {
        agent.pi = p;
    }
    used
}
