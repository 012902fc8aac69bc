//! Domain types shared by every other module: hypotheses, likelihood tables,
//! graphs, beliefs, combination matrices and scenario configuration.
//!
//! Agents, hypotheses and observation symbols are dense zero-based indices.
//! Hypothesis labels only appear at the I/O boundary.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for "sums to one" checks on probability rows, beliefs and
/// matrix columns.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default global-belief threshold.
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("hypothesis index {state} out of range for {count} hypotheses")]
    StateOutOfRange { state: usize, count: usize },
    #[error("observation index {obs} out of range for alphabet of size {size}")]
    ObservationOutOfRange { obs: usize, size: usize },
    #[error("belief vector is empty")]
    EmptyBelief,
    #[error("belief entry {index} = {value} is not a probability")]
    InvalidBeliefEntry { index: usize, value: f64 },
    #[error("belief entries sum to {sum}, expected 1")]
    BeliefNotNormalized { sum: f64 },
    #[error("scenario file: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

// ---------------------------------------------------------------------------
// Hypotheses
// ---------------------------------------------------------------------------

/// Ordered, labelled set of candidate hypotheses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypothesisSet {
    pub labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self { labels: labels.into_iter().map(Into::into).collect() }
    }

    /// Labels `theta1..thetaM`.
    pub fn numbered(m: usize) -> Self {
        Self::new((1..=m).map(|i| format!("theta{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }
}

// ---------------------------------------------------------------------------
// Likelihoods
// ---------------------------------------------------------------------------

/// Likelihood table of one agent: `table[theta][zeta] = L_k(zeta | theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodModel {
    pub agent_id: usize,
    /// Lower bound on every entry of `table`.
    pub alpha: f64,
    pub table: Vec<Vec<f64>>,
}

impl LikelihoodModel {
    pub fn n_hypotheses(&self) -> usize {
        self.table.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    pub fn row(&self, theta: usize) -> &[f64] {
        &self.table[theta]
    }

    /// `log L(obs | theta)` for every hypothesis.
    pub fn log_likelihood_column(&self, obs: usize) -> Vec<f64> {
        self.table.iter().map(|row| row[obs].ln()).collect()
    }

    /// Log-likelihood columns for every observation symbol, indexed `[obs][theta]`.
    pub fn log_likelihood_columns(&self) -> Vec<Vec<f64>> {
        (0..self.alphabet_size()).map(|z| self.log_likelihood_column(z)).collect()
    }
}

/// Draws one observation from row `true_state` of `model`.
pub fn sample_observation<R: Rng + ?Sized>(
    model: &LikelihoodModel,
    true_state: usize,
    rng: &mut R,
) -> Result<usize, ModelError> {
    let row = model.table.get(true_state).ok_or(ModelError::StateOutOfRange {
        state: true_state,
        count: model.n_hypotheses(),
    })?;
    Ok(sample_categorical(row, rng))
}

/// Inverse-CDF draw. Rounding slack at the top of the CDF lands on the last symbol.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (z, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return z;
        }
    }
    row.len() - 1
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// One independent ChaCha stream per agent, keyed by `(seed, agent)`.
///
/// The stream id is the agent index, so adding agents to a scenario never
/// changes the draws of the agents already present.
#[derive(Debug, Clone)]
pub struct AgentStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl AgentStreams {
    pub fn new(seed: u64, n_agents: usize) -> Self {
        Self { rngs: (0..n_agents).map(|k| agent_stream(seed, k)).collect() }
    }

    pub fn get_mut(&mut self, agent: usize) -> &mut ChaCha8Rng {
        &mut self.rngs[agent]
    }
}

pub fn agent_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

/// Undirected agent graph. Each edge is stored once; self-inclusion in the
/// neighborhood is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkGraph {
    pub n_agents: usize,
    pub edges: Vec<[usize; 2]>,
}

impl NetworkGraph {
    /// Builds a graph, normalizing each pair to `[min, max]` and dropping
    /// duplicates and self-loops.
    pub fn new(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let set: BTreeSet<[usize; 2]> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| [a.min(b), a.max(b)])
            .collect();
        Self { n_agents, edges: set.into_iter().collect() }
    }

    pub fn empty(n_agents: usize) -> Self {
        Self { n_agents, edges: Vec::new() }
    }

    pub fn complete(n_agents: usize) -> Self {
        Self::new(n_agents, (0..n_agents).flat_map(|a| (a + 1..n_agents).map(move |b| (a, b))))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = [a.min(b), a.max(b)];
        self.edges.contains(&key)
    }

    /// `N*_k`: neighbors of `k` excluding `k`, ascending.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&[a, b]| match (a == k, b == k) {
                (true, false) => Some(b),
                (false, true) => Some(a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `N_k`: neighbors of `k` including `k`, ascending.
    pub fn neighborhood(&self, k: usize) -> Vec<usize> {
        let mut out = self.neighbors(k);
        let pos = out.binary_search(&k).unwrap_or_else(|p| p);
        out.insert(pos, k);
        out
    }

    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        (0..self.n_agents).map(|k| self.neighborhood(k)).collect()
    }
}

// ---------------------------------------------------------------------------
// Beliefs
// ---------------------------------------------------------------------------

/// Probability distribution over hypotheses, stored as normalized log
/// probabilities so that exponentially small beliefs never underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    log: Vec<f64>,
}

pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl BeliefVector {
    pub fn uniform(m: usize) -> Self {
        Self { log: vec![-(m as f64).ln(); m] }
    }

    pub fn point_mass(m: usize, theta: usize) -> Self {
        let mut log = vec![f64::NEG_INFINITY; m];
        log[theta] = 0.0;
        Self { log }
    }

    /// Validates and converts a linear probability vector. Zero entries are
    /// allowed and map to `-inf` in log space.
    pub fn from_probs(probs: &[f64]) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::EmptyBelief);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidBeliefEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::BeliefNotNormalized { sum });
        }
        Ok(Self { log: probs.iter().map(|p| p.ln()).collect() })
    }

    /// Normalizes unnormalized log weights. Returns `None` when no entry is
    /// finite (zero normalizer) or any entry is NaN / `+inf`.
    pub fn from_log_weights(mut log: Vec<f64>) -> Option<Self> {
        if log.is_empty() || log.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return None;
        }
        let norm = logsumexp(&log);
        if !norm.is_finite() {
            return None;
        }
        for x in &mut log {
            *x -= norm;
        }
        Some(Self { log })
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log
    }

    pub fn log_prob(&self, theta: usize) -> f64 {
        self.log[theta]
    }

    pub fn prob(&self, theta: usize) -> f64 {
        self.log[theta].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log.iter().map(|x| x.exp()).collect()
    }

    /// `log b(theta) - log b(other)`.
    pub fn log_ratio(&self, theta: usize, other: usize) -> f64 {
        self.log[theta] - self.log[other]
    }

    /// Index of the largest entry (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.log.iter().enumerate() {
            if x > self.log[best] {
                best = i;
            }
        }
        best
    }

    /// True when the materialized probabilities lie in `[0, 1]` and sum to one within `tol`.
    pub fn is_on_simplex(&self, tol: f64) -> bool {
        let probs = self.probs();
        probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
            && (probs.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

// ---------------------------------------------------------------------------
// Combination matrices
// ---------------------------------------------------------------------------

/// `N x N` weight matrix; `weights[l][k] = a_{lk}` is the weight agent `k`
/// assigns to agent `l`. Columns are the per-agent weightings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CombinationMatrix {
    pub weights: Vec<Vec<f64>>,
}

impl CombinationMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { weights: vec![vec![0.0; n]; n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.weights[k][k] = 1.0;
        }
        m
    }

    /// Uniform weights `1 / |N_k|` over each neighborhood.
    pub fn uniform_over_neighborhoods(graph: &NetworkGraph) -> Self {
        let mut m = Self::zeros(graph.n_agents);
        for k in 0..graph.n_agents {
            let hood = graph.neighborhood(k);
            let w = 1.0 / hood.len() as f64;
            for l in hood {
                m.weights[l][k] = w;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.weights[l][k]
    }

    pub fn set(&mut self, l: usize, k: usize, value: f64) {
        self.weights[l][k] = value;
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.weights.iter().map(|row| row[k]).collect()
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        self.weights.iter().map(|row| row[k]).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Checks the left-stochastic, support and positive-diagonal invariants
    /// against `graph`.
    pub fn violations(&self, graph: &NetworkGraph) -> Vec<Violation> {
        let n = graph.n_agents;
        let mut out = Vec::new();
        if self.weights.len() != n || self.weights.iter().any(|r| r.len() != n) {
            out.push(Violation::MatrixShape { expected: n });
            return out;
        }
        for k in 0..n {
            let hood = graph.neighborhood(k);
            for l in 0..n {
                let a = self.weights[l][k];
                if !a.is_finite() || a < 0.0 {
                    out.push(Violation::NegativeWeight { row: l, column: k, value: a });
                } else if a != 0.0 && hood.binary_search(&l).is_err() {
                    out.push(Violation::WeightOutsideNeighborhood { row: l, column: k, value: a });
                }
            }
            let sum = self.column_sum(k);
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::ColumnNotStochastic { column: k, sum });
            }
            if !(self.weights[k][k] > 0.0) {
                out.push(Violation::NonPositiveDiagonal { agent: k });
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Which algorithms a run executes on the shared observation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmFlags {
    pub non_cooperative: bool,
    pub static_cooperative: bool,
    pub sasl: bool,
}

impl Default for AlgorithmFlags {
    fn default() -> Self {
        Self { non_cooperative: true, static_cooperative: true, sasl: true }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Full description of one simulation scenario. Mirrors the JSON scenario
/// file field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub hypotheses: HypothesisSet,
    pub graph: NetworkGraph,
    pub likelihoods: Vec<LikelihoodModel>,
    pub true_states: Vec<usize>,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub algorithms: AlgorithmFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_weights: Option<CombinationMatrix>,
}

impl ScenarioConfig {
    pub fn n_agents(&self) -> usize {
        self.graph.n_agents
    }

    pub fn n_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    /// Static baseline weights: the configured matrix, or uniform over each
    /// neighborhood when none is given.
    pub fn static_weights_or_uniform(&self) -> CombinationMatrix {
        self.static_weights
            .clone()
            .unwrap_or_else(|| CombinationMatrix::uniform_over_neighborhoods(&self.graph))
    }
}

/// One broken invariant found by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("need at least 2 hypotheses, found {count}")]
    TooFewHypotheses { count: usize },
    #[error("duplicate hypothesis label {label:?}")]
    DuplicateLabel { label: String },
    #[error("expected {expected} likelihood models (one per agent), found {found}")]
    LikelihoodCount { expected: usize, found: usize },
    #[error("likelihood model at position {position} declares agent_id {agent_id}")]
    AgentIdMismatch { position: usize, agent_id: usize },
    #[error("agent {agent}: expected {expected} likelihood rows, found {found}")]
    RowCount { agent: usize, expected: usize, found: usize },
    #[error("agent {agent}: observation alphabet has {size} symbols, need at least 2")]
    AlphabetTooSmall { agent: usize, size: usize },
    #[error("agent {agent}, row {row}: expected {expected} entries, found {found}")]
    RaggedRow { agent: usize, row: usize, expected: usize, found: usize },
    #[error("agent {agent}, row {row}: entries sum to {sum}, expected 1")]
    RowNotNormalized { agent: usize, row: usize, sum: f64 },
    #[error("agent {agent}: alpha = {alpha} must be a positive finite number")]
    InvalidAlpha { agent: usize, alpha: f64 },
    #[error(
        "agent {agent}, row {row}, column {column}: entry {value} is below alpha = {alpha} \
         (full-support bound on likelihoods)"
    )]
    BelowAlpha { agent: usize, row: usize, column: usize, value: f64, alpha: f64 },
    #[error("edge {edge:?} references an agent outside 0..{n_agents}")]
    EdgeOutOfRange { edge: [usize; 2], n_agents: usize },
    #[error("edge {edge:?} is a self-loop")]
    SelfEdge { edge: [usize; 2] },
    #[error("edge {edge:?} is listed more than once")]
    DuplicateEdge { edge: [usize; 2] },
    #[error("expected {expected} true states, found {found}")]
    TrueStateCount { expected: usize, found: usize },
    #[error("agent {agent}: true state {state} is not a hypothesis index")]
    TrueStateOutOfRange { agent: usize, state: usize },
    #[error("epsilon = {epsilon} must lie in (0, 0.5]")]
    EpsilonOutOfRange { epsilon: f64 },
    #[error("static-cooperative baseline enabled but static_weights is missing")]
    MissingStaticWeights,
    #[error("combination matrix must be {expected} x {expected}")]
    MatrixShape { expected: usize },
    #[error("combination matrix entry ({row}, {column}) = {value} is negative or not finite")]
    NegativeWeight { row: usize, column: usize, value: f64 },
    #[error("combination matrix entry ({row}, {column}) = {value} is outside agent {column}'s neighborhood")]
    WeightOutsideNeighborhood { row: usize, column: usize, value: f64 },
    #[error("combination matrix column {column} sums to {sum}, expected 1")]
    ColumnNotStochastic { column: usize, sum: f64 },
    #[error("combination matrix diagonal entry of agent {agent} is not positive")]
    NonPositiveDiagonal { agent: usize },
}

/// Lists every broken invariant of `cfg`; empty means the scenario is valid.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = cfg.hypotheses.len();
    let n = cfg.graph.n_agents;

    if m < 2 {
        out.push(Violation::TooFewHypotheses { count: m });
    }
    let mut seen = BTreeSet::new();
    for label in &cfg.hypotheses.labels {
        if !seen.insert(label.as_str()) {
            out.push(Violation::DuplicateLabel { label: label.clone() });
        }
    }

    let mut seen_edges = BTreeSet::new();
    for &edge in &cfg.graph.edges {
        let [a, b] = edge;
        if a >= n || b >= n {
            out.push(Violation::EdgeOutOfRange { edge, n_agents: n });
        } else if a == b {
            out.push(Violation::SelfEdge { edge });
        } else if !seen_edges.insert([a.min(b), a.max(b)]) {
            out.push(Violation::DuplicateEdge { edge });
        }
    }

    if cfg.likelihoods.len() != n {
        out.push(Violation::LikelihoodCount { expected: n, found: cfg.likelihoods.len() });
    }
    for (position, model) in cfg.likelihoods.iter().enumerate() {
        out.extend(likelihood_violations(position, model, m));
    }

    if cfg.true_states.len() != n {
        out.push(Violation::TrueStateCount { expected: n, found: cfg.true_states.len() });
    }
    for (agent, &state) in cfg.true_states.iter().enumerate() {
        if state >= m {
            out.push(Violation::TrueStateOutOfRange { agent, state });
        }
    }

    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 0.5) {
        out.push(Violation::EpsilonOutOfRange { epsilon: cfg.epsilon });
    }

    if cfg.algorithms.static_cooperative {
        match &cfg.static_weights {
            None => out.push(Violation::MissingStaticWeights),
            Some(w) => out.extend(w.violations(&cfg.graph)),
        }
    } else if let Some(w) = &cfg.static_weights {
        out.extend(w.violations(&cfg.graph));
    }
    out
}

fn likelihood_violations(position: usize, model: &LikelihoodModel, m: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let agent = position;
    if model.agent_id != position {
        out.push(Violation::AgentIdMismatch { position, agent_id: model.agent_id });
    }
    if !(model.alpha > 0.0 && model.alpha.is_finite()) {
        out.push(Violation::InvalidAlpha { agent, alpha: model.alpha });
    }
    if model.table.len() != m {
        out.push(Violation::RowCount { agent, expected: m, found: model.table.len() });
    }
    let size = model.alphabet_size();
    if size < 2 {
        out.push(Violation::AlphabetTooSmall { agent, size });
    }
    for (row, probs) in model.table.iter().enumerate() {
        if probs.len() != size {
            out.push(Violation::RaggedRow { agent, row, expected: size, found: probs.len() });
            continue;
        }
        let sum: f64 = probs.iter().sum();
        if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
            out.push(Violation::RowNotNormalized { agent, row, sum });
        }
        for (column, &value) in probs.iter().enumerate() {
            if !(value >= model.alpha) {
                out.push(Violation::BelowAlpha { agent, row, column, value, alpha: model.alpha });
            }
        }
    }
    out
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} agents, {} hypotheses, {} edges, horizon {}, seed {}",
            self.n_agents(),
            self.n_hypotheses(),
            self.graph.edges.len(),
            self.horizon,
            self.seed
        )
    }
}
