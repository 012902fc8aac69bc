use std::fmt;
use std::str::FromStr;

use crate::model::{
    AlgorithmFlags, CombinationMatrix, HypothesisSet, LikelihoodModel, NetworkGraph, ScenarioConfig,
    DEFAULT_EPSILON,
};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Every agent identifies its own hypothesis alone; agent `k` has true state `k`.
    DistinctStates,
    /// Two state groups, each with one fully informed agent and four partially blind ones.
    TwoGroups,
    /// Two partially informed agents; everyone else learns nothing locally.
    Unidentifiable,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::DistinctStates => "distinct-states",
            Variant::TwoGroups => "two-groups",
            Variant::Unidentifiable => "unidentifiable",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distinct-states" => Ok(Variant::DistinctStates),
            "two-groups" => Ok(Variant::TwoGroups),
            "unidentifiable" => Ok(Variant::Unidentifiable),
            other => Err(format!(
                "unknown variant {other:?} (expected distinct-states, two-groups or unidentifiable)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    /// Ten agents in two five-agent clusters joined by three bridges; see [`two_cluster_topology`].
    TwoClusters,
    Complete,
    Ring,
    Line,
    Custom(NetworkGraph),
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-clusters" => Ok(Topology::TwoClusters),
            "complete" => Ok(Topology::Complete),
            "ring" => Ok(Topology::Ring),
            "line" => Ok(Topology::Line),
            other => Err(format!(
                "unknown topology {other:?} (expected two-clusters, complete, ring or line)"
            )),
        }
    }
}

/// Edges (0-based) of the ten-agent preset. Agents 0..5 and 5..10 each form a
/// connected cluster with the same internal shape; the bridges are 0-5, 3-8 and 4-9.
pub const TWO_CLUSTER_EDGES: [(usize, usize); 15] = [
    (0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4),
    (5, 6), (5, 7), (6, 7), (6, 8), (7, 9), (8, 9),
    (0, 5), (3, 8), (4, 9),
];

pub fn two_cluster_topology() -> NetworkGraph {
    NetworkGraph::new(10, TWO_CLUSTER_EDGES)
}

fn build_graph(topology: &Topology, n: usize) -> Result<NetworkGraph, HarnessError> {
    let g = match topology {
        Topology::TwoClusters => {
            if n != 10 {
                return Err(HarnessError::Generator(format!(
                    "the two-clusters topology has 10 agents, requested {n}"
                )));
            }
            two_cluster_topology()
        }
        Topology::Complete => NetworkGraph::complete(n),
        Topology::Ring if n >= 3 => NetworkGraph::new(n, (0..n).map(|k| (k, (k + 1) % n))),
        Topology::Ring | Topology::Line => NetworkGraph::new(n, (1..n).map(|k| (k - 1, k))),
        Topology::Custom(g) => {
            if g.n_agents != n {
                return Err(HarnessError::Generator(format!(
                    "custom topology has {} agents, requested {n}",
                    g.n_agents
                )));
            }
            g.clone()
        }
    };
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub variant: Variant,
    pub n_agents: usize,
    pub n_hypotheses: usize,
    pub n_obs: usize,
    pub q: f64,
    pub topology: Topology,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            variant: Variant::DistinctStates,
            n_agents: 10,
            n_hypotheses: 10,
            n_obs: 10,
            q: 0.28,
            topology: Topology::TwoClusters,
            horizon: 1000,
            seed: 0,
        }
    }
}

/// Row `x` of the peaked model: `q` on observation `x`, the rest spread evenly.
fn peaked_row(x: usize, n_obs: usize, q: f64) -> Vec<f64> {
    let rest = (1.0 - q) / (n_obs as f64 - 1.0);
    (0..n_obs).map(|y| if y == x { q } else { rest }).collect()
}

fn flat_row(n_obs: usize) -> Vec<f64> {
    vec![1.0 / n_obs as f64; n_obs]
}

fn model(agent_id: usize, table: Vec<Vec<f64>>) -> LikelihoodModel {
    let alpha = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    LikelihoodModel { agent_id, alpha, table }
}

/// Builds one of the three ten-hypothesis experiment families.
///
/// Rows are "peaked" (probability `q` on the observation matching the
/// hypothesis) or flat (`1 / n_obs`). In the grouped variants agents 0-4 have
/// true state 0 and agents 5-9 true state 5.
pub fn generate_section5_scenario(p: &GeneratorParams) -> Result<ScenarioConfig, HarnessError> {
    let (n, m, z) = (p.n_agents, p.n_hypotheses, p.n_obs);
    if n == 0 {
        return Err(HarnessError::Generator("need at least one agent".into()));
    }
    if !(p.q > 0.0 && p.q < 1.0) {
        return Err(HarnessError::Generator(format!("q = {} must lie in (0, 1)", p.q)));
    }
    if m < 2 {
        return Err(HarnessError::Generator(format!("need at least 2 hypotheses, requested {m}")));
    }
    if z < m {
        return Err(HarnessError::Generator(format!(
            "peaked rows need at least as many observations as hypotheses ({z} < {m})"
        )));
    }
    let peaked = |x: usize| peaked_row(x, z, p.q);

    let (true_states, likelihoods): (Vec<usize>, Vec<LikelihoodModel>) = match p.variant {
        Variant::DistinctStates => {
            if m < n {
                return Err(HarnessError::Generator(format!(
                    "distinct states need at least as many hypotheses as agents ({m} < {n})"
                )));
            }
            let table: Vec<Vec<f64>> = (0..m).map(peaked).collect();
            ((0..n).collect(), (0..n).map(|k| model(k, table.clone())).collect())
        }
        Variant::TwoGroups | Variant::Unidentifiable => {
            if n != 10 || m != 10 {
                return Err(HarnessError::Generator(format!(
                    "{} requires 10 agents and 10 hypotheses, requested {n} and {m}",
                    p.variant
                )));
            }
            let full: Vec<Vec<f64>> = (0..m).map(peaked).collect();
            // Blind to hypotheses in `lo..hi`, peaked elsewhere.
            let blind = |lo: usize, hi: usize| -> Vec<Vec<f64>> {
                (0..m).map(|x| if (lo..hi).contains(&x) { flat_row(z) } else { peaked(x) }).collect()
            };
            let flat: Vec<Vec<f64>> = vec![flat_row(z); m];
            let tables: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|k| match (p.variant, k) {
                    (Variant::TwoGroups, 0 | 5) => full.clone(),
                    (Variant::TwoGroups, 1..=4) => blind(0, 5),
                    (Variant::TwoGroups, _) => blind(5, 10),
                    (_, 0 | 5) => blind(0, 5),
                    _ => flat.clone(),
                })
                .collect();
            let states = (0..n).map(|k| if k < 5 { 0 } else { 5 }).collect();
            (states, tables.into_iter().enumerate().map(|(k, t)| model(k, t)).collect())
        }
    };

    let graph = build_graph(&p.topology, n)?;
    let static_weights = Some(CombinationMatrix::uniform_over_neighborhoods(&graph));
    Ok(ScenarioConfig {
        hypotheses: HypothesisSet::numbered(m),
        graph,
        likelihoods,
        true_states,
        horizon: p.horizon,
        seed: p.seed,
        epsilon: DEFAULT_EPSILON,
        algorithms: AlgorithmFlags::default(),
        static_weights,
    })
}
