//! Adaptive combination weights built from the agents' private beliefs.
//!
//! Agent `k` weights neighbor `l` by the posterior probability that both
//! agents are tracking the same hypothesis, `sum_theta pi_k(theta) pi_l(theta)`,
//! and itself by one; the column is then normalized by `sigma_k`.

use thiserror::Error;

use crate::model::{BeliefVector, CombinationMatrix, NetworkGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("normalizer sigma = {sigma} is below 1")]
    SigmaBelowOne { sigma: f64 },
}

/// Posterior probability that two agents share the same true state.
pub fn same_state_probability(pi_k: &BeliefVector, pi_l: &BeliefVector) -> f64 {
    pi_k.log_probs()
        .iter()
        .zip(pi_l.log_probs())
        .map(|(a, b)| (a + b).exp())
        .sum()
}

/// Contribution of hypothesis `theta` to the weight `k` assigns to `l`.
/// Summing over `theta` gives the off-diagonal adaptive weight.
pub fn state_specific_weight(
    pi_k: &BeliefVector,
    pi_l: &BeliefVector,
    theta: usize,
    sigma_k: f64,
) -> Result<f64, WeightError> {
    if !(sigma_k >= 1.0) {
        return Err(WeightError::SigmaBelowOne { sigma: sigma_k });
    }
    Ok((pi_k.log_prob(theta) + pi_l.log_prob(theta)).exp() / sigma_k)
}

/// Column `k` of the adaptive matrix together with its normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightColumn {
    pub weights: Vec<f64>,
    pub sigma: f64,
}

pub fn compute_weight_column(k: usize, pis: &[BeliefVector], graph: &NetworkGraph) -> WeightColumn {
    weight_column(k, pis, &graph.neighbors(k))
}

pub(crate) fn weight_column(k: usize, pis: &[BeliefVector], neighbors: &[usize]) -> WeightColumn {
    let mut weights = vec![0.0; pis.len()];
    let mut sigma = 1.0;
    for &l in neighbors {
        let p = same_state_probability(&pis[k], &pis[l]);
        weights[l] = p;
        sigma += p;
    }
    for &l in neighbors {
        weights[l] /= sigma;
    }
    weights[k] = 1.0 / sigma;
    WeightColumn { weights, sigma }
}

pub fn compute_adaptive_matrix(pis: &[BeliefVector], graph: &NetworkGraph) -> CombinationMatrix {
    let neighbors: Vec<Vec<usize>> = (0..graph.n_agents).map(|k| graph.neighbors(k)).collect();
    adaptive_matrix(pis, &neighbors)
}

pub(crate) fn adaptive_matrix(pis: &[BeliefVector], neighbors: &[Vec<usize>]) -> CombinationMatrix {
    let n = pis.len();
    let mut m = CombinationMatrix::zeros(n);
    for (k, nbrs) in neighbors.iter().enumerate() {
        let col = weight_column(k, pis, nbrs);
        for (l, w) in col.weights.into_iter().enumerate() {
            m.weights[l][k] = w;
        }
    }
    m
}
