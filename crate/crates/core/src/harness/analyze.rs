use std::collections::BTreeSet;

use serde::Serialize;

use crate::asymptotics::{
    self, check_corollary_conditions, decompose, local_rate_constants, pair_rate_constants,
    subnetwork_confidence, CorollaryCheck, LocalRates, PairRates, SubnetworkConfidence, OBS_EQUIV_TOL,
};
use crate::model::{validate_scenario, ScenarioConfig};

use super::{equivalence_sets, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub agents: Vec<usize>,
    pub perron: Vec<f64>,
    pub perron_residual: f64,
    /// Largest difference between the power-iteration and direct-solve vectors.
    pub direct_solve_gap: f64,
}

/// Closed-form steady-state description of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub hypotheses: Vec<String>,
    pub equivalence_sets: Vec<BTreeSet<usize>>,
    /// `divergences[k][theta] = d_k(theta)`.
    pub divergences: Vec<Vec<f64>>,
    /// Limiting weights, entry `[l][k]` is the weight `k` gives `l`.
    pub limiting_matrix: Vec<Vec<f64>>,
    /// Same matrix as reduced fractions.
    pub limiting_matrix_exact: Vec<Vec<String>>,
    pub components: Vec<ComponentReport>,
    pub component_of: Vec<usize>,
    /// `lim (A_inf^T)^i`; entry `[k][l]` is the Perron weight of `l` in `k`'s block.
    pub limit_of_transposed_powers: Vec<Vec<f64>>,
    pub confidences: Vec<SubnetworkConfidence>,
    pub corollary: CorollaryCheck,
    /// `None` for agents with nothing to reject.
    pub local_rates: Vec<Option<LocalRates>>,
    pub pair_rates: Vec<PairRates>,
}

impl Analysis {
    /// Hypothesis each agent's block is predicted to settle on, when unique.
    pub fn predicted_consensus(&self, agent: usize) -> Option<usize> {
        let c = &self.confidences[self.component_of[agent]];
        (c.argmax.len() == 1).then(|| *c.argmax.iter().next().expect("non-empty"))
    }
}

pub fn analyze(cfg: &ScenarioConfig) -> Result<Analysis, HarnessError> {
    let violations = validate_scenario(cfg);
    if !violations.is_empty() {
        return Err(HarnessError::Invalid(violations));
    }
    let sets = equivalence_sets(cfg);
    let kls = asymptotics::divergence_table(cfg);
    let exact = asymptotics::limiting_matrix_exact(&sets, &cfg.graph);
    let a_inf = asymptotics::limiting_matrix(&sets, &cfg.graph);
    let decomposition = decompose(&a_inf)?;
    let confidences = subnetwork_confidence(&decomposition, &kls);
    let corollary = check_corollary_conditions(&sets, &cfg.graph, &cfg.true_states, &decomposition);
    let local_rates = cfg
        .likelihoods
        .iter()
        .zip(&cfg.true_states)
        .map(|(m, &t)| local_rate_constants(m, t, m.alpha, OBS_EQUIV_TOL).ok())
        .collect();
    let pair_rates = cfg
        .graph
        .edges
        .iter()
        .filter_map(|&[a, b]| {
            let (k, l) = (a.min(b), a.max(b));
            let alpha = cfg.likelihoods[k].alpha.min(cfg.likelihoods[l].alpha);
            pair_rate_constants(k, l, &sets, &kls, alpha).ok()
        })
        .collect();
    Ok(Analysis {
        hypotheses: cfg.hypotheses.labels.clone(),
        equivalence_sets: sets.sets.clone(),
        divergences: kls,
        limiting_matrix: a_inf.weights.clone(),
        limiting_matrix_exact: exact.iter().map(|r| r.iter().map(ToString::to_string).collect()).collect(),
        components: decomposition
            .components
            .iter()
            .map(|c| ComponentReport {
                agents: c.agents.clone(),
                perron: c.perron.clone(),
                perron_residual: c.residual,
                direct_solve_gap: c.direct_solve_gap,
            })
            .collect(),
        component_of: decomposition.component_of.clone(),
        limit_of_transposed_powers: decomposition.limit_of_powers.weights.clone(),
        confidences,
        corollary,
        local_rates,
        pair_rates,
    })
}
