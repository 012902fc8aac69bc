use crate::dynamics::{bayes_kernel, fuse};
use crate::model::{BeliefVector, CombinationMatrix, ScenarioConfig};

use super::{HarnessError, ThinPolicy, TrajectoryRecord};

/// Log-linear recursion with the weights frozen at their limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub steps: Vec<(usize, Vec<BeliefVector>)>,
}

/// Replays `observations` through fixed combination weights `a_inf`,
/// starting from uniform beliefs. `observations[i - 1][k]` is agent `k`'s draw at step `i`.
pub fn run_steady_state_reference(
    cfg: &ScenarioConfig,
    a_inf: &CombinationMatrix,
    observations: &[Vec<usize>],
    thin: ThinPolicy,
) -> Result<ReferenceTrajectory, HarnessError> {
    let n = cfg.n_agents();
    let m = cfg.n_hypotheses();
    if a_inf.n() != n || a_inf.weights.iter().any(|r| r.len() != n) {
        return Err(HarnessError::DimensionMismatch(format!(
            "weight matrix is {}x? but the scenario has {n} agents",
            a_inf.n()
        )));
    }
    let tables: Vec<Vec<Vec<f64>>> = cfg.likelihoods.iter().map(|l| l.log_likelihood_columns()).collect();
    for (i, row) in observations.iter().enumerate() {
        if row.len() != n {
            return Err(HarnessError::DimensionMismatch(format!(
                "step {} has {} observations for {n} agents",
                i + 1,
                row.len()
            )));
        }
        for (k, &z) in row.iter().enumerate() {
            if z >= tables[k].len() {
                return Err(HarnessError::DimensionMismatch(format!(
                    "step {}: observation {z} of agent {k} is outside its alphabet",
                    i + 1
                )));
            }
        }
    }
    let horizon = observations.len();
    let mut mu = vec![BeliefVector::uniform(m); n];
    let mut steps = Vec::new();
    for (i, row) in observations.iter().enumerate() {
        let psi: Vec<BeliefVector> = (0..n).map(|k| bayes_kernel(&mu[k], &tables[k][row[k]])).collect();
        mu = (0..n)
            .map(|k| fuse((0..n).map(|l| (&psi[l], a_inf.get(l, k))), m))
            .collect();
        let step = i + 1;
        if thin.keeps(step, horizon) {
            steps.push((step, mu.clone()));
        }
    }
    Ok(ReferenceTrajectory { steps })
}

/// `(step, max_k max_{theta, theta'} |lambda - lambda^c|)` at steps present in both records,
/// comparing the adaptive scheme's cooperative belief with the reference.
pub fn tracking_gap(run: &TrajectoryRecord, reference: &ReferenceTrajectory) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut j = 0;
    for rec in &run.steps {
        let Some(mu) = rec.mu.as_ref() else { continue };
        while j < reference.steps.len() && reference.steps[j].0 < rec.step {
            j += 1;
        }
        let Some((step, mu_c)) = reference.steps.get(j) else { break };
        if *step != rec.step {
            continue;
        }
        let gap = mu
            .iter()
            .zip(mu_c)
            .map(|(a, b)| {
                let (lo, hi) = a
                    .log_probs()
                    .iter()
                    .zip(b.log_probs())
                    .map(|(x, y)| x - y)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
                hi - lo
            })
            .fold(0.0, f64::max);
        out.push((rec.step, gap));
    }
    out
}
