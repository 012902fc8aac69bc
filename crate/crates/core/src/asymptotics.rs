//! Closed-form steady-state objects: observationally equivalent sets, the
//! limiting combination matrix, its block decomposition with Perron vectors,
//! sub-network confidences, the global-consistency conditions and the rate
//! constants that govern how fast false hypotheses are rejected.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{CombinationMatrix, LikelihoodModel, NetworkGraph, ScenarioConfig};

/// Default tolerance for treating two likelihood rows as identical.
pub const OBS_EQUIV_TOL: f64 = 1e-12;

/// Required accuracy of every Perron vector, as `||A p - p||_inf`.
pub const PERRON_RESIDUAL: f64 = 1e-12;

/// Maximum allowed disagreement between power iteration and the direct solve.
pub const PERRON_AGREEMENT: f64 = 1e-9;

/// Absolute tolerance used when collecting the arg-max set of a confidence.
pub const CONFIDENCE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("zero pattern is not symmetric at ({row}, {column})")]
    AsymmetricZeroPattern { row: usize, column: usize },
    #[error("power iteration on component {component} stalled at residual {residual:e}")]
    PerronNotConverged { component: usize, residual: f64 },
    #[error("power iteration and direct solve disagree by {gap:e} on component {component}")]
    PerronDisagreement { component: usize, gap: f64 },
    #[error("agent {agent} has no rejectable hypotheses")]
    NoRejectableHypotheses { agent: usize },
    #[error("agents {agent} and {neighbor} share every hypothesis; nothing to reject")]
    NoRejectablePair { agent: usize, neighbor: usize },
}

// ---------------------------------------------------------------------------
// Observational equivalence and divergences
// ---------------------------------------------------------------------------

/// Hypotheses whose likelihood row matches the true state's row within `tol`.
pub fn obs_equiv_set(model: &LikelihoodModel, true_state: usize, tol: f64) -> BTreeSet<usize> {
    let truth = model.row(true_state);
    let mut set: BTreeSet<usize> = (0..model.n_hypotheses())
        .filter(|&t| {
            model.row(t).iter().zip(truth).all(|(a, b)| (a - b).abs() <= tol)
        })
        .collect();
    set.insert(true_state);
    set
}

/// Per-agent observationally equivalent sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ObsEquivSets {
    pub sets: Vec<BTreeSet<usize>>,
}

impl ObsEquivSets {
    pub fn from_scenario(cfg: &ScenarioConfig, tol: f64) -> Self {
        Self {
            sets: cfg
                .likelihoods
                .iter()
                .zip(&cfg.true_states)
                .map(|(m, &t)| obs_equiv_set(m, t, tol))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, k: usize) -> &BTreeSet<usize> {
        &self.sets[k]
    }
}

/// `D_KL(L(. | theta_true) || L(. | theta))` in nats.
pub fn kl_divergence(model: &LikelihoodModel, theta_true: usize, theta: usize) -> f64 {
    model
        .row(theta_true)
        .iter()
        .zip(model.row(theta))
        .map(|(&p, &q)| if p == 0.0 { 0.0 } else { p * (p / q).ln() })
        .sum()
}

/// `d_k(theta)` for every agent and hypothesis: `table[k][theta]`.
pub fn divergence_table(cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    cfg.likelihoods
        .iter()
        .zip(&cfg.true_states)
        .map(|(m, &t)| (0..m.n_hypotheses()).map(|th| kl_divergence(m, t, th)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Limiting matrix
// ---------------------------------------------------------------------------

fn overlap(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> BigRational {
    let common = a.intersection(b).count();
    BigRational::new(BigInt::from(common), BigInt::from(a.len() * b.len()))
}

/// Limiting adaptive weights in exact rational arithmetic, `[l][k]`.
///
/// For neighbors `l` of `k`, with `eta = |S_k & S_l| / (|S_k| |S_l|)`:
/// `a_lk = eta_kl / (1 + sum_l' eta_kl')` and `a_kk = 1 / (1 + sum_l' eta_kl')`.
pub fn limiting_matrix_exact(sets: &ObsEquivSets, graph: &NetworkGraph) -> Vec<Vec<BigRational>> {
    let n = graph.n_agents;
    let mut out = vec![vec![BigRational::zero(); n]; n];
    for k in 0..n {
        let nbrs = graph.neighbors(k);
        let etas: Vec<BigRational> = nbrs.iter().map(|&l| overlap(sets.get(k), sets.get(l))).collect();
        let sigma = etas.iter().fold(BigRational::one(), |acc, e| acc + e);
        for (&l, eta) in nbrs.iter().zip(etas) {
            out[l][k] = eta / &sigma;
        }
        out[k][k] = BigRational::one() / sigma;
    }
    out
}

pub fn limiting_matrix(sets: &ObsEquivSets, graph: &NetworkGraph) -> CombinationMatrix {
    CombinationMatrix {
        weights: limiting_matrix_exact(sets, graph)
            .into_iter()
            .map(|row| row.iter().map(|r| r.to_f64().expect("finite rational")).collect())
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Decomposition and Perron vectors
// ---------------------------------------------------------------------------

/// One connected block of the limiting matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    /// Agents in the block, ascending.
    pub agents: Vec<usize>,
    /// The block restricted to `agents`, in the same order.
    pub block: CombinationMatrix,
    /// Perron vector of `block`: positive, sums to one, `block * p = p`.
    pub perron: Vec<f64>,
    /// `||block * p - p||_inf`.
    pub residual: f64,
    /// Largest entrywise gap between power iteration and the direct solve.
    pub direct_solve_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDecomposition {
    pub components: Vec<Component>,
    /// `component_of[k]` is the index of agent `k`'s block.
    pub component_of: Vec<usize>,
    /// Limit of `(A^T)^t`: row `k` carries the block Perron vector of `k`'s
    /// block in that block's columns.
    pub limit_of_powers: CombinationMatrix,
}

impl ComponentDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn decompose(a: &CombinationMatrix) -> Result<ComponentDecomposition, AsymptoticsError> {
    let n = a.n();
    if a.weights.iter().any(|r| r.len() != n) {
        return Err(AsymptoticsError::NotSquare);
    }
    for l in 0..n {
        for k in (l + 1)..n {
            if (a.get(l, k) > 0.0) != (a.get(k, l) > 0.0) {
                return Err(AsymptoticsError::AsymmetricZeroPattern { row: l, column: k });
            }
        }
    }

    // Connected components of the positive off-diagonal pattern.
    let mut component_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        component_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if v != u && component_of[v] == usize::MAX && a.get(u, v) > 0.0 {
                    component_of[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }

    let mut limit = CombinationMatrix::zeros(n);
    let mut components = Vec::with_capacity(groups.len());
    for (id, agents) in groups.into_iter().enumerate() {
        let block = CombinationMatrix {
            weights: agents.iter().map(|&l| agents.iter().map(|&k| a.get(l, k)).collect()).collect(),
        };
        let perron = power_iteration(&block)
            .map_err(|residual| AsymptoticsError::PerronNotConverged { component: id, residual })?;
        let direct = direct_perron(&block);
        let direct_solve_gap =
            perron.iter().zip(&direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if !(direct_solve_gap <= PERRON_AGREEMENT) {
            return Err(AsymptoticsError::PerronDisagreement { component: id, gap: direct_solve_gap });
        }
        let residual = perron_residual(&block, &perron);
        for &k in &agents {
            for (j, &l) in agents.iter().enumerate() {
                limit.set(k, l, perron[j]);
            }
        }
        components.push(Component { agents, block, perron, residual, direct_solve_gap });
    }
    Ok(ComponentDecomposition { components, component_of, limit_of_powers: limit })
}

fn mat_vec(a: &CombinationMatrix, p: &[f64]) -> Vec<f64> {
    a.weights.iter().map(|row| row.iter().zip(p).map(|(x, y)| x * y).sum()).collect()
}

pub fn perron_residual(block: &CombinationMatrix, p: &[f64]) -> f64 {
    mat_vec(block, p).iter().zip(p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Power iteration `p <- A p` from the uniform vector. Runs until the
/// residual stops improving, then requires it to be below [`PERRON_RESIDUAL`].
fn power_iteration(block: &CombinationMatrix) -> Result<Vec<f64>, f64> {
    const MAX_ITERS: usize = 1_000_000;
    const PATIENCE: usize = 64;
    let n = block.n();
    let mut p = vec![1.0 / n as f64; n];
    let mut best = f64::INFINITY;
    let mut best_p = p.clone();
    let mut stale = 0;
    for _ in 0..MAX_ITERS {
        let mut next = mat_vec(block, &p);
        let s: f64 = next.iter().sum();
        for x in &mut next {
            *x /= s;
        }
        let residual = next.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        p = next;
        if residual < best {
            best = residual;
            best_p.clone_from(&p);
            stale = 0;
        } else {
            stale += 1;
        }
        if best == 0.0 || (best < PERRON_RESIDUAL && stale >= PATIENCE) {
            break;
        }
    }
    let residual = perron_residual(block, &best_p);
    if residual < PERRON_RESIDUAL {
        Ok(best_p)
    } else {
        Err(residual)
    }
}

/// Solves `(A - I) p = 0` with `sum p = 1` by replacing the last equation.
fn direct_perron(block: &CombinationMatrix) -> Vec<f64> {
    let n = block.n();
    let mut m = DMatrix::<f64>::from_fn(n, n, |r, c| block.get(r, c) - if r == c { 1.0 } else { 0.0 });
    for c in 0..n {
        m[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    match m.lu().solve(&rhs) {
        Some(p) => p.iter().copied().collect(),
        None => vec![f64::NAN; n],
    }
}

// ---------------------------------------------------------------------------
// Confidence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubnetworkConfidence {
    pub component: usize,
    /// `C_s(theta) = -sum_k p_s(k) d_k(theta)`.
    pub confidence: Vec<f64>,
    /// Hypotheses attaining the maximum confidence (ties kept).
    pub argmax: BTreeSet<usize>,
}

/// `kls[k][theta] = d_k(theta)`.
pub fn subnetwork_confidence(
    decomposition: &ComponentDecomposition,
    kls: &[Vec<f64>],
) -> Vec<SubnetworkConfidence> {
    decomposition
        .components
        .iter()
        .enumerate()
        .map(|(component, comp)| {
            let m = kls.get(comp.agents[0]).map_or(0, Vec::len);
            let confidence: Vec<f64> = (0..m)
                .map(|t| {
                    -comp.agents.iter().zip(&comp.perron).map(|(&k, &p)| p * kls[k][t]).sum::<f64>()
                })
                .collect();
            let best = confidence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let argmax = (0..m).filter(|&t| best - confidence[t] <= CONFIDENCE_TIE_TOL).collect();
            SubnetworkConfidence { component, confidence, argmax }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Global consistency conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntersectionWitness {
    pub component: usize,
    pub agent: usize,
    pub true_state: usize,
    /// Intersection of the block's equivalent sets.
    pub intersection: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorollaryCheck {
    /// Neighbors with different true states have disjoint equivalent sets.
    pub c1: bool,
    /// Neighbor pairs `[k, l]` (`k < l`) with different true states and overlapping sets.
    pub c1_witnesses: Vec<[usize; 2]>,
    /// Every block's intersection of equivalent sets is exactly each member's true state.
    pub c2: bool,
    pub c2_witnesses: Vec<IntersectionWitness>,
    pub globally_consistent: bool,
}

pub fn check_corollary_conditions(
    sets: &ObsEquivSets,
    graph: &NetworkGraph,
    true_states: &[usize],
    decomposition: &ComponentDecomposition,
) -> CorollaryCheck {
    let c1_witnesses: Vec<[usize; 2]> = graph
        .edges
        .iter()
        .map(|&[a, b]| [a.min(b), a.max(b)])
        .filter(|&[k, l]| {
            true_states[k] != true_states[l] && !sets.get(k).is_disjoint(sets.get(l))
        })
        .collect();

    let mut c2_witnesses = Vec::new();
    for (component, comp) in decomposition.components.iter().enumerate() {
        let mut members = comp.agents.iter().map(|&k| sets.get(k));
        let first = members.next().cloned().unwrap_or_default();
        let intersection: BTreeSet<usize> =
            members.fold(first, |acc, s| acc.intersection(s).copied().collect());
        for &agent in &comp.agents {
            let truth = true_states[agent];
            if intersection.len() != 1 || !intersection.contains(&truth) {
                c2_witnesses.push(IntersectionWitness {
                    component,
                    agent,
                    true_state: truth,
                    intersection: intersection.clone(),
                });
            }
        }
    }
    let c1 = c1_witnesses.is_empty();
    let c2 = c2_witnesses.is_empty();
    CorollaryCheck { c1, c1_witnesses, c2, c2_witnesses, globally_consistent: c1 && c2 }
}

// ---------------------------------------------------------------------------
// Rate constants
// ---------------------------------------------------------------------------

/// Exponents bounding how fast a private belief rejects false hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalRates {
    /// `-(1/2) min d_k(theta)` over rejectable `theta`: beliefs fall below `exp(x i)`.
    pub x: f64,
    /// `min d_k(theta)^2 / (8 log^2 alpha)`, reported as a positive decay rate.
    pub y: f64,
    pub min_divergence: f64,
}

/// Exponents for the state-specific weight between two neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRates {
    pub agent: usize,
    pub neighbor: usize,
    /// `(1/2) min over theta outside both sets of (d_k + d_l)`.
    pub c: f64,
    /// `min (d_k^2 + d_l^2) / (32 log^2 alpha)`.
    pub d: f64,
}

pub fn local_rate_constants(
    model: &LikelihoodModel,
    true_state: usize,
    alpha: f64,
    tol: f64,
) -> Result<LocalRates, AsymptoticsError> {
    let equiv = obs_equiv_set(model, true_state, tol);
    let min_divergence = (0..model.n_hypotheses())
        .filter(|t| !equiv.contains(t))
        .map(|t| kl_divergence(model, true_state, t))
        .fold(f64::INFINITY, f64::min);
    if !min_divergence.is_finite() {
        return Err(AsymptoticsError::NoRejectableHypotheses { agent: model.agent_id });
    }
    let log_alpha = alpha.ln();
    Ok(LocalRates {
        x: -0.5 * min_divergence,
        y: min_divergence.powi(2) / (8.0 * log_alpha * log_alpha),
        min_divergence,
    })
}

/// Pair constants for agents `k` and `l`; `alpha` is the shared likelihood floor.
pub fn pair_rate_constants(
    k: usize,
    l: usize,
    sets: &ObsEquivSets,
    kls: &[Vec<f64>],
    alpha: f64,
) -> Result<PairRates, AsymptoticsError> {
    let shared: BTreeSet<usize> = sets.get(k).intersection(sets.get(l)).copied().collect();
    let m = kls[k].len();
    let outside: Vec<usize> = (0..m).filter(|t| !shared.contains(t)).collect();
    if outside.is_empty() {
        return Err(AsymptoticsError::NoRejectablePair { agent: k, neighbor: l });
    }
    let c = 0.5 * outside.iter().map(|&t| kls[k][t] + kls[l][t]).fold(f64::INFINITY, f64::min);
    let sq = outside
        .iter()
        .map(|&t| kls[k][t].powi(2) + kls[l][t].powi(2))
        .fold(f64::INFINITY, f64::min);
    let log_alpha = alpha.ln();
    Ok(PairRates { agent: k, neighbor: l, c, d: sq / (32.0 * log_alpha * log_alpha) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq30_rows(m: usize, q: f64) -> Vec<Vec<f64>> {
        let off = (1.0 - q) / (m as f64 - 1.0);
        (0..m).map(|x| (0..m).map(|y| if x == y { q } else { off }).collect()).collect()
    }

    fn model(table: Vec<Vec<f64>>) -> LikelihoodModel {
        let alpha = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        LikelihoodModel { agent_id: 0, alpha, table }
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn equivalence_sets_for_generator_models() {
        let distinct = model(eq30_rows(10, 0.28));
        assert_eq!(obs_equiv_set(&distinct, 3, OBS_EQUIV_TOL), set(&[3]));
        let flat = model(vec![vec![0.1; 10]; 10]);
        assert_eq!(obs_equiv_set(&flat, 0, OBS_EQUIV_TOL), (0..10).collect());
        let mut mixed = eq30_rows(10, 0.28);
        for row in mixed.iter_mut().take(5) {
            *row = vec![0.1; 10];
        }
        assert_eq!(obs_equiv_set(&model(mixed), 0, OBS_EQUIV_TOL), set(&[0, 1, 2, 3, 4]));
    }

    #[test]
    fn kl_values() {
        let m = model(eq30_rows(10, 0.28));
        assert_eq!(kl_divergence(&m, 2, 2), 0.0);
        // 0.28 ln(0.28/0.08) + 0.08 ln(0.08/0.28) = 0.2 ln 3.5
        assert!((kl_divergence(&m, 0, 1) - 0.250_552_593_699_073_6).abs() < 1e-12);
        let mut t = eq30_rows(10, 0.28);
        t[1] = vec![0.1; 10];
        let against_flat = model(t);
        assert!((kl_divergence(&against_flat, 0, 1) - 0.127_630_079_864_493_26).abs() < 1e-12);
        let two = model(vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert!((kl_divergence(&two, 0, 1) - 0.8 * 9f64.ln()).abs() < 1e-12);
    }

    fn triangle() -> NetworkGraph {
        NetworkGraph::complete(3)
    }

    #[test]
    fn limiting_matrix_triangle_example() {
        let sets = ObsEquivSets { sets: vec![set(&[0, 1]), set(&[1]), set(&[2])] };
        let exact = limiting_matrix_exact(&sets, &triangle());
        let expect = [[rat(2, 3), rat(1, 3), rat(0, 1)], [rat(1, 3), rat(2, 3), rat(0, 1)], [
            rat(0, 1),
            rat(0, 1),
            rat(1, 1),
        ]];
        for l in 0..3 {
            for k in 0..3 {
                assert_eq!(exact[l][k], expect[l][k], "({l},{k})");
            }
        }
        let a = limiting_matrix(&sets, &triangle());
        assert!(a.violations(&triangle()).is_empty());
    }

    #[test]
    fn limiting_matrix_disjoint_sets_is_identity() {
        let sets = ObsEquivSets { sets: vec![set(&[0]), set(&[1]), set(&[2])] };
        assert_eq!(limiting_matrix(&sets, &triangle()), CombinationMatrix::identity(3));
    }

    #[test]
    fn limiting_matrix_uninformed_hub() {
        let sets = ObsEquivSets { sets: vec![set(&[0, 1, 2]), set(&[1]), set(&[2])] };
        let exact = limiting_matrix_exact(&sets, &triangle());
        assert_eq!(exact[0][0], rat(3, 5));
        assert_eq!(exact[1][0], rat(1, 5));
        assert_eq!(exact[2][0], rat(1, 5));
        assert_eq!(exact[0][1], rat(1, 4));
        assert_eq!(exact[1][1], rat(3, 4));
        assert_eq!(exact[2][1], rat(0, 1));
        assert_eq!(exact[0][2], rat(1, 4));
        assert_eq!(exact[2][2], rat(3, 4));
    }

    #[test]
    fn decompose_triangle_example() {
        let sets = ObsEquivSets { sets: vec![set(&[0, 1]), set(&[1]), set(&[2])] };
        let d = decompose(&limiting_matrix(&sets, &triangle())).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.components[0].agents, vec![0, 1]);
        assert_eq!(d.components[1].agents, vec![2]);
        assert!((d.components[0].perron[0] - 0.5).abs() < 1e-12);
        assert!((d.components[0].perron[1] - 0.5).abs() < 1e-12);
        assert_eq!(d.components[1].perron, vec![1.0]);
        let expect = [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]];
        for k in 0..3 {
            for l in 0..3 {
                assert!((d.limit_of_powers.get(k, l) - expect[k][l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_identity() {
        let d = decompose(&CombinationMatrix::identity(4)).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.components.iter().all(|c| c.perron == vec![1.0]));
    }

    #[test]
    fn decompose_uninformed_hub_perron() {
        let sets = ObsEquivSets { sets: vec![set(&[0, 1, 2]), set(&[1]), set(&[2])] };
        let d = decompose(&limiting_matrix(&sets, &triangle())).unwrap();
        assert_eq!(d.len(), 1);
        let expect = [5.0 / 13.0, 4.0 / 13.0, 4.0 / 13.0];
        for (p, e) in d.components[0].perron.iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!(d.components[0].residual < 1e-12);
    }

    #[test]
    fn decompose_rejects_asymmetric_pattern() {
        let a = CombinationMatrix { weights: vec![vec![1.0, 0.5], vec![0.0, 0.5]] };
        assert_eq!(decompose(&a), Err(AsymptoticsError::AsymmetricZeroPattern { row: 0, column: 1 }));
    }

    #[test]
    fn limit_of_powers_matches_repeated_multiplication() {
        let sets = ObsEquivSets { sets: vec![set(&[0, 1, 2]), set(&[1]), set(&[2])] };
        let a = limiting_matrix(&sets, &triangle());
        let d = decompose(&a).unwrap();
        // Oracle: (A^T)^t by repeated squaring.
        let at = DMatrix::from_fn(3, 3, |r, c| a.get(c, r));
        let mut pow = at.clone();
        for _ in 0..12 {
            pow = &pow * &pow;
        }
        for r in 0..3 {
            for c in 0..3 {
                assert!((pow[(r, c)] - d.limit_of_powers.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn confidence_of_shared_truth_block_is_zero() {
        let d = decompose(&CombinationMatrix {
            weights: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        })
        .unwrap();
        let kls = vec![vec![0.0, 0.3], vec![0.0, 0.0]];
        let c = subnetwork_confidence(&d, &kls);
        assert_eq!(c[0].confidence[0], 0.0);
        assert!((c[0].confidence[1] + 0.15).abs() < 1e-15);
        assert_eq!(c[0].argmax, set(&[0]));
    }

    #[test]
    fn confidence_ties_are_kept() {
        let d = decompose(&CombinationMatrix::identity(1)).unwrap();
        let c = subnetwork_confidence(&d, &[vec![0.0, 0.0, 0.4]]);
        assert_eq!(c[0].argmax, set(&[0, 1]));
    }

    #[test]
    fn corollary_conditions() {
        let g = triangle();
        let truths = [1, 1, 2];
        let good = ObsEquivSets { sets: vec![set(&[0, 1]), set(&[1]), set(&[2])] };
        let d = decompose(&limiting_matrix(&good, &g)).unwrap();
        let check = check_corollary_conditions(&good, &g, &truths, &d);
        assert!(check.c1 && check.c2 && check.globally_consistent);

        let bad = ObsEquivSets { sets: vec![set(&[0, 1, 2]), set(&[1]), set(&[2])] };
        let d = decompose(&limiting_matrix(&bad, &g)).unwrap();
        let check = check_corollary_conditions(&bad, &g, &truths, &d);
        assert!(!check.c1 && !check.c2 && !check.globally_consistent);
        assert_eq!(check.c1_witnesses, vec![[0, 2]]);
        assert_eq!(check.c2_witnesses.len(), 3);
        assert!(check.c2_witnesses[0].intersection.is_empty());

        let lone = ObsEquivSets { sets: vec![set(&[0])] };
        let g1 = NetworkGraph::empty(1);
        let d = decompose(&limiting_matrix(&lone, &g1)).unwrap();
        assert!(check_corollary_conditions(&lone, &g1, &[0], &d).globally_consistent);
    }

    #[test]
    fn rate_constants() {
        let m = model(eq30_rows(10, 0.28));
        let r = local_rate_constants(&m, 0, m.alpha, OBS_EQUIV_TOL).unwrap();
        assert!((r.x + 0.125_276_296_849_536_8).abs() < 1e-12);
        let la = m.alpha.ln();
        assert!((r.y - 0.250_552_593_699_073_6f64.powi(2) / (8.0 * la * la)).abs() < 1e-15);
        assert!(r.y > 0.0);

        let flat = model(vec![vec![0.5, 0.5]; 2]);
        assert_eq!(
            local_rate_constants(&flat, 0, 0.5, OBS_EQUIV_TOL),
            Err(AsymptoticsError::NoRejectableHypotheses { agent: 0 })
        );

        let sets = ObsEquivSets { sets: vec![set(&[0]), set(&[0])] };
        let kls: Vec<Vec<f64>> = (0..2).map(|_| (0..10).map(|t| kl_divergence(&m, 0, t)).collect()).collect();
        let p = pair_rate_constants(0, 1, &sets, &kls, m.alpha).unwrap();
        assert!((p.c - 0.250_552_593_699_073_6).abs() < 1e-12);

        let all = ObsEquivSets { sets: vec![(0..10).collect(), (0..10).collect()] };
        assert!(pair_rate_constants(0, 1, &all, &kls, m.alpha).is_err());
    }
}
