#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sasl_core::asymptotics::{
    check_corollary_conditions, decompose, divergence_table, limiting_matrix, perron_residual,
    subnetwork_confidence, ObsEquivSets, OBS_EQUIV_TOL,
};
use sasl_core::dynamics::{social_combine, step_with_observations, NetworkState, StepContext};
use sasl_core::harness::{monte_carlo_seeds, run_scenario, RunOptions, ThinPolicy};
use sasl_core::model::sample_observation;
use sasl_core::weights::compute_adaptive_matrix;
use sasl_core::{
    AlgorithmFlags, BeliefVector, CombinationMatrix, HypothesisSet, LikelihoodModel, NetworkGraph,
    ScenarioConfig,
};

fn row(z: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, z).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn graph(n: usize) -> impl Strategy<Value = NetworkGraph> {
    prop::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
        let edges = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).filter(|&(a, b)| bits[a * n + b]);
        NetworkGraph::new(n, edges)
    })
}

/// Agent model whose rows come from a small pool, so several hypotheses can be
/// observationally equivalent.
fn pooled_model(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=6, 1usize..=m).prop_flat_map(move |(z, pool)| {
        (prop::collection::vec(row(z), pool), prop::collection::vec(0..pool, m))
            .prop_map(|(rows, pick)| pick.into_iter().map(|i| rows[i].clone()).collect())
    })
}

fn scenario(max_n: usize, max_m: usize, horizon: usize) -> impl Strategy<Value = ScenarioConfig> {
    (1..=max_n, 2..=max_m).prop_flat_map(move |(n, m)| {
        (
            graph(n),
            prop::collection::vec(pooled_model(m), n),
            prop::collection::vec(0..m, n),
            any::<u64>(),
        )
            .prop_map(move |(graph, tables, true_states, seed)| {
                let likelihoods = tables
                    .into_iter()
                    .enumerate()
                    .map(|(k, table)| {
                        let alpha = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                        LikelihoodModel { agent_id: k, alpha, table }
                    })
                    .collect();
                let static_weights = Some(CombinationMatrix::uniform_over_neighborhoods(&graph));
                ScenarioConfig {
                    hypotheses: HypothesisSet::numbered(m),
                    graph,
                    likelihoods,
                    true_states,
                    horizon,
                    seed,
                    epsilon: 1e-3,
                    algorithms: AlgorithmFlags::default(),
                    static_weights,
                }
            })
    })
}

fn belief(m: usize) -> impl Strategy<Value = BeliefVector> {
    prop::collection::vec(-680.0f64..0.0, m).prop_map(|l| BeliefVector::from_log_weights(l).unwrap())
}

fn every_step() -> RunOptions {
    RunOptions { thin: ThinPolicy::every_step(), ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_json_round_trip(cfg in scenario(6, 5, 100)) {
        let back = ScenarioConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn graph_neighbors_are_symmetric(g in (1usize..=8).prop_flat_map(graph)) {
        for k in 0..g.n_agents {
            for l in g.neighbors(k) {
                prop_assert!(g.neighbors(l).contains(&k));
                prop_assert!(l != k);
            }
        }
    }

    #[test]
    fn adaptive_columns_are_stochastic_with_bounded_diagonal(
        (g, pis) in (1usize..=6, 2usize..=5).prop_flat_map(|(n, m)| (graph(n), prop::collection::vec(belief(m), n)))
    ) {
        let a = compute_adaptive_matrix(&pis, &g);
        prop_assert!(a.violations(&g).is_empty());
        for k in 0..g.n_agents {
            prop_assert!((a.column_sum(k) - 1.0).abs() <= 1e-12);
            prop_assert!(a.get(k, k) >= 1.0 / (1.0 + g.neighbors(k).len() as f64) - 1e-15);
        }
    }

    #[test]
    fn fusion_stays_positive(
        (psis, w) in (2usize..=6, 1usize..=6).prop_flat_map(|(m, n)| (
            prop::collection::vec(belief(m), n),
            prop::collection::vec(0.0f64..1.0, n),
        ))
    ) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 1e-6);
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let refs: Vec<&BeliefVector> = psis.iter().collect();
        let mu = social_combine(&refs, &w).unwrap();
        for p in mu.probs() {
            prop_assert!(p > 0.0 && p.is_finite());
        }
    }

    #[test]
    fn limiting_matrix_invariants(cfg in scenario(6, 5, 1)) {
        let sets = ObsEquivSets::from_scenario(&cfg, OBS_EQUIV_TOL);
        let a = limiting_matrix(&sets, &cfg.graph);
        prop_assert!(a.violations(&cfg.graph).is_empty());
        for l in 0..a.n() {
            for k in 0..a.n() {
                prop_assert_eq!(a.get(l, k) > 0.0, a.get(k, l) > 0.0);
            }
        }
        let d = decompose(&a).unwrap();
        for c in &d.components {
            prop_assert!(c.perron.iter().all(|&p| p > 0.0));
            prop_assert!(perron_residual(&c.block, &c.perron) < 1e-10);
            prop_assert!(c.direct_solve_gap <= 1e-9);
        }
    }

    #[test]
    fn zero_confidence_iff_in_block_intersection(cfg in scenario(6, 5, 1)) {
        let sets = ObsEquivSets::from_scenario(&cfg, OBS_EQUIV_TOL);
        let d = decompose(&limiting_matrix(&sets, &cfg.graph)).unwrap();
        let conf = subnetwork_confidence(&d, &divergence_table(&cfg));
        for (c, comp) in conf.iter().zip(&d.components) {
            let mut members = comp.agents.iter().map(|&k| sets.get(k).clone());
            let first = members.next().unwrap();
            let inter: BTreeSet<usize> = members.fold(first, |acc, s| &acc & &s);
            for (theta, &value) in c.confidence.iter().enumerate() {
                prop_assert_eq!(value.abs() <= 1e-12, inter.contains(&theta), "theta {} C {}", theta, value);
            }
        }
    }

    #[test]
    fn disjoint_sets_keep_blocks_pure(cfg in scenario(6, 5, 1)) {
        let sets = ObsEquivSets::from_scenario(&cfg, OBS_EQUIV_TOL);
        let d = decompose(&limiting_matrix(&sets, &cfg.graph)).unwrap();
        let check = check_corollary_conditions(&sets, &cfg.graph, &cfg.true_states, &d);
        if check.c1 {
            for comp in &d.components {
                let states: BTreeSet<usize> = comp.agents.iter().map(|&k| cfg.true_states[k]).collect();
                prop_assert_eq!(states.len(), 1);
            }
        }
    }

    #[test]
    fn step_order_does_not_matter(cfg in scenario(6, 5, 20), order_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let ctx = StepContext::new(&cfg);
        let mut a = NetworkState::initial(&cfg);
        let mut b = a.clone();
        let n = cfg.n_agents();
        let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
        let mut streams = sasl_core::AgentStreams::new(cfg.seed, n);
        for _ in 0..cfg.horizon {
            let obs = sasl_core::dynamics::draw_observations(&cfg, &mut streams);
            let identity: Vec<usize> = (0..n).collect();
            let mut shuffled = identity.clone();
            shuffled.shuffle(&mut rng);
            let wa = step_with_observations(&mut a, &ctx, &obs, &identity);
            let wb = step_with_observations(&mut b, &ctx, &obs, &shuffled);
            prop_assert_eq!(wa, wb);
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn hypothesis_relabeling_permutes_beliefs(cfg in scenario(5, 5, 60), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let m = cfg.n_hypotheses();
        let mut sigma: Vec<usize> = (0..m).collect();
        sigma.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let mut permuted = cfg.clone();
        for (model, orig) in permuted.likelihoods.iter_mut().zip(&cfg.likelihoods) {
            for theta in 0..m {
                model.table[sigma[theta]] = orig.table[theta].clone();
            }
        }
        permuted.true_states = cfg.true_states.iter().map(|&t| sigma[t]).collect();
        let a = run_scenario(&cfg, &every_step()).unwrap();
        let b = run_scenario(&permuted, &every_step()).unwrap();
        prop_assert_eq!(&a.trajectory.observations, &b.trajectory.observations);
        for (ra, rb) in a.trajectory.steps.iter().zip(&b.trajectory.steps) {
            for kind in sasl_core::harness::BeliefKind::ALL {
                for (x, y) in ra.beliefs(kind).unwrap().iter().zip(rb.beliefs(kind).unwrap()) {
                    for theta in 0..m {
                        prop_assert!((x.prob(theta) - y.prob(sigma[theta])).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn algorithms_share_observation_draws(cfg in scenario(6, 5, 50)) {
        let all = run_scenario(&cfg, &every_step()).unwrap();
        for flags in [
            AlgorithmFlags { non_cooperative: true, static_cooperative: false, sasl: false },
            AlgorithmFlags { non_cooperative: false, static_cooperative: true, sasl: false },
            AlgorithmFlags { non_cooperative: false, static_cooperative: false, sasl: true },
        ] {
            let single = run_scenario(&ScenarioConfig { algorithms: flags, ..cfg.clone() }, &every_step()).unwrap();
            prop_assert_eq!(&single.trajectory.observations, &all.trajectory.observations);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_matches_row(r in (2usize..=6).prop_flat_map(row), seed in any::<u64>()) {
        let model = LikelihoodModel { agent_id: 0, alpha: 0.01, table: vec![r.clone()] };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 100_000;
        let mut counts = vec![0usize; r.len()];
        for _ in 0..draws {
            counts[sample_observation(&model, 0, &mut rng).unwrap()] += 1;
        }
        let tv: f64 = 0.5 * counts.iter().zip(&r).map(|(&c, &p)| (c as f64 / draws as f64 - p).abs()).sum::<f64>();
        prop_assert!(tv < 0.02, "total variation {}", tv);
    }

    #[test]
    fn monte_carlo_ignores_seed_order(cfg in scenario(4, 4, 40), mut seeds in prop::collection::vec(any::<u64>(), 1..6)) {
        let opts = RunOptions::default();
        let forward = monte_carlo_seeds(&cfg, &seeds, &opts).unwrap();
        seeds.reverse();
        seeds.rotate_left(1);
        prop_assert_eq!(monte_carlo_seeds(&cfg, &seeds, &opts).unwrap(), forward);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn long_runs_stay_on_simplex(cfg in scenario(4, 4, 10_000)) {
        let opts = RunOptions { record: false, ..Default::default() };
        let run = run_scenario(&cfg, &opts).unwrap();
        let last = run.trajectory.last().unwrap();
        for kind in sasl_core::harness::BeliefKind::ALL {
            for b in last.beliefs(kind).unwrap() {
                prop_assert!(b.is_on_simplex(1e-9));
            }
        }
    }
}
