//! Cross-route and cross-method checks on random games: the semantic
//! pipeline against the direct construction, and the solver against the
//! brute-force search.

use secgame::abstraction::{condense, processing_order, ComponentKind};
use secgame::gen::{random_spec, GenConfig};
use secgame::model::{build_game_graph_direct, graphs_isomorphic, semantic_pipeline, DEFAULT_STATE_CAP};
use secgame::oracle;
use secgame::solver::{nash_strategies, social_strategies, SolveOptions, SolverError};

#[test]
fn pipeline_routes_agree_on_random_specs() {
    let cfg = GenConfig::default();
    for seed in 0..30u64 {
        let spec = random_spec(seed, &cfg);
        let pipe = semantic_pipeline(&spec, DEFAULT_STATE_CAP)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let direct = build_game_graph_direct(&spec).unwrap();
        graphs_isomorphic(&pipe.graph, &direct)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn condensation_always_has_a_terminal_component_in_order() {
    let cfg = GenConfig::default();
    for seed in 100..140u64 {
        let spec = random_spec(seed, &cfg);
        let graph = build_game_graph_direct(&spec).unwrap();
        let dag = condense(&graph);
        assert!(dag
            .components
            .iter()
            .any(|c| c.kind == ComponentKind::Terminal));
        let order = processing_order(&dag);
        let mut pos = vec![0; dag.len()];
        for (i, &c) in order.iter().enumerate() {
            pos[c] = i;
        }
        for (c, comp) in dag.components.iter().enumerate() {
            for &s in &comp.successors {
                assert!(pos[s] < pos[c], "seed {seed}: dependency order violated");
            }
        }
    }
}

/// On antagonistic games the solver agrees with brute force exactly.
#[test]
fn solver_matches_brute_force_on_antagonistic_games() {
    let cfg = GenConfig {
        zero_sum: true,
        ..GenConfig::default()
    };
    for seed in 500..560u64 {
        let spec = random_spec(seed, &cfg);
        let graph = build_game_graph_direct(&spec).unwrap();
        let dag = condense(&graph);
        let mut opts = SolveOptions::new(0.8);
        opts.tie_cap = 4096;
        let nes = nash_strategies(&graph, &dag, &opts)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let brute = oracle::exhaustive_nash_strategies(&graph, 0.8, 1e7).unwrap();
        let mut sk: Vec<_> = nes
            .strategies
            .iter()
            .map(|s| oracle::strategy_key(&graph, &s.chosen, 0.8))
            .collect();
        let mut bk: Vec<_> = brute
            .iter()
            .map(|c| oracle::strategy_key(&graph, c, 0.8))
            .collect();
        sk.sort();
        sk.dedup();
        bk.sort();
        bk.dedup();
        assert_eq!(sk, bk, "seed {seed}");

        let sos = social_strategies(&graph, &dag, &opts).unwrap();
        let brute = oracle::exhaustive_social_strategies(&graph, 0.8, 1e7).unwrap();
        let mut sk: Vec<_> = sos
            .strategies
            .iter()
            .map(|s| oracle::strategy_key(&graph, &s.chosen, 0.8))
            .collect();
        let mut bk: Vec<_> = brute
            .iter()
            .map(|c| oracle::strategy_key(&graph, c, 0.8))
            .collect();
        sk.sort();
        sk.dedup();
        bk.sort();
        bk.dedup();
        assert_eq!(sk, bk, "seed {seed} (social)");
    }
}

/// With mixed-sign payoffs the defining equations can have several fixed
/// points, so backward induction is sound but not necessarily complete:
/// whatever it emits must be in the brute-force set, and the equilibrium
/// notion it computes may abort on non-contractive instances.
#[test]
fn solver_output_is_a_subset_of_brute_force_on_mixed_games() {
    let cfg = GenConfig::default();
    let (mut solved, mut aborted, mut incomplete) = (0usize, 0usize, 0usize);
    for seed in 700..780u64 {
        let spec = random_spec(seed, &cfg);
        let graph = build_game_graph_direct(&spec).unwrap();
        let dag = condense(&graph);
        let mut opts = SolveOptions::new(0.6);
        opts.tie_cap = 4096;
        match nash_strategies(&graph, &dag, &opts) {
            Err(SolverError::ContractionViolated { .. }) => aborted += 1,
            Err(e) => panic!("seed {seed}: {e}"),
            Ok(out) => {
                solved += 1;
                let brute = oracle::exhaustive_nash_strategies(&graph, 0.6, 1e7).unwrap();
                let bk: Vec<_> = brute
                    .iter()
                    .map(|c| oracle::strategy_key(&graph, c, 0.6))
                    .collect();
                for s in &out.strategies {
                    let key = oracle::strategy_key(&graph, &s.chosen, 0.6);
                    assert!(bk.contains(&key), "seed {seed}: emitted strategy fails the defining equations");
                }
                if out.strategies.len() < bk.len() {
                    incomplete += 1;
                }
            }
        }
    }
    println!(
        "mixed-sign games: {solved} solved ({incomplete} with further equilibria beyond backward induction), {aborted} aborted on non-contraction"
    );
    assert!(solved > 0);
}

/// Social optimum values are a single contraction fixpoint, so the social
/// solve succeeds and matches brute force on mixed-sign games too.
#[test]
fn social_solver_matches_brute_force_on_mixed_games() {
    let cfg = GenConfig::default();
    for seed in 900..940u64 {
        let spec = random_spec(seed, &cfg);
        let graph = build_game_graph_direct(&spec).unwrap();
        let dag = condense(&graph);
        let mut opts = SolveOptions::new(0.7);
        opts.tie_cap = 4096;
        let sos = social_strategies(&graph, &dag, &opts)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let brute = oracle::exhaustive_social_strategies(&graph, 0.7, 1e7).unwrap();
        let mut sk: Vec<_> = sos
            .strategies
            .iter()
            .map(|s| oracle::strategy_key(&graph, &s.chosen, 0.7))
            .collect();
        let mut bk: Vec<_> = brute
            .iter()
            .map(|c| oracle::strategy_key(&graph, c, 0.7))
            .collect();
        sk.sort();
        sk.dedup();
        bk.sort();
        bk.dedup();
        assert_eq!(sk, bk, "seed {seed}");
    }
}

#[test]
fn enumeration_counts_match_outdegree_product() {
    let cfg = GenConfig::default();
    let spec = random_spec(42, &cfg);
    let graph = build_game_graph_direct(&spec).unwrap();
    let expected = graph.strategy_space_size();
    if expected <= 20_000.0 {
        let count = oracle::enumerate_strategies(&graph, 1e7).unwrap().count();
        assert_eq!(count as f64, expected);
    }
    // Cap refusal path.
    match oracle::enumerate_strategies(&graph, 0.5) {
        Err(oracle::OracleError::CapExceeded { .. }) => {}
        _ => panic!("a cap of 0.5 must refuse enumeration"),
    }
}
