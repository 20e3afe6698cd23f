//! Brute-force ground truth for strategy synthesis.
//!
//! Everything here is deliberately independent of the solver's machinery:
//! strategies are enumerated exhaustively as out-degree-one choice maps,
//! their payoffs are obtained by iterating the defining recursion to
//! convergence rather than by closed forms, and the equilibrium and
//! social-optimality conditions are tested directly as written. The solver
//! must agree with this module on every instance small enough to enumerate.

use thiserror::Error;

use crate::model::GameGraph;

/// Default cap on the number of enumerable strategies.
pub const DEFAULT_ENUM_CAP: f64 = 1e7;

/// Tolerance of the definitional equality checks; looser than the solver's
/// fixpoint tolerance to absorb closed-form versus iterative rounding.
pub const ORACLE_TOL: f64 = 1e-6;

const VALUE_ITER_TOL: f64 = 1e-12;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("strategy space of size {size:e} exceeds the cap {cap:e}")]
    CapExceeded { size: f64, cap: f64 },
    #[error("vertex {0} has no outgoing edge")]
    DeadEndVertex(usize),
}

/// Iterator over every out-degree-one choice map of the graph, in odometer
/// order over ascending edge ids.
pub struct StrategyEnumeration<'g> {
    graph: &'g GameGraph,
    current: Option<Vec<usize>>,
}

impl<'g> Iterator for StrategyEnumeration<'g> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let positions = self.current.as_mut()?;
        let chosen: Vec<usize> = positions
            .iter()
            .enumerate()
            .map(|(v, &k)| self.graph.outgoing(v)[k])
            .collect();
        // Advance the odometer.
        let mut done = true;
        for (v, pos) in positions.iter_mut().enumerate() {
            *pos += 1;
            if *pos < self.graph.outgoing(v).len() {
                done = false;
                break;
            }
            *pos = 0;
        }
        if done {
            self.current = None;
        }
        Some(chosen)
    }
}

/// Enumerate all strategies, refusing when the product of out-degrees
/// exceeds `cap`.
pub fn enumerate_strategies(
    graph: &GameGraph,
    cap: f64,
) -> Result<StrategyEnumeration<'_>, OracleError> {
    for v in 0..graph.vertex_count() {
        if graph.outgoing(v).is_empty() {
            return Err(OracleError::DeadEndVertex(v));
        }
    }
    let size = graph.strategy_space_size();
    if size > cap {
        return Err(OracleError::CapExceeded { size, cap });
    }
    Ok(StrategyEnumeration {
        graph,
        current: Some(vec![0; graph.vertex_count()]),
    })
}

/// Attacker/defender payoff vector of a choice map, computed by iterating
/// `value <- weight + beta*prob*value(next)` to convergence.
pub fn iterated_payoffs(graph: &GameGraph, chosen: &[usize], beta: f64) -> Vec<(f64, f64)> {
    let n = graph.vertex_count();
    let mut values = vec![(0.0, 0.0); n];
    loop {
        let mut delta = 0.0f64;
        let mut next = vec![(0.0, 0.0); n];
        for v in 0..n {
            let e = &graph.edges[chosen[v]];
            let succ = values[e.dst];
            next[v] = (
                e.weight.0 + beta * e.prob * succ.0,
                e.weight.1 + beta * e.prob * succ.1,
            );
            delta = delta
                .max((next[v].0 - values[v].0).abs())
                .max((next[v].1 - values[v].1).abs());
        }
        values = next;
        if delta < VALUE_ITER_TOL {
            return values;
        }
    }
}

/// Absolute-sum payoff vector of a choice map, iterated to convergence.
pub fn iterated_social_payoffs(graph: &GameGraph, chosen: &[usize], beta: f64) -> Vec<f64> {
    let n = graph.vertex_count();
    let mut values = vec![0.0; n];
    loop {
        let mut delta = 0.0f64;
        let mut next = vec![0.0; n];
        for v in 0..n {
            let e = &graph.edges[chosen[v]];
            next[v] = e.social_weight() + beta * e.prob * values[e.dst];
            delta = delta.max((next[v] - values[v]).abs());
        }
        values = next;
        if delta < VALUE_ITER_TOL {
            return values;
        }
    }
}

/// Truncated evaluation of an execution's payoff recursion: follow the
/// lasso for `steps` steps and stop. Used to cross-check closed forms.
pub fn truncated_execution_payoff(
    exec: &crate::solver::Execution,
    graph: &GameGraph,
    beta: f64,
    steps: usize,
) -> (f64, f64) {
    let mut value = (0.0, 0.0);
    let mut factor = 1.0;
    let mut k = 0usize;
    let mut idx = 0usize;
    while k < steps {
        let e = &graph.edges[exec.edges[idx]];
        value.0 += factor * e.weight.0;
        value.1 += factor * e.weight.1;
        factor *= beta * e.prob;
        idx += 1;
        if idx == exec.edges.len() {
            idx = exec.cycle_from;
        }
        k += 1;
    }
    value
}

/// Nash-equilibrium check, straight from the definition: at every vertex
/// the defender cannot improve within the chosen attacker action's group,
/// and the attacker cannot improve across the defender-filtered edges,
/// where alternatives continue with this same strategy's payoffs.
pub fn is_nash_strategy(graph: &GameGraph, chosen: &[usize], beta: f64, tol: f64) -> bool {
    let payoffs = iterated_payoffs(graph, chosen, beta);
    is_nash_with_payoffs(graph, chosen, &payoffs, beta, tol)
}

pub(crate) fn is_nash_with_payoffs(
    graph: &GameGraph,
    chosen: &[usize],
    payoffs: &[(f64, f64)],
    beta: f64,
    tol: f64,
) -> bool {
    for v in 0..graph.vertex_count() {
        let alt = |e: usize| -> (f64, f64) {
            let edge = &graph.edges[e];
            let succ = payoffs[edge.dst];
            (
                edge.weight.0 + beta * edge.prob * succ.0,
                edge.weight.1 + beta * edge.prob * succ.1,
            )
        };
        let chosen_act = &graph.edges[chosen[v]].act.attacker;
        // Defender equality within the chosen attacker group.
        let same_group_max = graph
            .outgoing(v)
            .iter()
            .filter(|&&e| graph.edges[e].act.attacker == *chosen_act)
            .map(|&e| alt(e).1)
            .fold(f64::NEG_INFINITY, f64::max);
        if (payoffs[v].1 - same_group_max).abs() > tol {
            return false;
        }
        // Attacker equality over per-group defender-best edges.
        let mut group_max: std::collections::BTreeMap<(u8, &str), f64> =
            std::collections::BTreeMap::new();
        for &e in graph.outgoing(v) {
            let act = &graph.edges[e].act.attacker;
            let entry = group_max
                .entry((act.index, act.name.as_str()))
                .or_insert(f64::NEG_INFINITY);
            *entry = entry.max(alt(e).1);
        }
        let best_attacker = graph
            .outgoing(v)
            .iter()
            .filter(|&&e| {
                let act = &graph.edges[e].act.attacker;
                alt(e).1 >= group_max[&(act.index, act.name.as_str())] - TIE_EPS
            })
            .map(|&e| alt(e).0)
            .fold(f64::NEG_INFINITY, f64::max);
        if (payoffs[v].0 - best_attacker).abs() > tol {
            return false;
        }
    }
    true
}

/// Social-optimality check: at every vertex the chosen absolute-sum value
/// equals the minimum over all outgoing edges.
pub fn is_social_optimal_strategy(
    graph: &GameGraph,
    chosen: &[usize],
    beta: f64,
    tol: f64,
) -> bool {
    let values = iterated_social_payoffs(graph, chosen, beta);
    for v in 0..graph.vertex_count() {
        let min = graph
            .outgoing(v)
            .iter()
            .map(|&e| {
                let edge = &graph.edges[e];
                edge.social_weight() + beta * edge.prob * values[edge.dst]
            })
            .fold(f64::INFINITY, f64::min);
        if (values[v] - min).abs() > tol {
            return false;
        }
    }
    true
}

/// All Nash-equilibrium strategies by exhaustive enumeration.
pub fn exhaustive_nash_strategies(
    graph: &GameGraph,
    beta: f64,
    cap: f64,
) -> Result<Vec<Vec<usize>>, OracleError> {
    Ok(enumerate_strategies(graph, cap)?
        .filter(|chosen| is_nash_strategy(graph, chosen, beta, ORACLE_TOL))
        .collect())
}

/// All social-optimal strategies by exhaustive enumeration.
pub fn exhaustive_social_strategies(
    graph: &GameGraph,
    beta: f64,
    cap: f64,
) -> Result<Vec<Vec<usize>>, OracleError> {
    Ok(enumerate_strategies(graph, cap)?
        .filter(|chosen| is_social_optimal_strategy(graph, chosen, beta, ORACLE_TOL))
        .collect())
}

/// Reporting-level key of a choice map: per vertex the action names, the
/// destination, and the rounded payoffs. Choice maps with equal keys are
/// the same strategy (repeated same-named action slots collapse).
pub fn strategy_key(graph: &GameGraph, chosen: &[usize], beta: f64) -> Vec<String> {
    let payoffs = iterated_payoffs(graph, chosen, beta);
    (0..graph.vertex_count())
        .map(|v| {
            let e = &graph.edges[chosen[v]];
            format!(
                "{}/{}>{}@{:.9}r({:.6},{:.6})",
                e.act.attacker.name, e.act.defender.name, e.dst, e.prob, payoffs[v].0, payoffs[v].1
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ActionSlot;
    use crate::model::{ActionPair, GameEdge, GameVertex};

    fn slot(index: u8, name: &str) -> ActionSlot {
        ActionSlot {
            index,
            name: name.into(),
        }
    }

    fn graph(n: usize, edges: &[(usize, usize, &str, f64, f64, f64)]) -> GameGraph {
        let vertices = (0..n)
            .map(|i| GameVertex {
                members: vec![i as u32 + 1],
                name: format!("v{i}"),
            })
            .collect();
        let ges = edges
            .iter()
            .map(|&(src, dst, a, prob, wa, wd)| GameEdge {
                src,
                dst,
                act: ActionPair {
                    attacker: slot(a.as_bytes()[1] - b'0', a),
                    defender: slot(1, "d1"),
                },
                prob,
                weight: (wa, wd),
            })
            .collect();
        GameGraph::from_parts(vertices, ges)
    }

    #[test]
    fn single_self_loop_has_no_alternatives() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 10.0, -10.0)]);
        assert!(is_nash_strategy(&g, &[0], 0.5, ORACLE_TOL));
        assert!(is_social_optimal_strategy(&g, &[0], 0.5, ORACLE_TOL));
    }

    #[test]
    fn losing_edge_fails_the_equilibrium_check() {
        // Within one attacker group, (10,-5) dominates (20,-10) for the
        // defender; choosing the dominated edge is not an equilibrium.
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 10.0, -5.0),
                (0, 1, "a1", 1.0, 20.0, -10.0),
                (1, 1, "a1", 1.0, 0.0, 0.0),
            ],
        );
        assert!(is_nash_strategy(&g, &[0, 2], 0.5, ORACLE_TOL));
        assert!(!is_nash_strategy(&g, &[1, 2], 0.5, ORACLE_TOL));
    }

    #[test]
    fn dominated_social_choice_fails_the_minimality_check() {
        let g = graph(
            1,
            &[
                (0, 0, "a1", 1.0, 10.0, -10.0),
                (0, 0, "a2", 1.0, 20.0, -10.0),
            ],
        );
        assert!(is_social_optimal_strategy(&g, &[0], 0.5, ORACLE_TOL));
        assert!(!is_social_optimal_strategy(&g, &[1], 0.5, ORACLE_TOL));
    }

    #[test]
    fn self_loop_beats_cheap_cycle_in_equilibrium_search() {
        // The self-loop at A is worth 6; the two-cycle only about 2.67.
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 1.0, -1.0),
                (0, 0, "a2", 1.0, 3.0, -3.0),
                (1, 0, "a1", 1.0, 2.0, -2.0),
            ],
        );
        let nes = exhaustive_nash_strategies(&g, 0.5, 1e6).unwrap();
        assert_eq!(nes.len(), 1);
        assert_eq!(g.edges[nes[0][0]].act.attacker.name, "a2");
    }

    #[test]
    fn strategy_count_is_the_product_of_out_degrees() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 1.0, -1.0), (0, 0, "a2", 1.0, 2.0, -2.0)]);
        assert_eq!(enumerate_strategies(&g, 1e6).unwrap().count(), 2);
        let g = graph(
            3,
            &[
                (0, 1, "a1", 1.0, 1.0, -1.0),
                (0, 2, "a2", 1.0, 1.0, -1.0),
                (1, 0, "a1", 1.0, 1.0, -1.0),
                (1, 1, "a2", 1.0, 1.0, -1.0),
                (1, 2, "a3", 1.0, 1.0, -1.0),
                (2, 2, "a1", 1.0, 1.0, -1.0),
            ],
        );
        assert_eq!(enumerate_strategies(&g, 1e6).unwrap().count(), 6);
    }

    #[test]
    fn social_optima_always_exist_on_random_games() {
        use crate::gen::{random_spec, GenConfig};
        use crate::model::build_game_graph_direct;
        let cfg = GenConfig {
            max_states: 4,
            ..GenConfig::default()
        };
        for seed in 0..25u64 {
            let spec = random_spec(seed, &cfg);
            let graph = build_game_graph_direct(&spec).unwrap();
            let sos = exhaustive_social_strategies(&graph, 0.7, 1e7).unwrap();
            assert!(!sos.is_empty(), "seed {seed}");
        }
    }
}
