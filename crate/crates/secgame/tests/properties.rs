//! Property tests: printer/parser inversion, restriction suppression,
//! probability ranges, and the bisimulation contract (soundness,
//! coarsest-ness against exhaustive partition enumeration, quotient mass
//! preservation).

use std::collections::BTreeSet;

use proptest::prelude::*;

use secgame::bisim::{coarsest_bisimulation, is_bisimulation, quotient, Lts, LtsState, LtsTransition, Partition};
use secgame::calculus::{
    canonical, derive_transitions, parse_process, ActionLabel, DefinitionEnv, Prefix, Process,
    Stimuli, SumGroup, Value, ValueExpr,
};

// ---------------------------------------------------------------------------
// Random process terms
// ---------------------------------------------------------------------------

fn arb_prefix(bound: Vec<String>) -> impl Strategy<Value = Prefix> {
    let chans = prop_oneof![Just("a".to_string()), Just("b".to_string()), Just("c".to_string())];
    prop_oneof![
        Just(Prefix::Tau),
        chans.clone().prop_map(|chan| Prefix::Input {
            chan,
            var: "x".into()
        }),
        (chans, arb_vexpr(bound)).prop_map(|(chan, arg)| Prefix::Output {
            chan,
            arg: Some(arg)
        }),
    ]
}

fn arb_vexpr(bound: Vec<String>) -> impl Strategy<Value = ValueExpr> {
    if bound.is_empty() {
        prop_oneof![
            (-9i64..9).prop_map(|n| ValueExpr::Lit(Value::Int(n))),
            Just(ValueExpr::Lit(Value::name("u1"))),
        ]
        .boxed()
    } else {
        prop_oneof![
            (-9i64..9).prop_map(|n| ValueExpr::Lit(Value::Int(n))),
            Just(ValueExpr::Lit(Value::name("u1"))),
            proptest::sample::select(bound).prop_map(ValueExpr::Var),
        ]
        .boxed()
    }
}

fn arb_process(depth: u32, bound: Vec<String>) -> BoxedStrategy<Process> {
    if depth == 0 {
        return prop_oneof![
            Just(Process::Nil),
            Just(Process::call("P1", vec![])),
            Just(Process::call("P2", vec![])),
        ]
        .boxed();
    }
    let b2 = bound.clone();
    let b3 = bound.clone();
    let b4 = bound.clone();
    prop_oneof![
        2 => Just(Process::Nil),
        2 => Just(Process::call("P1", vec![])),
        // single prefix
        4 => (arb_prefix(bound.clone()), proptest::bool::ANY).prop_flat_map(move |(prefix, _)| {
            let mut inner_bound = b2.clone();
            if let Prefix::Input { var, .. } = &prefix {
                inner_bound.push(var.clone());
            }
            arb_process(depth - 1, inner_bound).prop_map(move |cont| Process::prefix(prefix.clone(), cont))
        }),
        // two-branch probabilistic group sharing one prefix
        2 => (arb_prefix(bound.clone())).prop_flat_map(move |prefix| {
            let mut inner_bound = b3.clone();
            if let Prefix::Input { var, .. } = &prefix {
                inner_bound.push(var.clone());
            }
            (arb_process(depth - 1, inner_bound.clone()), arb_process(depth - 1, inner_bound))
                .prop_map(move |(c1, c2)| {
                    Process::Sum(vec![SumGroup::new(prefix.clone(), vec![(0.25, c1), (0.75, c2)])
                        .expect("valid group")])
                })
        }),
        2 => (arb_process(depth - 1, bound.clone()), arb_process(depth - 1, bound.clone()))
            .prop_map(|(l, r)| Process::par(l, r)),
        1 => arb_process(depth - 1, bound.clone())
            .prop_map(|p| Process::restrict(p, ["a".to_string()])),
        1 => (arb_process(depth - 1, b4.clone()), arb_process(depth - 1, b4.clone()))
            .prop_map(|(t, e)| Process::cond(
                secgame::calculus::BoolExpr::Eq(
                    ValueExpr::Lit(Value::Int(1)),
                    ValueExpr::Lit(Value::Int(1))
                ),
                t,
                e
            )),
    ]
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printer_output_reparses_to_the_same_term(p in arb_process(3, vec![])) {
        let printed = format!("{p}");
        let reparsed = parse_process(&printed, &DefinitionEnv::new())
            .unwrap_or_else(|e| panic!("printed form must reparse: {e}\n{printed}"));
        prop_assert_eq!(p, reparsed);
    }

    #[test]
    fn restriction_suppresses_restricted_channels(p in arb_process(3, vec![])) {
        let env = {
            let mut env = DefinitionEnv::new();
            env.define("P1", vec![], Process::Nil).unwrap();
            env.define("P2", vec![], Process::prefix(Prefix::Output {
                chan: "a".into(), arg: Some(ValueExpr::Lit(Value::Int(1)))
            }, Process::Nil)).unwrap();
            env
        };
        let restricted = Process::restrict(p, ["a".to_string(), "b".to_string()]);
        let stim = Stimuli::uniform([Value::Int(1), Value::name("u1")]);
        if let Ok(ts) = derive_transitions(&restricted, &env, &stim) {
            for t in &ts {
                prop_assert!(t.label.channel() != Some("a"));
                prop_assert!(t.label.channel() != Some("b"));
            }
        }
    }

    #[test]
    fn derived_probabilities_lie_in_unit_interval(p in arb_process(3, vec![])) {
        let env = {
            let mut env = DefinitionEnv::new();
            env.define("P1", vec![], Process::Nil).unwrap();
            env.define("P2", vec![], Process::Nil).unwrap();
            env
        };
        let stim = Stimuli::uniform([Value::Int(1)]);
        if let Ok(ts) = derive_transitions(&p, &env, &stim) {
            for t in &ts {
                prop_assert!(t.prob > 0.0 && t.prob <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn reached_mass_agrees_with_derived_transitions(p in arb_process(2, vec![])) {
        // The mass function must equal the per-class sum over the derived
        // transition list, for every action and every singleton class.
        let env = {
            let mut env = DefinitionEnv::new();
            env.define("P1", vec![], Process::Nil).unwrap();
            env.define("P2", vec![], Process::Nil).unwrap();
            env
        };
        let stim = Stimuli::uniform([Value::Int(1)]);
        if let Ok(ts) = derive_transitions(&p, &env, &stim) {
            let labels: BTreeSet<ActionLabel> = ts.iter().map(|t| t.label.clone()).collect();
            let targets: BTreeSet<Process> = ts.iter().map(|t| canonical(&t.target)).collect();
            for label in &labels {
                for target in &targets {
                    let class: BTreeSet<Process> = [target.clone()].into_iter().collect();
                    let m = secgame::calculus::mu(&p, label, &class, &env, &stim).unwrap();
                    let direct: f64 = ts
                        .iter()
                        .filter(|t| t.label == *label && canonical(&t.target) == *target)
                        .map(|t| t.prob)
                        .sum();
                    prop_assert!((m - direct).abs() < 1e-12);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random transition systems
// ---------------------------------------------------------------------------

fn arb_lts(max_states: usize) -> impl Strategy<Value = Lts<u8>> {
    (2..=max_states).prop_flat_map(|n| {
        let trans = proptest::collection::vec(
            (0..n, 0..3u8, prop_oneof![Just(0.5f64), Just(1.0f64)], 0..n),
            1..=(2 * n),
        );
        trans.prop_map(move |ts| {
            // Keep per-(src,label) masses at most one by splitting evenly.
            let mut by_key: std::collections::BTreeMap<(usize, u8), Vec<(f64, usize)>> =
                std::collections::BTreeMap::new();
            for (src, label, p, dst) in ts {
                by_key.entry((src, label)).or_default().push((p, dst));
            }
            let mut transitions = Vec::new();
            for ((src, label), branches) in by_key {
                let total: f64 = branches.iter().map(|(p, _)| *p).sum();
                for (p, dst) in branches {
                    transitions.push(LtsTransition {
                        src,
                        label,
                        prob: p / total,
                        dst,
                    });
                }
            }
            Lts {
                states: (0..n)
                    .map(|i| LtsState {
                        name: format!("s{i}"),
                        game_ids: vec![i as u32],
                    })
                    .collect(),
                transitions,
            }
        })
    })
}

/// All partitions of {0..n}, as block-index vectors.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(i: usize, max_used: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == current.len() {
            out.push(current.clone());
            return;
        }
        for b in 0..=max_used + 1 {
            current[i] = b;
            rec(i + 1, max_used.max(b), current, out);
        }
    }
    if n > 0 {
        current[0] = 0;
        rec(1, 0, &mut current, &mut out);
    }
    out
}

fn partition_from_assignment(assign: &[usize]) -> Partition {
    let blocks_count = assign.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut blocks = vec![Vec::new(); blocks_count];
    for (s, &b) in assign.iter().enumerate() {
        blocks[b].push(s);
    }
    blocks.retain(|b| !b.is_empty());
    blocks.sort_by_key(|b| b[0]);
    let mut block_of = vec![0; assign.len()];
    for (i, b) in blocks.iter().enumerate() {
        for &s in b {
            block_of[s] = i;
        }
    }
    Partition { block_of, blocks }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn computed_partition_is_a_bisimulation(lts in arb_lts(6)) {
        let part = coarsest_bisimulation(&lts);
        prop_assert!(is_bisimulation(&lts, &part));
    }

    #[test]
    fn no_coarser_partition_is_a_bisimulation(lts in arb_lts(5)) {
        // Exhaustively: every equivalence satisfying the transfer condition
        // refines the computed one.
        let computed = coarsest_bisimulation(&lts);
        for assign in all_partitions(lts.state_count()) {
            let candidate = partition_from_assignment(&assign);
            if is_bisimulation(&lts, &candidate) {
                for block in &candidate.blocks {
                    let target = computed.block_of[block[0]];
                    prop_assert!(
                        block.iter().all(|&s| computed.block_of[s] == target),
                        "a bisimulation groups states the coarsest one separates"
                    );
                }
            }
        }
    }

    #[test]
    fn quotient_preserves_reached_mass(lts in arb_lts(6)) {
        let part = coarsest_bisimulation(&lts);
        let q = quotient(&lts, &part).expect("coarsest partition is a bisimulation");
        // mu_q(block(s), a, C) must equal mu(s, a, union C) for every state,
        // label, and quotient block.
        for s in 0..lts.state_count() {
            for label in 0u8..3 {
                for c in 0..q.state_count() {
                    let mass_q: f64 = q
                        .transitions
                        .iter()
                        .filter(|t| t.src == part.block_of[s] && t.label == label && t.dst == c)
                        .map(|t| t.prob)
                        .sum();
                    let mass: f64 = lts
                        .transitions
                        .iter()
                        .filter(|t| t.src == s && t.label == label && part.block_of[t.dst] == c)
                        .map(|t| t.prob)
                        .sum();
                    prop_assert!((mass_q - mass).abs() < 1e-9);
                }
            }
        }
    }
}
