//! Seeded random game specifications for cross-validation against the
//! brute-force oracle and for pipeline-equivalence fuzzing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{
    compile_spec, GameSpec, PayoffDoc, ProbValue, SlotRef, SpecDocument, SpecOptions, StateDoc,
    TransitionDoc,
};
use crate::model::build_game_graph_direct;

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub max_states: usize,
    pub max_actions: usize,
    /// Reject samples whose strategy space exceeds this bound.
    pub max_strategy_space: f64,
    /// Use small-integer payoffs (more ties) instead of generic reals.
    pub integer_payoffs: bool,
    /// Antagonistic payoffs: the defender entry is the negated attacker
    /// entry, as in typical attack-defence scenarios.
    pub zero_sum: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_states: 6,
            max_actions: 3,
            max_strategy_space: 1e5,
            integer_payoffs: false,
            zero_sum: false,
        }
    }
}

/// Generate a random specification document. The same seed and config give
/// the same document.
pub fn random_spec_doc(seed: u64, cfg: &GenConfig) -> SpecDocument {
    // Resample until the strategy space is within bounds; bump a counter
    // into the stream so retries stay deterministic.
    for attempt in 0..64 {
        let doc = sample_doc(seed, attempt, cfg);
        if let Ok(spec) = compile_spec(&doc) {
            if let Ok(graph) = build_game_graph_direct(&spec) {
                if graph.strategy_space_size() <= cfg.max_strategy_space
                    && (0..graph.vertex_count()).all(|v| !graph.outgoing(v).is_empty())
                {
                    return doc;
                }
            }
        }
    }
    // Fall back to the smallest sample shape.
    sample_doc(seed, 64, &GenConfig {
        max_states: 2,
        max_actions: 1,
        ..*cfg
    })
}

/// Generate and compile in one step.
pub fn random_spec(seed: u64, cfg: &GenConfig) -> GameSpec {
    compile_spec(&random_spec_doc(seed, cfg)).expect("generated documents are valid")
}

fn sample_doc(seed: u64, attempt: u64, cfg: &GenConfig) -> SpecDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ attempt);
    let n_states = rng.gen_range(1..=cfg.max_states.max(1));
    let attacker_pool = ["a1", "a2", "a3"];
    let defender_pool = ["d1", "d2", "d3"];

    let mut states = Vec::new();
    for id in 1..=n_states as u32 {
        let na = rng.gen_range(1..=cfg.max_actions.min(3));
        let nd = rng.gen_range(1..=cfg.max_actions.min(3));
        states.push(StateDoc {
            id,
            name: format!("s{id}"),
            attacker_actions: attacker_pool[..na].iter().map(|s| s.to_string()).collect(),
            defender_actions: defender_pool[..nd].iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut transitions = Vec::new();
    let mut payoffs = Vec::new();
    for st in &states {
        let na = st.attacker_actions.len();
        let nd = st.defender_actions.len();
        let mut any_live = false;
        for a in 1..=na as u8 {
            for d in 1..=nd as u8 {
                let live = rng.gen_bool(0.7) || (a == na as u8 && d == nd as u8 && !any_live);
                if !live {
                    continue;
                }
                any_live = true;
                let n_dests = if rng.gen_bool(0.3) && n_states > 1 { 2 } else { 1 };
                let total: f64 = *[0.5, 0.75, 1.0]
                    .get(rng.gen_range(0..3))
                    .expect("index in range");
                let mut remaining = total;
                let mut used = Vec::new();
                for k in 0..n_dests {
                    let to = loop {
                        let t = rng.gen_range(1..=n_states as u32);
                        if !used.contains(&t) {
                            break t;
                        }
                    };
                    used.push(to);
                    let p = if k + 1 == n_dests {
                        remaining
                    } else {
                        let half = remaining / 2.0;
                        remaining -= half;
                        half
                    };
                    transitions.push(TransitionDoc {
                        from: st.id,
                        attacker: SlotRef::Index(a),
                        defender: SlotRef::Index(d),
                        to,
                        p: ProbValue(p),
                        note: None,
                    });
                }
            }
        }
        let sample_payoff = |rng: &mut ChaCha8Rng, attacker: bool| -> f64 {
            if cfg.integer_payoffs {
                let v = rng.gen_range(0..=10) as f64;
                if attacker {
                    v
                } else {
                    -v
                }
            } else {
                let v = (rng.gen_range(0.0..20.0) * 1000.0f64).round() / 1000.0;
                // A small share of positive defender entries keeps the
                // mixed-sign regime exercised.
                if attacker || rng.gen_bool(0.1) {
                    v
                } else {
                    -v
                }
            }
        };
        let pa: Vec<Vec<f64>> = (0..na)
            .map(|_| (0..nd).map(|_| sample_payoff(&mut rng, true)).collect())
            .collect();
        let pd: Vec<Vec<f64>> = if cfg.zero_sum {
            pa.iter()
                .map(|row| row.iter().map(|x| -x).collect())
                .collect()
        } else {
            (0..na)
                .map(|_| (0..nd).map(|_| sample_payoff(&mut rng, false)).collect())
                .collect()
        };
        payoffs.push(PayoffDoc {
            state: st.id,
            attacker: pa,
            defender: pd,
        });
    }

    SpecDocument {
        version: 1,
        name: format!("random-{seed}"),
        beta: None,
        notes: Vec::new(),
        states,
        transitions,
        payoffs,
        options: SpecOptions::default(),
    }
}
