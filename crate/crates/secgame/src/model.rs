//! From game specification to game graph.
//!
//! Two routes produce the same graph. The semantic route instantiates one
//! attacker, defender, and network-environment process per state, derives
//! the reachable transition system under the operational semantics,
//! minimizes it by probabilistic bisimulation, and contracts every
//! six-step interaction round (four synchronisations, a log entry, a
//! probabilistic payoff record) into a single labelled edge. The direct
//! route builds the edge relation straight from the specification rows and
//! minimizes at the game level. Their agreement is a standing test oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use ordered_float::NotNan;
use thiserror::Error;

use crate::bisim::{self, Lts, LtsState, LtsTransition, Partition};
use crate::game::{ActionSlot, GameSpec};
use crate::calculus::{
    canonical, derive_transitions, ActionLabel, BoolExpr, DefinitionEnv, Prefix, Process,
    SemanticsError, Stimuli, SumGroup, Value, ValueExpr,
};

/// Channel names of the interaction protocol. The first four are restricted
/// inside each state process; log and record remain observable.
pub const CHAN_ATTACK: &str = "Attc";
pub const CHAN_DEFEND: &str = "Defd";
pub const CHAN_TELL_A: &str = "Tell_a";
pub const CHAN_TELL_D: &str = "Tell_d";
pub const CHAN_LOG: &str = "Log";
pub const CHAN_REC: &str = "Rec";

/// Default cap on reachable states while unfolding the semantics.
pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("reachable state count exceeded the cap of {0}; the model diverges")]
    Divergence(usize),
    #[error("unexpected interaction shape at state `{state}`: {what}")]
    Shape { state: String, what: String },
    #[error(transparent)]
    Bisim(#[from] bisim::BisimError),
}

// ---------------------------------------------------------------------------
// Process templates
// ---------------------------------------------------------------------------

/// The process family modelling one game: per state the attacker, defender,
/// environment, and transition-bookkeeping processes, plus the combined
/// restricted state process.
#[derive(Clone, Debug)]
pub struct StateProcesses {
    pub env: DefinitionEnv,
    /// Canonical combined process per state, index-aligned with the spec.
    pub game_terms: Vec<Process>,
    /// Stimulus sets matching the value domain of the spec.
    pub stimuli: Stimuli,
}

fn slot_value(slot: &ActionSlot) -> Value {
    Value::pair(Value::Int(slot.index as i64), Value::name(slot.name.clone()))
}

fn payoff_value(payoff: (f64, f64)) -> Value {
    Value::pair(Value::real(payoff.0), Value::real(payoff.1))
}

fn restricted() -> BTreeSet<String> {
    [CHAN_ATTACK, CHAN_DEFEND, CHAN_TELL_A, CHAN_TELL_D]
        .into_iter()
        .map(String::from)
        .collect()
}

fn ident(prefix: &str, id: u32) -> String {
    format!("{prefix}{id}")
}

/// Instantiate the process templates for every state of `spec`.
///
/// Per state `i` with attacker slots `u` and defender slots `v`:
///
/// ```text
/// pA_i      = Σ_u 'Attc(u) . Tell_a(y) . Nil
/// pD_i      = Tell_d(x) . Σ_v 'Defd(v) . Nil
/// pN_i      = Attc(x) . 'Tell_d(x) . Defd(y) . 'Tell_a(y) . Tr_i(x,y)
/// Tr_i(x,y) = Σ_{u,v} 'Log((u,v)) . if (x=u, y=v)
///               then Σ_j [p(i,u,v,j)] 'Rec(r(i,u,v)) . (pA_j|pD_j|pN_j)\R
///               else Nil
/// G_i       = (pA_i | pD_i | pN_i)\R
/// ```
///
/// Action pairs without any recorded transition keep a log branch whose
/// matched continuation is `Nil` (a dead branch).
pub fn build_processes(spec: &GameSpec) -> StateProcesses {
    let mut env = DefinitionEnv::new();
    let restrict = restricted();

    // Continuations inside Tr use the bare composition: the enclosing
    // restriction of the current state process is inherited through the
    // semantics, so adding another one here would nest restrictions and
    // make recurring states syntactically distinct.
    let bare_par = |id: u32| {
        Process::par(
            Process::par(
                Process::call(ident("pA", id), vec![]),
                Process::call(ident("pD", id), vec![]),
            ),
            Process::call(ident("pN", id), vec![]),
        )
    };
    let game_term = |id: u32| Process::restrict(bare_par(id), restrict.iter().cloned());

    for st in &spec.states {
        // pA: offer every attack, then await the response notification.
        let pa_groups: Vec<SumGroup> = st
            .attacker
            .iter()
            .map(|u| {
                SumGroup::single(
                    Prefix::Output {
                        chan: CHAN_ATTACK.into(),
                        arg: Some(ValueExpr::Lit(slot_value(u))),
                    },
                    Process::prefix(
                        Prefix::Input {
                            chan: CHAN_TELL_A.into(),
                            var: "y".into(),
                        },
                        Process::Nil,
                    ),
                )
            })
            .collect();
        env.define(ident("pA", st.id), vec![], Process::Sum(pa_groups))
            .expect("unique identifier");

        // pD: learn of the attack, then offer every defence.
        let pd_inner: Vec<SumGroup> = st
            .defender
            .iter()
            .map(|v| {
                SumGroup::single(
                    Prefix::Output {
                        chan: CHAN_DEFEND.into(),
                        arg: Some(ValueExpr::Lit(slot_value(v))),
                    },
                    Process::Nil,
                )
            })
            .collect();
        let pd = Process::prefix(
            Prefix::Input {
                chan: CHAN_TELL_D.into(),
                var: "x".into(),
            },
            Process::Sum(pd_inner),
        );
        env.define(ident("pD", st.id), vec![], pd).expect("unique");

        // pN: relay the choices and hand over to the bookkeeping process.
        let pn = Process::prefix(
            Prefix::Input {
                chan: CHAN_ATTACK.into(),
                var: "x".into(),
            },
            Process::prefix(
                Prefix::Output {
                    chan: CHAN_TELL_D.into(),
                    arg: Some(ValueExpr::var("x")),
                },
                Process::prefix(
                    Prefix::Input {
                        chan: CHAN_DEFEND.into(),
                        var: "y".into(),
                    },
                    Process::prefix(
                        Prefix::Output {
                            chan: CHAN_TELL_A.into(),
                            arg: Some(ValueExpr::var("y")),
                        },
                        Process::call(
                            ident("Tr", st.id),
                            vec![ValueExpr::var("x"), ValueExpr::var("y")],
                        ),
                    ),
                ),
            ),
        );
        env.define(ident("pN", st.id), vec![], pn).expect("unique");

        // Tr: log the pair, then branch on whether it matches the round.
        let mut tr_groups = Vec::new();
        for u in &st.attacker {
            for v in &st.defender {
                let guard = BoolExpr::and(
                    BoolExpr::Eq(ValueExpr::var("x"), ValueExpr::Lit(slot_value(u))),
                    BoolExpr::Eq(ValueExpr::var("y"), ValueExpr::Lit(slot_value(v))),
                );
                let live = st.rows.get(&(u.index, v.index)).map(|row| {
                    let branches: Vec<(f64, Process)> = row
                        .dests
                        .iter()
                        .map(|(&dst, &p)| (p, bare_par(dst)))
                        .collect();
                    Process::Sum(vec![SumGroup {
                        prefix: Prefix::Output {
                            chan: CHAN_REC.into(),
                            arg: Some(ValueExpr::Lit(payoff_value(row.payoff))),
                        },
                        branches: branches
                            .into_iter()
                            .map(|(p, c)| (NotNan::new(p).expect("probability"), c))
                            .collect(),
                    }])
                });
                tr_groups.push(SumGroup::single(
                    Prefix::Output {
                        chan: CHAN_LOG.into(),
                        arg: Some(ValueExpr::Lit(Value::pair(slot_value(u), slot_value(v)))),
                    },
                    Process::cond(guard, live.unwrap_or(Process::Nil), Process::Nil),
                ));
            }
        }
        env.define(
            ident("Tr", st.id),
            vec!["x".into(), "y".into()],
            Process::Sum(tr_groups),
        )
        .expect("unique");

        env.define(ident("G", st.id), vec![], game_term(st.id))
            .expect("unique");
    }

    let game_terms: Vec<Process> = spec
        .states
        .iter()
        .map(|st| canonical(&game_term(st.id)))
        .collect();

    let attacker_values: BTreeSet<Value> = spec
        .states
        .iter()
        .flat_map(|s| s.attacker.iter().map(slot_value))
        .collect();
    let defender_values: BTreeSet<Value> = spec
        .states
        .iter()
        .flat_map(|s| s.defender.iter().map(slot_value))
        .collect();
    let stimuli = Stimuli::none()
        .with_channel(CHAN_ATTACK, attacker_values.clone())
        .with_channel(CHAN_TELL_D, attacker_values)
        .with_channel(CHAN_DEFEND, defender_values.clone())
        .with_channel(CHAN_TELL_A, defender_values);

    StateProcesses {
        env,
        game_terms,
        stimuli,
    }
}

// ---------------------------------------------------------------------------
// Transition system construction
// ---------------------------------------------------------------------------

/// Explore the reachable fragment of the semantics from every state process.
/// States are identified by canonical forms.
pub fn build_transition_system(
    procs: &StateProcesses,
    cap: usize,
) -> Result<Lts<ActionLabel>, ModelError> {
    let mut index: HashMap<Process, usize> = HashMap::new();
    let mut states: Vec<LtsState> = Vec::new();
    let mut terms: Vec<Process> = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    let mut transitions = Vec::new();

    let intern =
        |term: Process,
         index: &mut HashMap<Process, usize>,
         states: &mut Vec<LtsState>,
         terms: &mut Vec<Process>,
         queue: &mut Vec<usize>| {
            if let Some(&i) = index.get(&term) {
                return i;
            }
            let i = states.len();
            states.push(LtsState {
                name: format!("{term}"),
                game_ids: Vec::new(),
            });
            index.insert(term.clone(), i);
            terms.push(term);
            queue.push(i);
            i
        };

    for (gi, term) in procs.game_terms.iter().enumerate() {
        let i = intern(
            term.clone(),
            &mut index,
            &mut states,
            &mut terms,
            &mut queue,
        );
        states[i].game_ids.push(gi as u32);
    }

    let mut cursor = 0;
    while cursor < queue.len() {
        let i = queue[cursor];
        cursor += 1;
        if states.len() > cap {
            return Err(ModelError::Divergence(cap));
        }
        let term = terms[i].clone();
        let ts = derive_transitions(&term, &procs.env, &procs.stimuli)?;
        for t in ts {
            let tgt = canonical(&t.target);
            let j = intern(tgt, &mut index, &mut states, &mut terms, &mut queue);
            transitions.push(LtsTransition {
                src: i,
                label: t.label,
                prob: t.prob,
                dst: j,
            });
        }
    }

    Ok(Lts {
        states,
        transitions,
    })
}

// ---------------------------------------------------------------------------
// Game graph
// ---------------------------------------------------------------------------

/// Attacker/defender action pair labelling a game-graph edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionPair {
    pub attacker: ActionSlot,
    pub defender: ActionSlot,
}

impl fmt::Display for ActionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.attacker.name, self.defender.name)
    }
}

/// One labelled edge of the game graph: the action pair, the transition
/// probability, and the immediate weight pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GameEdge {
    pub src: usize,
    pub dst: usize,
    pub act: ActionPair,
    pub prob: f64,
    pub weight: (f64, f64),
}

impl GameEdge {
    /// Absolute-sum weight: attacker weight plus |defender weight|.
    pub fn social_weight(&self) -> f64 {
        self.weight.0 + self.weight.1.abs()
    }
}

/// Vertex of the game graph: a class of bisimilar game states, named after
/// its least member.
#[derive(Clone, Debug)]
pub struct GameVertex {
    /// Game-state ids merged into this vertex, ascending.
    pub members: Vec<u32>,
    pub name: String,
}

/// The contracted game graph.
#[derive(Clone, Debug)]
pub struct GameGraph {
    pub vertices: Vec<GameVertex>,
    pub edges: Vec<GameEdge>,
    out: Vec<Vec<usize>>,
}

impl GameGraph {
    /// Assemble a graph from parts; edges are sorted into a deterministic
    /// order and indexed by source.
    pub fn from_parts(vertices: Vec<GameVertex>, edges: Vec<GameEdge>) -> Self {
        Self::new(vertices, edges)
    }

    fn new(vertices: Vec<GameVertex>, mut edges: Vec<GameEdge>) -> Self {
        edges.sort_by(|a, b| {
            (a.src, &a.act, a.dst)
                .partial_cmp(&(b.src, &b.act, b.dst))
                .unwrap()
        });
        let mut out = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.src].push(i);
        }
        GameGraph {
            vertices,
            edges,
            out,
        }
    }

    pub fn outgoing(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertex index holding a given game-state id.
    pub fn vertex_of_state(&self, id: u32) -> Option<usize> {
        self.vertices.iter().position(|v| v.members.contains(&id))
    }

    /// Product of the out-degrees: the number of out-degree-one subgraphs.
    pub fn strategy_space_size(&self) -> f64 {
        self.out.iter().map(|o| o.len() as f64).product()
    }
}

/// Contract a bisimulation-minimized transition system into the game graph.
/// Every macro-step from a game class must have the interaction shape
/// `tau[1] tau[1] tau[1] tau[1] 'Log(u,v)[1] 'Rec(r)[p]`.
pub fn contract_to_game_graph(quotient: &Lts<ActionLabel>) -> Result<GameGraph, ModelError> {
    // Game classes, ordered by least member id.
    let mut game_blocks: Vec<usize> = (0..quotient.state_count())
        .filter(|&s| !quotient.states[s].game_ids.is_empty())
        .collect();
    game_blocks.sort_by_key(|&s| quotient.states[s].game_ids[0]);
    let block_to_vertex: BTreeMap<usize, usize> = game_blocks
        .iter()
        .enumerate()
        .map(|(v, &b)| (b, v))
        .collect();

    let mut out = vec![Vec::new(); quotient.state_count()];
    for t in &quotient.transitions {
        out[t.src].push(t);
    }

    let vertices: Vec<GameVertex> = game_blocks
        .iter()
        .map(|&b| GameVertex {
            members: quotient.states[b].game_ids.iter().map(|&g| g + 1).collect(),
            name: quotient.states[b].name.clone(),
        })
        .collect();

    let shape_err = |b: usize, what: String| ModelError::Shape {
        state: format!("class of game ids {:?}", quotient.states[b].game_ids),
        what,
    };

    let mut edges = Vec::new();
    for (&block, &v) in &block_to_vertex {
        // Four deterministic synchronisation layers fan out over the
        // participants' choices; collect the frontier after each layer.
        let mut frontier = vec![block];
        for step in 0..4 {
            let mut next = Vec::new();
            for &s in &frontier {
                if out[s].is_empty() {
                    return Err(shape_err(
                        block,
                        format!("interaction stalls after {step} internal steps"),
                    ));
                }
                for t in &out[s] {
                    if t.label != ActionLabel::Tau {
                        return Err(shape_err(
                            block,
                            format!("expected internal step {step}, saw `{}`", t.label),
                        ));
                    }
                    // Each source branch carries probability one, but the
                    // quotient sums the mass of branches whose targets
                    // merged, so the reached-class mass is a positive
                    // integer count here, not necessarily one.
                    next.push(t.dst);
                }
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
        }
        for &s in &frontier {
            for t in &out[s] {
                let (u, vv) = match &t.label {
                    ActionLabel::Out { chan, value: Some(Value::Pair(a, b)) }
                        if chan == CHAN_LOG =>
                    {
                        (decode_slot(a), decode_slot(b))
                    }
                    other => {
                        return Err(shape_err(
                            block,
                            format!("expected a log action, saw `{other}`"),
                        ))
                    }
                };
                let (Some(attacker), Some(defender)) = (u, vv) else {
                    return Err(shape_err(block, "malformed log payload".into()));
                };
                if (t.prob - 1.0).abs() > bisim::EPS_PROB {
                    return Err(shape_err(
                        block,
                        format!("log action with probability {}", t.prob),
                    ));
                }
                // Dead branch: the logged pair has no recorded transition.
                if out[t.dst].is_empty() {
                    continue;
                }
                for rec in &out[t.dst] {
                    let weight = match &rec.label {
                        ActionLabel::Out { chan, value: Some(Value::Pair(a, b)) }
                            if chan == CHAN_REC =>
                        {
                            match (decode_real(a), decode_real(b)) {
                                (Some(x), Some(y)) => (x, y),
                                _ => {
                                    return Err(shape_err(
                                        block,
                                        "malformed payoff payload".into(),
                                    ))
                                }
                            }
                        }
                        other => {
                            return Err(shape_err(
                                block,
                                format!("expected a payoff record, saw `{other}`"),
                            ))
                        }
                    };
                    let Some(&dst) = block_to_vertex.get(&rec.dst) else {
                        return Err(shape_err(
                            block,
                            "payoff record does not land on a game class".into(),
                        ));
                    };
                    edges.push(GameEdge {
                        src: v,
                        dst,
                        act: ActionPair {
                            attacker: attacker.clone(),
                            defender: defender.clone(),
                        },
                        prob: rec.prob,
                        weight,
                    });
                }
            }
        }
    }

    Ok(GameGraph::new(vertices, edges))
}

fn decode_slot(v: &Value) -> Option<ActionSlot> {
    match v {
        Value::Pair(i, n) => match (&**i, &**n) {
            (Value::Int(i), Value::Name(n)) => Some(ActionSlot {
                index: *i as u8,
                name: n.clone(),
            }),
            _ => None,
        },
        _ => None,
    }
}

fn decode_real(v: &Value) -> Option<f64> {
    match v {
        Value::Real(x) => Some(x.into_inner()),
        Value::Int(i) => Some(*i as f64),
        _ => None,
    }
}

/// Label of the game-level transition relation used by the direct route:
/// everything observable about one interaction round except the landing
/// state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoundLabel {
    act: ActionPair,
    weight: (NotNan<f64>, NotNan<f64>),
}

/// Build the game graph directly from the specification rows, minimizing
/// with the same bisimulation machinery at the game level.
pub fn build_game_graph_direct(spec: &GameSpec) -> Result<GameGraph, ModelError> {
    let idx_of: BTreeMap<u32, usize> = spec
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id, i))
        .collect();
    let states: Vec<LtsState> = spec
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| LtsState {
            name: s.name.clone(),
            game_ids: vec![i as u32],
        })
        .collect();
    let mut transitions = Vec::new();
    for st in &spec.states {
        let src = idx_of[&st.id];
        for ((a, d), row) in &st.rows {
            let act = ActionPair {
                attacker: st.attacker[*a as usize - 1].clone(),
                defender: st.defender[*d as usize - 1].clone(),
            };
            for (&to, &p) in &row.dests {
                transitions.push(LtsTransition {
                    src,
                    label: RoundLabel {
                        act: act.clone(),
                        weight: (
                            NotNan::new(row.payoff.0).expect("payoff"),
                            NotNan::new(row.payoff.1).expect("payoff"),
                        ),
                    },
                    prob: p,
                    dst: idx_of[&to],
                });
            }
        }
    }
    let lts = Lts {
        states,
        transitions,
    };
    let partition = bisim::coarsest_bisimulation(&lts);
    let quotient = bisim::quotient(&lts, &partition)?;

    let mut order: Vec<usize> = (0..quotient.state_count()).collect();
    order.sort_by_key(|&s| quotient.states[s].game_ids[0]);
    let vertex_of: BTreeMap<usize, usize> =
        order.iter().enumerate().map(|(v, &s)| (s, v)).collect();
    let vertices: Vec<GameVertex> = order
        .iter()
        .map(|&s| GameVertex {
            members: quotient.states[s].game_ids.iter().map(|&g| g + 1).collect(),
            name: quotient.states[s].name.clone(),
        })
        .collect();
    let edges: Vec<GameEdge> = quotient
        .transitions
        .iter()
        .map(|t| GameEdge {
            src: vertex_of[&t.src],
            dst: vertex_of[&t.dst],
            act: t.label.act.clone(),
            prob: t.prob,
            weight: (t.label.weight.0.into_inner(), t.label.weight.1.into_inner()),
        })
        .collect();
    Ok(GameGraph::new(vertices, edges))
}

/// Run the full semantic pipeline: processes, transition system, coarsest
/// bisimulation, quotient, contraction. Also returns the intermediate
/// artifacts for inspection.
pub struct Pipeline {
    pub ts: Lts<ActionLabel>,
    pub partition: Partition,
    pub quotient: Lts<ActionLabel>,
    pub graph: GameGraph,
}

pub fn semantic_pipeline(spec: &GameSpec, cap: usize) -> Result<Pipeline, ModelError> {
    let procs = build_processes(spec);
    let ts = build_transition_system(&procs, cap)?;
    let partition = bisim::coarsest_bisimulation(&ts);
    let quotient = bisim::quotient(&ts, &partition)?;
    let graph = contract_to_game_graph(&quotient)?;
    Ok(Pipeline {
        ts,
        partition,
        quotient,
        graph,
    })
}

/// Check that two game graphs are equal up to vertex relabelling, matching
/// vertices by their member sets and comparing each vertex's edge multiset
/// on all three labels (probabilities within 1e-9).
pub fn graphs_isomorphic(a: &GameGraph, b: &GameGraph) -> Result<(), String> {
    if a.vertex_count() != b.vertex_count() {
        return Err(format!(
            "vertex counts differ: {} vs {}",
            a.vertex_count(),
            b.vertex_count()
        ));
    }
    let key = |g: &GameGraph, v: usize| g.vertices[v].members.clone();
    let map_b: BTreeMap<Vec<u32>, usize> =
        (0..b.vertex_count()).map(|v| (key(b, v), v)).collect();
    let mut a_to_b = Vec::with_capacity(a.vertex_count());
    for v in 0..a.vertex_count() {
        match map_b.get(&key(a, v)) {
            Some(&w) => a_to_b.push(w),
            None => {
                return Err(format!(
                    "no vertex with members {:?} in the second graph",
                    key(a, v)
                ))
            }
        }
    }
    type EdgeKey<'a> = (usize, &'a ActionPair, i64, i64, i64);
    for v in 0..a.vertex_count() {
        let mut ea: Vec<EdgeKey> = a
            .outgoing(v)
            .iter()
            .map(|&i| {
                let e = &a.edges[i];
                (
                    a_to_b[e.dst],
                    &e.act,
                    (e.prob * 1e9).round() as i64,
                    (e.weight.0 * 1e9).round() as i64,
                    (e.weight.1 * 1e9).round() as i64,
                )
            })
            .collect();
        let mut eb: Vec<EdgeKey> = b
            .outgoing(a_to_b[v])
            .iter()
            .map(|&i| {
                let e = &b.edges[i];
                (
                    e.dst,
                    &e.act,
                    (e.prob * 1e9).round() as i64,
                    (e.weight.0 * 1e9).round() as i64,
                    (e.weight.1 * 1e9).round() as i64,
                )
            })
            .collect();
        ea.sort();
        eb.sort();
        if ea != eb {
            return Err(format!(
                "edge multisets differ at vertex with members {:?}",
                key(a, v)
            ));
        }
    }
    Ok(())
}
