//! Equilibrium and social-optimum strategy synthesis on the game graph.
//!
//! A strategy fixes one outgoing edge per vertex, so from every vertex the
//! play is a lasso: a stem into a cycle. Payoffs discount each step by the
//! discount factor times the edge's transition probability, which makes
//! every lasso value a convergent geometric series with a closed form.
//!
//! Strategies are computed component by component over the condensation
//! DAG, sinks first. Inside a component a value iteration refreshes edge
//! labels from the current vertex values and re-selects edges until the
//! value vector is stable; the refresh operator is a contraction with
//! modulus at most the discount factor, which the iteration monitors.
//! Edges leaving a component absorb the already-certified value of their
//! target into a frozen label and act as self-loops from then on. Ties in
//! the final edge selection branch into separate candidate strategies;
//! every candidate is certified against the defining equilibrium equations
//! with exactly resolved lasso payoffs before it is emitted.
//!
//! Selection rules:
//! * Nash: within each attacker-action group keep the edges maximizing the
//!   defender label, then across the survivors keep the edges maximizing
//!   the attacker label.
//! * Social optimum: keep the edges minimizing the absolute-sum label.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::abstraction::{processing_order, ComponentDag};
use crate::model::{GameEdge, GameGraph};

/// Comparison tolerance for argmax/argmin tie sets.
pub const TIE_EPS: f64 = 1e-9;
/// Slack allowed in the contraction monitor.
pub const CONTRACTION_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub beta: f64,
    /// Sup-norm fixpoint tolerance of the value iteration.
    pub eps_fix: f64,
    pub max_iter: usize,
    /// Upper bound on candidate strategies kept at any point.
    pub tie_cap: usize,
    /// Tolerance of the definitional certification of emitted strategies.
    pub cert_tol: f64,
}

impl SolveOptions {
    pub fn new(beta: f64) -> Self {
        SolveOptions {
            beta,
            eps_fix: 1e-9,
            max_iter: 10_000,
            tie_cap: 64,
            cert_tol: 1e-6,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("vertex {0} has no outgoing edge")]
    DeadEndVertex(usize),
    #[error("discount factor {0} outside the open interval (0,1)")]
    BetaRange(f64),
    #[error("value iteration on component {component:?} did not converge within {iterations} iterations")]
    NonConvergence {
        component: Vec<usize>,
        iterations: usize,
    },
    #[error("contraction violated on component {component:?} at iteration {iteration}: delta {current} > beta*{previous} + eps")]
    ContractionViolated {
        component: Vec<usize>,
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("no tie combination of component {component:?} certifies; this indicates an internal invariant violation")]
    NoCertifiedSolution { component: Vec<usize> },
    #[error("execution is not a lasso: {0}")]
    MalformedExecution(String),
}

/// One synthesized strategy: a chosen edge, the attacker/defender value,
/// and the absolute-sum value per vertex.
#[derive(Clone, Debug)]
pub struct StrategyMap {
    pub chosen: Vec<usize>,
    pub payoffs: Vec<(f64, f64)>,
    pub social: Vec<f64>,
}

/// Convergence record of one component's value iteration.
#[derive(Clone, Debug)]
pub struct IterationStats {
    /// Members of the component solved.
    pub component: Vec<usize>,
    /// Successive sup-norm differences of the value vector.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    /// Analytic iteration bound derived from the first difference.
    pub bound: usize,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub strategies: Vec<StrategyMap>,
    pub stats: Vec<IterationStats>,
    /// Set when the tie cap truncated the candidate set.
    pub truncated: bool,
}

// ---------------------------------------------------------------------------
// Valuations
// ---------------------------------------------------------------------------

/// Vector operations shared by the pair-valued and scalar iterations.
trait Valuation: Copy + std::fmt::Debug {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn sup_diff(self, other: Self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct PairValue {
    a: f64,
    d: f64,
}

impl Valuation for PairValue {
    fn zero() -> Self {
        PairValue { a: 0.0, d: 0.0 }
    }
    fn add(self, o: Self) -> Self {
        PairValue {
            a: self.a + o.a,
            d: self.d + o.d,
        }
    }
    fn scale(self, k: f64) -> Self {
        PairValue {
            a: self.a * k,
            d: self.d * k,
        }
    }
    fn sup_diff(self, o: Self) -> f64 {
        (self.a - o.a).abs().max((self.d - o.d).abs())
    }
}

impl Valuation for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn sup_diff(self, o: Self) -> f64 {
        (self - o).abs()
    }
}

/// Selection and certification rule of one solving mode.
trait Mode {
    type V: Valuation;
    fn edge_weight(edge: &GameEdge) -> Self::V;
    /// Tie set (positions into `edge_ids`) selected from the labels.
    fn select(graph: &GameGraph, edge_ids: &[usize], labels: &[Self::V]) -> Vec<usize>;
    /// Definitional check of a chosen edge given exact payoffs everywhere.
    fn certify(
        graph: &GameGraph,
        vertex: usize,
        chosen_edge: usize,
        payoff_of: &dyn Fn(usize) -> Self::V,
        beta: f64,
        tol: f64,
    ) -> bool;
}

struct NashMode;

impl NashMode {
    fn alternatives(
        graph: &GameGraph,
        vertex: usize,
        payoff_of: &dyn Fn(usize) -> PairValue,
        beta: f64,
    ) -> Vec<(usize, PairValue)> {
        graph
            .outgoing(vertex)
            .iter()
            .map(|&e| {
                let edge = &graph.edges[e];
                let succ = payoff_of(edge.dst);
                (
                    e,
                    PairValue {
                        a: edge.weight.0 + beta * edge.prob * succ.a,
                        d: edge.weight.1 + beta * edge.prob * succ.d,
                    },
                )
            })
            .collect()
    }
}

impl Mode for NashMode {
    type V = PairValue;

    fn edge_weight(edge: &GameEdge) -> PairValue {
        PairValue {
            a: edge.weight.0,
            d: edge.weight.1,
        }
    }

    fn select(graph: &GameGraph, edge_ids: &[usize], labels: &[PairValue]) -> Vec<usize> {
        // Defender filter: per attacker-action group keep the defender-best
        // edges, then the attacker picks across the survivors.
        let mut group_max: BTreeMap<(u8, &str), f64> = BTreeMap::new();
        for (i, &e) in edge_ids.iter().enumerate() {
            let act = &graph.edges[e].act.attacker;
            let entry = group_max
                .entry((act.index, act.name.as_str()))
                .or_insert(f64::NEG_INFINITY);
            *entry = entry.max(labels[i].d);
        }
        let survivors: Vec<usize> = (0..edge_ids.len())
            .filter(|&i| {
                let act = &graph.edges[edge_ids[i]].act.attacker;
                labels[i].d >= group_max[&(act.index, act.name.as_str())] - TIE_EPS
            })
            .collect();
        let max_a = survivors
            .iter()
            .map(|&i| labels[i].a)
            .fold(f64::NEG_INFINITY, f64::max);
        survivors
            .into_iter()
            .filter(|&i| labels[i].a >= max_a - TIE_EPS)
            .collect()
    }

    fn certify(
        graph: &GameGraph,
        vertex: usize,
        chosen_edge: usize,
        payoff_of: &dyn Fn(usize) -> PairValue,
        beta: f64,
        tol: f64,
    ) -> bool {
        let value = payoff_of(vertex);
        let alts = Self::alternatives(graph, vertex, payoff_of, beta);
        let mut group_max: BTreeMap<(u8, &str), f64> = BTreeMap::new();
        for (e, alt) in &alts {
            let act = &graph.edges[*e].act.attacker;
            let entry = group_max
                .entry((act.index, act.name.as_str()))
                .or_insert(f64::NEG_INFINITY);
            *entry = entry.max(alt.d);
        }
        // Defender equality: within the chosen edge's attacker group nothing
        // offers the defender more than the strategy achieves.
        let chosen_act = &graph.edges[chosen_edge].act.attacker;
        let chosen_group_max = group_max[&(chosen_act.index, chosen_act.name.as_str())];
        if (value.d - chosen_group_max).abs() > tol {
            return false;
        }
        // Attacker equality over the defender-filtered alternatives.
        let max_a = alts
            .iter()
            .filter(|(e, alt)| {
                let act = &graph.edges[*e].act.attacker;
                alt.d >= group_max[&(act.index, act.name.as_str())] - TIE_EPS
            })
            .map(|(_, alt)| alt.a)
            .fold(f64::NEG_INFINITY, f64::max);
        (value.a - max_a).abs() <= tol
    }
}

struct SocialMode;

impl Mode for SocialMode {
    type V = f64;

    fn edge_weight(edge: &GameEdge) -> f64 {
        edge.social_weight()
    }

    fn select(_graph: &GameGraph, edge_ids: &[usize], labels: &[f64]) -> Vec<usize> {
        let min = labels.iter().copied().fold(f64::INFINITY, f64::min);
        (0..edge_ids.len())
            .filter(|&i| labels[i] <= min + TIE_EPS)
            .collect()
    }

    fn certify(
        graph: &GameGraph,
        vertex: usize,
        _chosen_edge: usize,
        payoff_of: &dyn Fn(usize) -> f64,
        beta: f64,
        tol: f64,
    ) -> bool {
        let value = payoff_of(vertex);
        let min = graph
            .outgoing(vertex)
            .iter()
            .map(|&e| {
                let edge = &graph.edges[e];
                edge.social_weight() + beta * edge.prob * payoff_of(edge.dst)
            })
            .fold(f64::INFINITY, f64::min);
        (value - min).abs() <= tol
    }
}

// ---------------------------------------------------------------------------
// Component value iteration
// ---------------------------------------------------------------------------

/// Local view of one member's outgoing edge during a component solve.
#[derive(Clone, Copy, Debug)]
enum LocalTarget<V> {
    /// Destination inside the component (position in `members`).
    Intra(usize),
    /// Exit edge with its absorbed constant label: the exit value is final,
    /// so the label is never refreshed again.
    Frozen(V),
}

#[derive(Clone, Debug)]
struct LocalEdge<V> {
    edge: usize,
    weight: V,
    discount: f64,
    target: LocalTarget<V>,
}

struct ComponentSolution<V> {
    chosen: BTreeMap<usize, usize>,
    payoffs: BTreeMap<usize, V>,
}

type ComponentResult<V> = (Vec<ComponentSolution<V>>, IterationStats, bool);

fn solve_component<M: Mode>(
    graph: &GameGraph,
    members: &[usize],
    outside: &dyn Fn(usize) -> M::V,
    opts: &SolveOptions,
) -> Result<ComponentResult<M::V>, SolverError> {
    let local_of: BTreeMap<usize, usize> =
        members.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // Exit edges absorb their successor's certified value into a frozen
    // label; intra edges keep their plain weight as the initial label.
    let locals: Vec<Vec<LocalEdge<M::V>>> = members
        .iter()
        .map(|&v| {
            graph
                .outgoing(v)
                .iter()
                .map(|&e| {
                    let edge = &graph.edges[e];
                    let discount = opts.beta * edge.prob;
                    let weight = M::edge_weight(edge);
                    let target = match local_of.get(&edge.dst) {
                        Some(&d) => LocalTarget::Intra(d),
                        None => LocalTarget::Frozen(
                            weight.add(outside(edge.dst).scale(discount)),
                        ),
                    };
                    LocalEdge {
                        edge: e,
                        weight,
                        discount,
                        target,
                    }
                })
                .collect()
        })
        .collect();

    for (i, l) in locals.iter().enumerate() {
        if l.is_empty() {
            return Err(SolverError::DeadEndVertex(members[i]));
        }
    }

    let labels_at = |values: Option<&Vec<M::V>>| -> Vec<Vec<M::V>> {
        locals
            .iter()
            .map(|edges| {
                edges
                    .iter()
                    .map(|le| match (&le.target, values) {
                        (LocalTarget::Frozen(v), _) => *v,
                        (LocalTarget::Intra(_), None) => le.weight,
                        (LocalTarget::Intra(d), Some(vals)) => {
                            le.weight.add(vals[*d].scale(le.discount))
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let select_values = |labels: &[Vec<M::V>]| -> Vec<M::V> {
        members
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ids: Vec<usize> = locals[i].iter().map(|le| le.edge).collect();
                let tie = M::select(graph, &ids, &labels[i]);
                let _ = v;
                labels[i][tie[0]]
            })
            .collect()
    };

    // Iterate to the fixpoint, recording sup-norm differences.
    let mut values = select_values(&labels_at(None));
    let mut deltas = Vec::new();
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(SolverError::NonConvergence {
                component: members.to_vec(),
                iterations: opts.max_iter,
            });
        }
        let next = select_values(&labels_at(Some(&values)));
        let delta = members
            .iter()
            .enumerate()
            .map(|(i, _)| next[i].sup_diff(values[i]))
            .fold(0.0f64, f64::max);
        if let Some(&prev) = deltas.last() {
            if delta > opts.beta * prev + CONTRACTION_EPS {
                return Err(SolverError::ContractionViolated {
                    component: members.to_vec(),
                    iteration: iterations,
                    previous: prev,
                    current: delta,
                });
            }
        }
        deltas.push(delta);
        values = next;
        if delta < opts.eps_fix {
            break;
        }
    }
    let bound = iteration_bound(opts.beta, opts.eps_fix, deltas.first().copied().unwrap_or(0.0));
    let stats = IterationStats {
        component: members.to_vec(),
        deltas,
        iterations,
        bound,
    };

    // Final selection at the fixpoint labels, then branch over ties. Tied
    // edges that agree on action names, destination, probability, and
    // weight are interchangeable (repeated same-named action slots), so
    // each tie set keeps one representative per distinct content.
    let labels = labels_at(Some(&values));
    let ties: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let ids: Vec<usize> = locals[i].iter().map(|le| le.edge).collect();
            let tie = M::select(graph, &ids, &labels[i]);
            let mut seen: Vec<String> = Vec::new();
            let mut distinct = Vec::new();
            for pos in tie {
                let e = &graph.edges[ids[pos]];
                let key = format!(
                    "{}|{}|{}|{:.9}|{:.9}|{:.9}",
                    e.act.attacker.name, e.act.defender.name, e.dst, e.prob, e.weight.0, e.weight.1
                );
                if !seen.contains(&key) {
                    seen.push(key);
                    distinct.push(pos);
                }
            }
            distinct
        })
        .collect();

    let mut solutions = Vec::new();
    let mut truncated = false;
    let mut combo: Vec<usize> = vec![0; members.len()];
    let mut budget = opts.tie_cap.saturating_mul(1024).max(1 << 16);
    'outer: loop {
        if budget == 0 {
            truncated = true;
            break;
        }
        budget -= 1;
        let choice: Vec<usize> = (0..members.len()).map(|i| ties[i][combo[i]]).collect();
        if let Some(sol) = certify_combination::<M>(graph, members, &locals, &choice, outside, opts)
        {
            solutions.push(sol);
            if solutions.len() >= opts.tie_cap {
                truncated = true;
                break;
            }
        }
        // Odometer over the tie sets.
        for i in 0..members.len() {
            combo[i] += 1;
            if combo[i] < ties[i].len() {
                continue 'outer;
            }
            combo[i] = 0;
        }
        break;
    }
    if solutions.is_empty() {
        return Err(SolverError::NoCertifiedSolution {
            component: members.to_vec(),
        });
    }
    Ok((solutions, stats, truncated))
}

/// Resolve the exact lasso payoffs of a chosen subgraph restricted to one
/// component (frozen exits are absorbing), then check the defining
/// equations at every member.
fn certify_combination<M: Mode>(
    graph: &GameGraph,
    members: &[usize],
    locals: &[Vec<LocalEdge<M::V>>],
    choice: &[usize],
    outside: &dyn Fn(usize) -> M::V,
    opts: &SolveOptions,
) -> Option<ComponentSolution<M::V>> {
    let resolved = resolve_values::<M::V>(members.len(), &|i| {
        let le = &locals[i][choice[i]];
        match le.target {
            LocalTarget::Frozen(v) => ResolveStep::Absorb(v),
            LocalTarget::Intra(d) => ResolveStep::Step {
                weight: le.weight,
                discount: le.discount,
                next: d,
            },
        }
    });

    let local_of: BTreeMap<usize, usize> =
        members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let payoff_of = |v: usize| -> M::V {
        match local_of.get(&v) {
            Some(&i) => resolved[i],
            None => outside(v),
        }
    };

    for (i, &v) in members.iter().enumerate() {
        let chosen_edge = locals[i][choice[i]].edge;
        if !M::certify(graph, v, chosen_edge, &payoff_of, opts.beta, opts.cert_tol) {
            return None;
        }
    }

    Some(ComponentSolution {
        chosen: members
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, locals[i][choice[i]].edge))
            .collect(),
        payoffs: members
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, resolved[i]))
            .collect(),
    })
}

enum ResolveStep<V> {
    Absorb(V),
    Step { weight: V, discount: f64, next: usize },
}

/// Exact values of an out-degree-one functional graph with absorbing
/// vertices: walk each lasso once, solving the terminal cycle in closed
/// form and unwinding stems backwards.
fn resolve_values<V: Valuation>(n: usize, step: &dyn Fn(usize) -> ResolveStep<V>) -> Vec<V> {
    let mut done: Vec<Option<V>> = vec![None; n];
    for start in 0..n {
        if done[start].is_some() {
            continue;
        }
        // Walk forward, recording the path until something known is hit.
        let mut path: Vec<usize> = Vec::new();
        let mut pos_in_path: BTreeMap<usize, usize> = BTreeMap::new();
        let mut cur = start;
        let terminal_value: V;
        let unwound_from: usize;
        loop {
            if let Some(v) = done[cur] {
                terminal_value = v;
                unwound_from = path.len();
                break;
            }
            if let Some(&k) = pos_in_path.get(&cur) {
                // Cycle from path[k..]; solve it in closed form:
                // value = B / (1 - D) with B the discounted weight sum
                // along one lap and D the product of the discounts.
                let cycle = &path[k..];
                let mut b = V::zero();
                let mut factor = 1.0;
                for &p in cycle {
                    let ResolveStep::Step {
                        weight, discount, ..
                    } = step(p)
                    else {
                        unreachable!("cycle vertices take steps")
                    };
                    b = b.add(weight.scale(factor));
                    factor *= discount;
                }
                debug_assert!(
                    factor < 1.0,
                    "discounted cycle factor must stay below one"
                );
                let head = b.scale(1.0 / (1.0 - factor));
                // Propagate around the cycle backwards from the head.
                done[cycle[0]] = Some(head);
                for idx in (1..cycle.len()).rev() {
                    let ResolveStep::Step {
                        weight, discount, ..
                    } = step(cycle[idx])
                    else {
                        unreachable!()
                    };
                    let succ = done[cycle[(idx + 1) % cycle.len()]].expect("already set");
                    done[cycle[idx]] = Some(weight.add(succ.scale(discount)));
                }
                terminal_value = head;
                unwound_from = k;
                break;
            }
            match step(cur) {
                ResolveStep::Absorb(v) => {
                    done[cur] = Some(v);
                    terminal_value = v;
                    unwound_from = path.len();
                    break;
                }
                ResolveStep::Step { next, .. } => {
                    pos_in_path.insert(cur, path.len());
                    path.push(cur);
                    cur = next;
                }
            }
        }
        // Unwind the stem backwards.
        let mut value = terminal_value;
        for idx in (0..unwound_from).rev() {
            let ResolveStep::Step {
                weight, discount, ..
            } = step(path[idx])
            else {
                unreachable!("stem vertices take steps")
            };
            value = weight.add(value.scale(discount));
            done[path[idx]] = Some(value);
        }
    }
    done.into_iter().map(|v| v.expect("all resolved")).collect()
}

/// Iteration-count bound implied by the contraction modulus: once the first
/// difference is known, the fixpoint tolerance is reached within
/// `ceil(log(eps/delta0)/log(beta)) + 1` further iterations.
pub fn iteration_bound(beta: f64, eps: f64, delta0: f64) -> usize {
    if delta0 <= eps {
        1
    } else {
        ((eps / delta0).ln() / beta.ln()).ceil() as usize + 1
    }
}

// ---------------------------------------------------------------------------
// Global backward induction
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Partial<V> {
    chosen: Vec<Option<usize>>,
    payoffs: Vec<Option<V>>,
}

/// Raw driver result: per candidate the full choice map and value vector,
/// plus iteration statistics and the truncation flag.
type DriveResult<V> = (Vec<(Vec<usize>, Vec<V>)>, Vec<IterationStats>, bool);

fn drive<M: Mode>(
    graph: &GameGraph,
    dag: &ComponentDag,
    opts: &SolveOptions,
) -> Result<DriveResult<M::V>, SolverError> {
    if !(opts.beta > 0.0 && opts.beta < 1.0) {
        return Err(SolverError::BetaRange(opts.beta));
    }
    let n = graph.vertex_count();
    let order = processing_order(dag);
    let mut partials: Vec<Partial<M::V>> = vec![Partial {
        chosen: vec![None; n],
        payoffs: vec![None; n],
    }];
    let mut stats = Vec::new();
    let mut truncated = false;

    for &c in &order {
        let members = dag.components[c].members.clone();
        let mut extended: Vec<Partial<M::V>> = Vec::new();
        for partial in &partials {
            let payoffs = partial.payoffs.clone();
            let outside = move |v: usize| -> M::V {
                payoffs[v].expect("successor component is solved before its predecessors")
            };
            let (solutions, stat, comp_truncated) = solve_component::<M>(graph, &members, &outside, opts)?;
            stats.push(stat);
            truncated |= comp_truncated;
            for sol in solutions {
                let mut next = partial.clone();
                for (&v, &e) in &sol.chosen {
                    next.chosen[v] = Some(e);
                }
                for (&v, &val) in &sol.payoffs {
                    next.payoffs[v] = Some(val);
                }
                extended.push(next);
            }
        }
        // Merge candidates that are indistinguishable at the reporting
        // level: same action names, destination, and payoffs everywhere
        // solved so far. Repeated same-named action slots collapse here.
        let mut seen: Vec<(Vec<u8>, usize)> = Vec::new();
        let mut deduped = Vec::new();
        for p in extended {
            let key = partial_key::<M>(graph, &p);
            if seen.iter().any(|(k, _)| *k == key) {
                continue;
            }
            seen.push((key, deduped.len()));
            deduped.push(p);
        }
        if deduped.len() > opts.tie_cap {
            deduped.truncate(opts.tie_cap);
            truncated = true;
        }
        partials = deduped;
    }

    let mut out = Vec::new();
    for p in partials {
        let chosen: Vec<usize> = p
            .chosen
            .iter()
            .map(|c| c.expect("all components solved"))
            .collect();
        let payoffs: Vec<M::V> = p
            .payoffs
            .iter()
            .map(|v| v.expect("all components solved"))
            .collect();
        out.push((chosen, payoffs));
    }
    Ok((out, stats, truncated))
}

fn partial_key<M: Mode>(graph: &GameGraph, p: &Partial<M::V>) -> Vec<u8> {
    use std::io::Write;
    let mut key = Vec::new();
    for v in 0..graph.vertex_count() {
        match p.chosen[v] {
            None => key.push(0),
            Some(e) => {
                let edge = &graph.edges[e];
                write!(
                    key,
                    "|{}:{}>{}@{:.9}",
                    edge.act.attacker.name, edge.act.defender.name, edge.dst, edge.prob
                )
                .unwrap();
                if let Some(val) = &p.payoffs[v] {
                    write!(key, "={:?}", val).unwrap();
                }
            }
        }
    }
    key
}

/// Full-graph exact values under a complete choice map (pure lassos, no
/// absorbing exits).
fn full_values<V: Valuation>(
    graph: &GameGraph,
    chosen: &[usize],
    beta: f64,
    weight: &dyn Fn(&GameEdge) -> V,
) -> Vec<V> {
    resolve_values::<V>(graph.vertex_count(), &|v| {
        let edge = &graph.edges[chosen[v]];
        ResolveStep::Step {
            weight: weight(edge),
            discount: beta * edge.prob,
            next: edge.dst,
        }
    })
}

/// Compute every Nash-equilibrium strategy of the game graph.
///
/// Candidates are produced by backward induction with tie branching and
/// only emitted when their exactly resolved lasso payoffs satisfy the
/// equilibrium equations at every vertex.
pub fn nash_strategies(
    graph: &GameGraph,
    dag: &ComponentDag,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolverError> {
    let (raw, stats, truncated) = drive::<NashMode>(graph, dag, opts)?;
    let mut strategies: Vec<StrategyMap> = raw
        .into_iter()
        .map(|(chosen, payoffs)| {
            let social = full_values::<f64>(graph, &chosen, opts.beta, &|e| e.social_weight());
            StrategyMap {
                payoffs: payoffs.into_iter().map(|p| (p.a, p.d)).collect(),
                social,
                chosen,
            }
        })
        .collect();
    sort_strategies(graph, &mut strategies);
    Ok(SolveOutcome {
        strategies,
        stats,
        truncated,
    })
}

/// Compute every social-optimal strategy of the game graph: the choice map
/// minimizing the discounted absolute-sum payoff from every vertex.
pub fn social_strategies(
    graph: &GameGraph,
    dag: &ComponentDag,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolverError> {
    let (raw, stats, truncated) = drive::<SocialMode>(graph, dag, opts)?;
    let mut strategies: Vec<StrategyMap> = raw
        .into_iter()
        .map(|(chosen, social)| {
            let payoffs = full_values::<PairValue>(graph, &chosen, opts.beta, &|e| PairValue {
                a: e.weight.0,
                d: e.weight.1,
            });
            StrategyMap {
                payoffs: payoffs.into_iter().map(|p| (p.a, p.d)).collect(),
                social,
                chosen,
            }
        })
        .collect();
    sort_strategies(graph, &mut strategies);
    Ok(SolveOutcome {
        strategies,
        stats,
        truncated,
    })
}

fn sort_strategies(graph: &GameGraph, strategies: &mut [StrategyMap]) {
    strategies.sort_by(|x, y| {
        let kx: Vec<(&str, &str, usize)> = x
            .chosen
            .iter()
            .map(|&e| {
                let ed = &graph.edges[e];
                (
                    ed.act.attacker.name.as_str(),
                    ed.act.defender.name.as_str(),
                    ed.dst,
                )
            })
            .collect();
        let ky: Vec<(&str, &str, usize)> = y
            .chosen
            .iter()
            .map(|&e| {
                let ed = &graph.edges[e];
                (
                    ed.act.attacker.name.as_str(),
                    ed.act.defender.name.as_str(),
                    ed.dst,
                )
            })
            .collect();
        kx.cmp(&ky)
    });
}

// ---------------------------------------------------------------------------
// Executions
// ---------------------------------------------------------------------------

/// A lasso in the game graph: a stem of edges followed by a cycle starting
/// at `cycle_from` (an index into `edges`).
#[derive(Clone, Debug)]
pub struct Execution {
    pub edges: Vec<usize>,
    pub cycle_from: usize,
}

impl Execution {
    pub fn start(&self, graph: &GameGraph) -> usize {
        graph.edges[self.edges[0]].src
    }

    fn validate(&self, graph: &GameGraph) -> Result<(), SolverError> {
        if self.edges.is_empty() || self.cycle_from >= self.edges.len() {
            return Err(SolverError::MalformedExecution(
                "empty edge list or cycle start out of range".into(),
            ));
        }
        for w in self.edges.windows(2) {
            if graph.edges[w[0]].dst != graph.edges[w[1]].src {
                return Err(SolverError::MalformedExecution(
                    "edges are not consecutive".into(),
                ));
            }
        }
        let last = &graph.edges[*self.edges.last().unwrap()];
        if last.dst != graph.edges[self.edges[self.cycle_from]].src {
            return Err(SolverError::MalformedExecution(
                "terminal segment does not close a cycle".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &e in &self.edges {
            if !seen.insert(graph.edges[e].src) {
                return Err(SolverError::MalformedExecution(
                    "a vertex has out-degree above one".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The execution induced by a complete choice map from `start`.
pub fn strategy_execution(graph: &GameGraph, chosen: &[usize], start: usize) -> Execution {
    let mut edges = Vec::new();
    let mut pos: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cur = start;
    loop {
        if let Some(&k) = pos.get(&cur) {
            return Execution {
                edges,
                cycle_from: k,
            };
        }
        pos.insert(cur, edges.len());
        let e = chosen[cur];
        edges.push(e);
        cur = graph.edges[e].dst;
    }
}

/// Closed-form discounted payoff pair of a lasso: the terminal cycle is the
/// limit of a geometric series, the stem unwinds backwards.
pub fn execution_payoff(
    exec: &Execution,
    graph: &GameGraph,
    beta: f64,
) -> Result<(f64, f64), SolverError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SolverError::BetaRange(beta));
    }
    exec.validate(graph)?;
    let v = lasso_value::<PairValue>(exec, graph, beta, &|e| PairValue {
        a: e.weight.0,
        d: e.weight.1,
    });
    Ok((v.a, v.d))
}

/// Closed-form discounted absolute-sum payoff of a lasso.
pub fn execution_social_payoff(
    exec: &Execution,
    graph: &GameGraph,
    beta: f64,
) -> Result<f64, SolverError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SolverError::BetaRange(beta));
    }
    exec.validate(graph)?;
    Ok(lasso_value::<f64>(exec, graph, beta, &|e| e.social_weight()))
}

fn lasso_value<V: Valuation>(
    exec: &Execution,
    graph: &GameGraph,
    beta: f64,
    weight: &dyn Fn(&GameEdge) -> V,
) -> V {
    let mut cycle_sum = V::zero();
    let mut factor = 1.0;
    for &e in &exec.edges[exec.cycle_from..] {
        let edge = &graph.edges[e];
        cycle_sum = cycle_sum.add(weight(edge).scale(factor));
        factor *= beta * edge.prob;
    }
    debug_assert!(factor < 1.0);
    let mut value = cycle_sum.scale(1.0 / (1.0 - factor));
    for &e in exec.edges[..exec.cycle_from].iter().rev() {
        let edge = &graph.edges[e];
        value = weight(edge).add(value.scale(beta * edge.prob));
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::condense;
    use crate::game::ActionSlot;
    use crate::model::{ActionPair, GameVertex};

    fn slot(index: u8, name: &str) -> ActionSlot {
        ActionSlot {
            index,
            name: name.into(),
        }
    }

    fn graph(n: usize, edges: &[(usize, usize, &str, f64, f64, f64)]) -> GameGraph {
        // (src, dst, attacker action, prob, wa, wd); defender action fixed.
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
                    defender: slot(1, "v1"),
                },
                prob,
                weight: (wa, wd),
            })
            .collect();
        GameGraph::from_parts(vertices, ges)
    }

    fn solve_nash(g: &GameGraph, beta: f64) -> SolveOutcome {
        nash_strategies(g, &condense(g), &SolveOptions::new(beta)).unwrap()
    }

    fn solve_social(g: &GameGraph, beta: f64) -> SolveOutcome {
        social_strategies(g, &condense(g), &SolveOptions::new(beta)).unwrap()
    }

    #[test]
    fn self_loop_geometric_series() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 10.0, -10.0)]);
        let exec = Execution {
            edges: vec![0],
            cycle_from: 0,
        };
        let (a, d) = execution_payoff(&exec, &g, 0.5).unwrap();
        assert!((a - 20.0).abs() < 1e-12);
        assert!((d + 20.0).abs() < 1e-12);
    }

    #[test]
    fn self_loop_with_probability_discounts_more() {
        let g = graph(1, &[(0, 0, "a1", 0.9, 10.0, -10.0)]);
        let exec = Execution {
            edges: vec![0],
            cycle_from: 0,
        };
        let (a, d) = execution_payoff(&exec, &g, 0.5).unwrap();
        assert!((a - 10.0 / (1.0 - 0.45)).abs() < 1e-12);
        assert!((d + 10.0 / (1.0 - 0.45)).abs() < 1e-12);
    }

    #[test]
    fn stem_unwinds_once() {
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 5.0, -1.0),
                (1, 1, "a1", 1.0, 10.0, -10.0),
            ],
        );
        let exec = Execution {
            edges: vec![0, 1],
            cycle_from: 1,
        };
        let (a, d) = execution_payoff(&exec, &g, 0.5).unwrap();
        assert!((a - 15.0).abs() < 1e-12);
        assert!((d + 11.0).abs() < 1e-12);
    }

    #[test]
    fn nash_selection_filters_defender_then_attacker() {
        // Within group a1 the defender keeps (10,-5) over (20,-10); across
        // groups the attacker prefers 10 over 5.
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 10.0, -5.0),
                (0, 1, "a1", 1.0, 20.0, -10.0),
                (0, 1, "a2", 1.0, 5.0, -2.0),
                (1, 1, "a1", 1.0, 0.0, 0.0),
            ],
        );
        let labels: Vec<PairValue> = g.outgoing(0)
            .iter()
            .map(|&e| PairValue {
                a: g.edges[e].weight.0,
                d: g.edges[e].weight.1,
            })
            .collect();
        let ids: Vec<usize> = g.outgoing(0).to_vec();
        let tie = NashMode::select(&g, &ids, &labels);
        assert_eq!(tie.len(), 1);
        assert_eq!(g.edges[ids[tie[0]]].weight, (10.0, -5.0));
    }

    #[test]
    fn nash_selection_returns_attacker_level_ties() {
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 10.0, -5.0),
                (0, 1, "a2", 1.0, 10.0, -2.0),
                (1, 1, "a1", 1.0, 0.0, 0.0),
            ],
        );
        let ids: Vec<usize> = g.outgoing(0).to_vec();
        let labels: Vec<PairValue> = ids
            .iter()
            .map(|&e| PairValue {
                a: g.edges[e].weight.0,
                d: g.edges[e].weight.1,
            })
            .collect();
        let tie = NashMode::select(&g, &ids, &labels);
        assert_eq!(tie.len(), 2);
    }

    #[test]
    fn single_edge_is_selected() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 1.0, -1.0)]);
        let ids: Vec<usize> = g.outgoing(0).to_vec();
        let tie = NashMode::select(&g, &ids, &[PairValue { a: 1.0, d: -1.0 }]);
        assert_eq!(tie, vec![0]);
    }

    #[test]
    fn social_selection_is_argmin_with_ties() {
        let g = graph(
            1,
            &[
                (0, 0, "a1", 1.0, 7.0, 0.0),
                (0, 0, "a2", 1.0, 3.0, 0.0),
                (0, 0, "a3", 1.0, 9.0, 0.0),
            ],
        );
        let ids: Vec<usize> = g.outgoing(0).to_vec();
        let labels = vec![7.0, 3.0, 9.0];
        assert_eq!(SocialMode::select(&g, &ids, &labels), vec![1]);
        let labels = vec![3.0, 3.0, 9.0];
        assert_eq!(SocialMode::select(&g, &ids, &labels), vec![0, 1]);
    }

    #[test]
    fn single_self_loop_nash() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 10.0, -10.0)]);
        let out = solve_nash(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        let s = &out.strategies[0];
        assert!((s.payoffs[0].0 - 20.0).abs() < 1e-9);
        assert!((s.payoffs[0].1 + 20.0).abs() < 1e-9);
    }

    #[test]
    fn self_loop_beats_two_cycle_when_worth_more() {
        // A has a self-loop worth 6 and a 2-cycle worth ~2.667; the
        // attacker takes the self-loop.
        let g = graph(
            2,
            &[
                (0, 1, "a1", 1.0, 1.0, -1.0),
                (0, 0, "a2", 1.0, 3.0, -3.0),
                (1, 0, "a1", 1.0, 2.0, -2.0),
            ],
        );
        let out = solve_nash(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        let s = &out.strategies[0];
        assert_eq!(g.edges[s.chosen[0]].act.attacker.name, "a2");
        assert!((s.payoffs[0].0 - 6.0).abs() < 1e-9);
        // B's only edge leads to A: 2 + 0.5*6 = 5.
        assert!((s.payoffs[1].0 - 5.0).abs() < 1e-9);
    }

    #[test]
    fn exit_edges_absorb_successor_values() {
        // B is a terminal self-loop with value (10,-4); A's only edge exits
        // into B with w=(5,0), p=0.8, beta=0.5: absorbed (9,-1.6).
        let g = graph(
            2,
            &[
                (0, 1, "a1", 0.8, 5.0, 0.0),
                (1, 1, "a1", 1.0, 5.0, -2.0),
            ],
        );
        let out = solve_nash(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        let s = &out.strategies[0];
        assert!((s.payoffs[1].0 - 10.0).abs() < 1e-9);
        assert!((s.payoffs[1].1 + 4.0).abs() < 1e-9);
        assert!((s.payoffs[0].0 - 9.0).abs() < 1e-9);
        assert!((s.payoffs[0].1 + 1.6).abs() < 1e-9);
    }

    #[test]
    fn singleton_interior_component_compares_absorbed_values() {
        // A exits to two terminal loops under one attacker action; the
        // defender filter keeps the defender-better absorbed edge.
        let g = graph(
            3,
            &[
                (0, 1, "a1", 1.0, 0.0, 0.0),
                (0, 2, "a1", 1.0, 0.0, 0.0),
                (1, 1, "a1", 1.0, 1.0, -5.0),
                (2, 2, "a1", 1.0, 1.0, -1.0),
            ],
        );
        let out = solve_nash(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        let s = &out.strategies[0];
        assert_eq!(g.edges[s.chosen[0]].dst, 2);
    }

    #[test]
    fn social_single_self_loop() {
        let g = graph(1, &[(0, 0, "a1", 1.0, 10.0, -10.0)]);
        let out = solve_social(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        assert!((out.strategies[0].social[0] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn social_prefers_smaller_absolute_sum() {
        let g = graph(
            1,
            &[
                (0, 0, "a1", 1.0, 10.0, -10.0),
                (0, 0, "a2", 1.0, 20.0, -10.0),
            ],
        );
        let out = solve_social(&g, 0.5);
        assert_eq!(out.strategies.len(), 1);
        assert_eq!(out.strategies[0].chosen[0], 0);
        assert!((out.strategies[0].social[0] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn contraction_bound_holds_on_iterations() {
        let g = graph(
            2,
            &[
                (0, 1, "a1", 0.7, 4.0, -3.0),
                (1, 0, "a1", 0.9, 2.0, -1.0),
                (1, 1, "a2", 0.5, 6.0, -6.0),
            ],
        );
        let out = solve_nash(&g, 0.9);
        for st in &out.stats {
            assert!(st.iterations <= st.bound + 1);
            for w in st.deltas.windows(2) {
                assert!(w[1] <= 0.9 * w[0] + CONTRACTION_EPS);
            }
        }
    }

    #[test]
    fn dead_end_vertex_is_an_error() {
        let g = graph(2, &[(0, 1, "a1", 1.0, 1.0, -1.0)]);
        let err = nash_strategies(&g, &condense(&g), &SolveOptions::new(0.5)).unwrap_err();
        assert!(matches!(err, SolverError::DeadEndVertex(1)));
    }

    #[test]
    fn truncated_recursion_matches_closed_form() {
        let g = graph(
            2,
            &[
                (0, 1, "a1", 0.8, 5.0, -1.0),
                (1, 1, "a1", 0.9, 10.0, -10.0),
            ],
        );
        let exec = Execution {
            edges: vec![0, 1],
            cycle_from: 1,
        };
        let closed = execution_payoff(&exec, &g, 0.5).unwrap();
        let truncated = crate::oracle::truncated_execution_payoff(&exec, &g, 0.5, 200);
        assert!((closed.0 - truncated.0).abs() < 1e-9);
        assert!((closed.1 - truncated.1).abs() < 1e-9);
    }
}
