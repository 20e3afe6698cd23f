//! Condensation of the game graph into its DAG of strongly connected
//! components, with the priority order that drives backward induction.
//!
//! Components with no outgoing DAG edge are *terminal* (the backward
//! induction starts there); all others are *interior*. Every terminal
//! component receives the priority `n` (the component count) and an
//! interior component receives the minimum of its direct successors'
//! priorities minus one, so processing components by descending priority
//! visits every successor before its predecessors.

use crate::model::GameGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    /// No outgoing edge to another component.
    Terminal,
    Interior,
}

#[derive(Clone, Debug)]
pub struct Component {
    /// Game-graph vertex indices in this SCC, ascending.
    pub members: Vec<usize>,
    pub kind: ComponentKind,
    /// Whether the component can host a terminal cycle: more than one
    /// member, or a single member with a self-loop.
    pub has_cycle: bool,
    pub priority: i64,
    /// Direct successor components in the condensation.
    pub successors: Vec<usize>,
}

/// The condensation DAG.
#[derive(Clone, Debug)]
pub struct ComponentDag {
    pub components: Vec<Component>,
    /// Component index of every game-graph vertex.
    pub component_of: Vec<usize>,
}

impl ComponentDag {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Tarjan's strongly connected components over the game graph, condensed
/// into a DAG. Components are renumbered so their least member vertex ids
/// ascend.
pub fn condense(graph: &GameGraph) -> ComponentDag {
    let n = graph.vertex_count();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut dsts: Vec<usize> = graph.outgoing(v).iter().map(|&e| graph.edges[e].dst).collect();
            dsts.sort_unstable();
            dsts.dedup();
            dsts
        })
        .collect();

    let mut state = Tarjan {
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        idx: vec![None; n],
        low: vec![0; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if state.idx[v].is_none() {
            strongconnect(v, &adj, &mut state);
        }
    }

    let mut comps: Vec<Vec<usize>> = state
        .comps
        .into_iter()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_by_key(|c| c[0]);

    let mut component_of = vec![0usize; n];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            component_of[v] = i;
        }
    }

    let components = comps
        .into_iter()
        .enumerate()
        .map(|(i, members)| {
            let mut successors: Vec<usize> = Vec::new();
            let mut self_loop = false;
            for &v in &members {
                for &e in graph.outgoing(v) {
                    let d = component_of[graph.edges[e].dst];
                    if d != i {
                        successors.push(d);
                    } else if graph.edges[e].dst == v {
                        self_loop = true;
                    }
                }
            }
            successors.sort_unstable();
            successors.dedup();
            let kind = if successors.is_empty() {
                ComponentKind::Terminal
            } else {
                ComponentKind::Interior
            };
            let has_cycle = members.len() > 1 || self_loop;
            Component {
                members,
                kind,
                has_cycle,
                priority: 0,
                successors,
            }
        })
        .collect();

    let mut dag = ComponentDag {
        components,
        component_of,
    };
    compute_priorities(&mut dag);
    dag
}

struct Tarjan {
    index: usize,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    idx: Vec<Option<usize>>,
    low: Vec<usize>,
    comps: Vec<Vec<usize>>,
}

fn strongconnect(v: usize, adj: &[Vec<usize>], st: &mut Tarjan) {
    st.idx[v] = Some(st.index);
    st.low[v] = st.index;
    st.index += 1;
    st.stack.push(v);
    st.on_stack[v] = true;

    for &w in &adj[v] {
        if st.idx[w].is_none() {
            strongconnect(w, adj, st);
            st.low[v] = st.low[v].min(st.low[w]);
        } else if st.on_stack[w] {
            st.low[v] = st.low[v].min(st.idx[w].unwrap());
        }
    }

    if st.low[v] == st.idx[v].unwrap() {
        let mut comp = Vec::new();
        loop {
            let w = st.stack.pop().unwrap();
            st.on_stack[w] = false;
            comp.push(w);
            if w == v {
                break;
            }
        }
        st.comps.push(comp);
    }
}

/// Assign priorities: terminal components get the component count, interior
/// components the minimum successor priority minus one, resolved in one
/// pass over a reverse topological order.
pub fn compute_priorities(dag: &mut ComponentDag) {
    let n = dag.components.len() as i64;
    let order = topological(dag);
    // Sweep sinks-first.
    for &c in order.iter().rev() {
        let comp = &dag.components[c];
        let priority = if comp.successors.is_empty() {
            n
        } else {
            comp.successors
                .iter()
                .map(|&s| dag.components[s].priority - 1)
                .min()
                .expect("interior component has successors")
        };
        dag.components[c].priority = priority;
    }
}

fn topological(dag: &ComponentDag) -> Vec<usize> {
    let n = dag.components.len();
    let mut indegree = vec![0usize; n];
    for c in &dag.components {
        for &s in &c.successors {
            indegree[s] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&c| indegree[c] == 0).collect();
    ready.sort_unstable();
    let mut order = Vec::with_capacity(n);
    while let Some(c) = ready.pop() {
        order.push(c);
        for &s in &dag.components[c].successors {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(s);
            }
        }
    }
    debug_assert_eq!(order.len(), n, "condensation must be acyclic");
    order
}

/// Component processing order: descending priority, ties by ascending least
/// member vertex. Successors always precede their predecessors.
pub fn processing_order(dag: &ComponentDag) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dag.components.len()).collect();
    order.sort_by_key(|&c| {
        (
            -dag.components[c].priority,
            dag.components[c].members[0],
        )
    });
    order
}
