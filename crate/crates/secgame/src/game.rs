//! Game specifications: the JSON document format, validation, wildcard
//! expansion, and residual-mass completion.
//!
//! A specification lists the network states, the per-state attacker and
//! defender action slots, sparse transition records, per-state payoff
//! matrices, and a discount factor. Action slots are identified by their
//! 1-based index together with their name; several slots of one state may
//! share a name (for example repeated no-op actions) and remain distinct
//! actions. The wildcard `"*"` in a transition record stands for every slot
//! of that side. When the recorded mass of a (state, attacker, defender)
//! triple sums below one, the remainder is assigned to an implicit
//! stay-in-place transition (residual completion) so each live action pair
//! induces a full probability distribution; this can be disabled, in which
//! case deficits are validation errors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability-mass checks.
pub const EPS_SUM: f64 = 1e-9;

/// Default discount factor when a document does not fix one.
pub const DEFAULT_BETA: f64 = 0.9;

// ---------------------------------------------------------------------------
// Document (file) layer
// ---------------------------------------------------------------------------

/// On-disk game specification document, version 1.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpecDocument {
    pub version: u32,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub states: Vec<StateDoc>,
    pub transitions: Vec<TransitionDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub payoffs: Vec<PayoffDoc>,
    #[serde(default)]
    pub options: SpecOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateDoc {
    pub id: u32,
    pub name: String,
    pub attacker_actions: Vec<String>,
    pub defender_actions: Vec<String>,
}

/// One transition record `p(to | from, attacker, defender) = p`.
/// `attacker`/`defender` are 1-based slot indices or `"*"`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TransitionDoc {
    pub from: u32,
    pub attacker: SlotRef,
    pub defender: SlotRef,
    pub to: u32,
    pub p: ProbValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Slot reference: concrete 1-based index or wildcard.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRef {
    Index(u8),
    Any,
}

impl Serialize for SlotRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SlotRef::Index(i) => s.serialize_u64(*i as u64),
            SlotRef::Any => s.serialize_str("*"),
        }
    }
}

impl<'de> Deserialize<'de> for SlotRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::String(s) if s == "*" => Ok(SlotRef::Any),
            serde_json::Value::Number(n) => {
                let i = n
                    .as_u64()
                    .ok_or_else(|| D::Error::custom("slot index must be a positive integer"))?;
                if i == 0 || i > 255 {
                    return Err(D::Error::custom("slot index out of range"));
                }
                Ok(SlotRef::Index(i as u8))
            }
            _ => Err(D::Error::custom("slot must be an index or \"*\"")),
        }
    }
}

/// Probability literal: a number, or a fraction string like `"1/3"` or
/// `"0.5/3"` matching the usual tabular notation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbValue(pub f64);

impl Serialize for ProbValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for ProbValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::Number(n) => Ok(ProbValue(
                n.as_f64().ok_or_else(|| D::Error::custom("bad number"))?,
            )),
            serde_json::Value::String(s) => {
                let parsed = match s.split_once('/') {
                    Some((num, den)) => {
                        let n: f64 = num
                            .trim()
                            .parse()
                            .map_err(|_| D::Error::custom("bad fraction numerator"))?;
                        let d_: f64 = den
                            .trim()
                            .parse()
                            .map_err(|_| D::Error::custom("bad fraction denominator"))?;
                        n / d_
                    }
                    None => s
                        .trim()
                        .parse()
                        .map_err(|_| D::Error::custom("bad probability string"))?,
                };
                Ok(ProbValue(parsed))
            }
            _ => Err(D::Error::custom("probability must be a number or string")),
        }
    }
}

/// Payoff matrices of one state; rows are attacker slots, columns defender
/// slots. States without an entry get all-zero matrices.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PayoffDoc {
    pub state: u32,
    pub attacker: Vec<Vec<f64>>,
    pub defender: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SpecOptions {
    /// Assign unallocated transition mass to a stay-in-place edge.
    pub residual_completion: bool,
    /// Upper bound on enumerated global strategies.
    pub tie_cap: usize,
    /// Fixpoint tolerance of the value iterations.
    pub epsilon_fix: f64,
    /// Iteration limit of the value iterations.
    pub max_iter: usize,
}

impl Default for SpecOptions {
    fn default() -> Self {
        SpecOptions {
            residual_completion: true,
            tie_cap: 64,
            epsilon_fix: 1e-9,
            max_iter: 10_000,
        }
    }
}

// ---------------------------------------------------------------------------
// Compiled layer
// ---------------------------------------------------------------------------

/// An action slot: 1-based per-state index plus its (global) name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSlot {
    pub index: u8,
    pub name: String,
}

/// A fully expanded transition row: the distribution and payoff of one
/// (state, attacker slot, defender slot) triple.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRow {
    /// Destination state id -> probability; sums to one.
    pub dests: BTreeMap<u32, f64>,
    /// Immediate payoff (attacker, defender).
    pub payoff: (f64, f64),
}

/// Validated, expanded game specification.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub name: String,
    pub beta: f64,
    pub options: SpecOptions,
    pub states: Vec<GameState>,
    /// Non-fatal findings collected while loading.
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct GameState {
    pub id: u32,
    pub name: String,
    pub attacker: Vec<ActionSlot>,
    pub defender: Vec<ActionSlot>,
    /// Live action pairs, keyed by (attacker slot index, defender slot index).
    pub rows: BTreeMap<(u8, u8), GameRow>,
}

impl GameSpec {
    pub fn state(&self, id: u32) -> Option<&GameState> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn state_index(&self, id: u32) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document version {0} (expected 1)")]
    Version(u32),
    #[error("duplicate state id {0}")]
    DuplicateState(u32),
    #[error("state {0}: empty {1} action list")]
    EmptyActions(u32, &'static str),
    #[error("state {state}: {side} payoff matrix is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    PayoffDimensions {
        state: u32,
        side: &'static str,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("payoff entry references unknown state {0}")]
    PayoffUnknownState(u32),
    #[error("duplicate payoff entry for state {0}")]
    DuplicatePayoff(u32),
    #[error("transition references unknown state {0}")]
    UnknownState(u32),
    #[error("transition from state {state}: {side} slot {slot} out of range 1..={max}")]
    SlotOutOfRange {
        state: u32,
        side: &'static str,
        slot: u8,
        max: usize,
    },
    #[error("transition p({to}|{from},{a},{d}) = {p} outside [0,1]")]
    ProbabilityRange {
        from: u32,
        a: u8,
        d: u8,
        to: u32,
        p: f64,
    },
    #[error("duplicate transition record for ({from},{a},{d}) -> {to}")]
    DuplicateTransition { from: u32, a: u8, d: u8, to: u32 },
    #[error("state {from}, action pair ({a},{d}): probabilities sum to {total} > 1")]
    MassExceedsOne { from: u32, a: u8, d: u8, total: f64 },
    #[error("state {from}, action pair ({a},{d}): probabilities sum to {total} < 1 and residual completion is disabled")]
    MassDeficit { from: u32, a: u8, d: u8, total: f64 },
    #[error("beta {0} outside the open interval (0,1)")]
    BetaRange(f64),
    #[error("state {0} has no live action pair; every state needs at least one outgoing edge")]
    DeadState(u32),
}

/// Read and compile a specification file.
pub fn load_spec(path: impl AsRef<Path>) -> Result<GameSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: SpecDocument = serde_json::from_str(&text)?;
    compile_spec(&doc)
}

pub fn spec_from_str(text: &str) -> Result<GameSpec, SpecError> {
    let doc: SpecDocument = serde_json::from_str(text)?;
    compile_spec(&doc)
}

/// Validate a document and expand it into a [`GameSpec`].
pub fn compile_spec(doc: &SpecDocument) -> Result<GameSpec, SpecError> {
    if doc.version != 1 {
        return Err(SpecError::Version(doc.version));
    }
    let beta = doc.beta.unwrap_or(DEFAULT_BETA);
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SpecError::BetaRange(beta));
    }

    let mut ids = BTreeMap::new();
    for (idx, s) in doc.states.iter().enumerate() {
        if ids.insert(s.id, idx).is_some() {
            return Err(SpecError::DuplicateState(s.id));
        }
        if s.attacker_actions.is_empty() {
            return Err(SpecError::EmptyActions(s.id, "attacker"));
        }
        if s.defender_actions.is_empty() {
            return Err(SpecError::EmptyActions(s.id, "defender"));
        }
    }

    // Payoff matrices, defaulting to zero.
    type Matrices<'a> = (&'a Vec<Vec<f64>>, &'a Vec<Vec<f64>>);
    let mut payoffs: BTreeMap<u32, Matrices> = BTreeMap::new();
    for p in &doc.payoffs {
        let Some(&idx) = ids.get(&p.state) else {
            return Err(SpecError::PayoffUnknownState(p.state));
        };
        if payoffs.insert(p.state, (&p.attacker, &p.defender)).is_some() {
            return Err(SpecError::DuplicatePayoff(p.state));
        }
        let na = doc.states[idx].attacker_actions.len();
        let nd = doc.states[idx].defender_actions.len();
        for (side, m) in [("attacker", &p.attacker), ("defender", &p.defender)] {
            if m.len() != na || m.iter().any(|row| row.len() != nd) {
                return Err(SpecError::PayoffDimensions {
                    state: p.state,
                    side: if side == "attacker" {
                        "attacker"
                    } else {
                        "defender"
                    },
                    rows: m.len(),
                    cols: m.first().map(|r| r.len()).unwrap_or(0),
                    want_rows: na,
                    want_cols: nd,
                });
            }
        }
    }

    // Expand wildcards to concrete slot pairs and aggregate rows.
    let mut rows: BTreeMap<(u32, u8, u8), BTreeMap<u32, f64>> = BTreeMap::new();
    for t in &doc.transitions {
        let Some(&from_idx) = ids.get(&t.from) else {
            return Err(SpecError::UnknownState(t.from));
        };
        if !ids.contains_key(&t.to) {
            return Err(SpecError::UnknownState(t.to));
        }
        let na = doc.states[from_idx].attacker_actions.len();
        let nd = doc.states[from_idx].defender_actions.len();
        let a_slots: Vec<u8> = match t.attacker {
            SlotRef::Index(i) => {
                if i as usize > na {
                    return Err(SpecError::SlotOutOfRange {
                        state: t.from,
                        side: "attacker",
                        slot: i,
                        max: na,
                    });
                }
                vec![i]
            }
            SlotRef::Any => (1..=na as u8).collect(),
        };
        let d_slots: Vec<u8> = match t.defender {
            SlotRef::Index(i) => {
                if i as usize > nd {
                    return Err(SpecError::SlotOutOfRange {
                        state: t.from,
                        side: "defender",
                        slot: i,
                        max: nd,
                    });
                }
                vec![i]
            }
            SlotRef::Any => (1..=nd as u8).collect(),
        };
        let p = t.p.0;
        for &a in &a_slots {
            for &d in &d_slots {
                if !(p > 0.0 && p <= 1.0 + EPS_SUM) {
                    return Err(SpecError::ProbabilityRange {
                        from: t.from,
                        a,
                        d,
                        to: t.to,
                        p,
                    });
                }
                let row = rows.entry((t.from, a, d)).or_default();
                if row.insert(t.to, p).is_some() {
                    return Err(SpecError::DuplicateTransition {
                        from: t.from,
                        a,
                        d,
                        to: t.to,
                    });
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let mut states = Vec::with_capacity(doc.states.len());
    for s in &doc.states {
        let attacker: Vec<ActionSlot> = s
            .attacker_actions
            .iter()
            .enumerate()
            .map(|(i, n)| ActionSlot {
                index: (i + 1) as u8,
                name: n.clone(),
            })
            .collect();
        let defender: Vec<ActionSlot> = s
            .defender_actions
            .iter()
            .enumerate()
            .map(|(i, n)| ActionSlot {
                index: (i + 1) as u8,
                name: n.clone(),
            })
            .collect();
        let zero_a = vec![vec![0.0; defender.len()]; attacker.len()];
        let zero_d = zero_a.clone();
        let (pa, pd) = payoffs
            .get(&s.id)
            .map(|(a, d)| ((*a).clone(), (*d).clone()))
            .unwrap_or((zero_a, zero_d));

        let mut state_rows = BTreeMap::new();
        for ((from, a, d), dests) in rows.range((s.id, 0, 0)..=(s.id, u8::MAX, u8::MAX)) {
            debug_assert_eq!(*from, s.id);
            let total: f64 = dests.values().sum();
            let mut dests = dests.clone();
            if total > 1.0 + EPS_SUM {
                return Err(SpecError::MassExceedsOne {
                    from: s.id,
                    a: *a,
                    d: *d,
                    total,
                });
            }
            if total < 1.0 - EPS_SUM {
                if doc.options.residual_completion {
                    *dests.entry(s.id).or_insert(0.0) += 1.0 - total;
                } else {
                    return Err(SpecError::MassDeficit {
                        from: s.id,
                        a: *a,
                        d: *d,
                        total,
                    });
                }
            }
            let payoff = (
                pa[*a as usize - 1][*d as usize - 1],
                pd[*a as usize - 1][*d as usize - 1],
            );
            state_rows.insert((*a, *d), GameRow { dests, payoff });
        }
        if state_rows.is_empty() {
            return Err(SpecError::DeadState(s.id));
        }
        states.push(GameState {
            id: s.id,
            name: s.name.clone(),
            attacker,
            defender,
            rows: state_rows,
        });
    }

    // Weight-pair convention: strictly greater attacker payoff should come
    // with strictly smaller defender payoff. Violations are reported, not
    // rejected, because realistic payoff tables break the convention.
    let mut edges: Vec<(f64, f64, String)> = Vec::new();
    for st in &states {
        for ((a, d), row) in &st.rows {
            edges.push((
                row.payoff.0,
                row.payoff.1,
                format!("state {} pair ({a},{d})", st.id),
            ));
        }
    }
    'outer: for i in 0..edges.len() {
        for j in 0..edges.len() {
            if edges[i].0 > edges[j].0 && edges[i].1 >= edges[j].1 {
                warnings.push(format!(
                    "weight-pair convention violated: {} has attacker payoff {} > {} of {} but defender payoff {} >= {}",
                    edges[i].2, edges[i].0, edges[j].0, edges[j].2, edges[i].1, edges[j].1
                ));
                break 'outer;
            }
        }
    }

    Ok(GameSpec {
        name: doc.name.clone(),
        beta,
        options: doc.options.clone(),
        states,
        warnings,
    })
}
