//! Process terms: syntax tree, substitution, canonical forms, printing.
//!
//! The term language is a reactive probabilistic value-passing process
//! calculus. A summation is organised as a list of *groups*, one group per
//! action prefix; within a group each branch carries the probability of
//! being chosen when that action fires, and the branch probabilities of a
//! group sum to one. Action prefixes of distinct groups must be distinct.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ordered_float::NotNan;

use super::error::ProcessError;
use super::value::{BoolExpr, Value, ValueExpr};

/// Probability of a summation branch, kept NaN-free so terms stay hashable.
pub type Prob = NotNan<f64>;

/// Tolerance used when checking that branch probabilities sum to one.
pub const EPS_SUM: f64 = 1e-9;

/// Action prefix as written in a term (arguments may still be open).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prefix {
    /// Receive a value on `chan`, binding `var` in the continuation.
    Input { chan: String, var: String },
    /// Emit a value on the co-name of `chan`; `arg` is `None` for a bare
    /// synchronisation-only action.
    Output { chan: String, arg: Option<ValueExpr> },
    Tau,
}

impl Prefix {
    pub fn channel(&self) -> Option<&str> {
        match self {
            Prefix::Input { chan, .. } | Prefix::Output { chan, .. } => Some(chan),
            Prefix::Tau => None,
        }
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prefix::Input { chan, var } => write!(f, "{chan}({var})"),
            Prefix::Output { chan, arg: None } => write!(f, "'{chan}"),
            Prefix::Output { chan, arg: Some(e) } => write!(f, "'{chan}({e})"),
            Prefix::Tau => write!(f, "tau"),
        }
    }
}

/// One action group of a summation: a prefix plus its probabilistic branches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SumGroup {
    pub prefix: Prefix,
    pub branches: Vec<(Prob, Process)>,
}

impl SumGroup {
    pub fn new(prefix: Prefix, branches: Vec<(f64, Process)>) -> Result<Self, ProcessError> {
        let mut out = Vec::with_capacity(branches.len());
        let mut total = 0.0;
        for (p, cont) in branches {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ProcessError::BranchProbability(p));
            }
            total += p;
            out.push((NotNan::new(p).expect("probability is not NaN"), cont));
        }
        if (total - 1.0).abs() > EPS_SUM {
            return Err(ProcessError::ProbabilitySum {
                prefix: format!("{prefix}"),
                total,
            });
        }
        Ok(SumGroup { prefix, branches: out })
    }

    /// Single-branch group with probability one.
    pub fn single(prefix: Prefix, cont: Process) -> Self {
        SumGroup {
            prefix,
            branches: vec![(NotNan::new(1.0).unwrap(), cont)],
        }
    }
}

/// A process term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Nil,
    /// Probabilistic guarded summation; groups carry distinct prefixes.
    Sum(Vec<SumGroup>),
    Par(Box<Process>, Box<Process>),
    /// Channel restriction: actions on these channels (either polarity) are
    /// blocked at this boundary.
    Restrict(Box<Process>, BTreeSet<String>),
    If(Box<BoolExpr>, Box<Process>, Box<Process>),
    /// Instantiation of a defined identifier with argument expressions.
    Call(String, Vec<ValueExpr>),
}

impl Process {
    pub fn sum(groups: Vec<SumGroup>) -> Result<Self, ProcessError> {
        let mut seen = BTreeSet::new();
        for g in &groups {
            if !seen.insert(g.prefix.clone()) {
                return Err(ProcessError::DuplicatePrefix(format!("{}", g.prefix)));
            }
        }
        Ok(Process::Sum(groups))
    }

    /// Single prefix `prefix.cont`.
    pub fn prefix(prefix: Prefix, cont: Process) -> Self {
        Process::Sum(vec![SumGroup::single(prefix, cont)])
    }

    pub fn par(left: Process, right: Process) -> Self {
        Process::Par(Box::new(left), Box::new(right))
    }

    pub fn restrict(inner: Process, chans: impl IntoIterator<Item = String>) -> Self {
        Process::Restrict(Box::new(inner), chans.into_iter().collect())
    }

    pub fn cond(guard: BoolExpr, then: Process, els: Process) -> Self {
        Process::If(Box::new(guard), Box::new(then), Box::new(els))
    }

    pub fn call(name: impl Into<String>, args: Vec<ValueExpr>) -> Self {
        Process::Call(name.into(), args)
    }
}

/// A definition environment: each identifier maps to formal parameters and a
/// body. Recursion through identifiers is allowed.
#[derive(Clone, Debug, Default)]
pub struct DefinitionEnv {
    defs: BTreeMap<String, (Vec<String>, Process)>,
}

impl DefinitionEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(
        &mut self,
        name: impl Into<String>,
        params: Vec<String>,
        body: Process,
    ) -> Result<(), ProcessError> {
        let name = name.into();
        if self.defs.contains_key(&name) {
            return Err(ProcessError::DuplicateDefinition(name));
        }
        self.defs.insert(name, (params, body));
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&(Vec<String>, Process)> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(|s| s.as_str())
    }
}

/// Capture-avoiding substitution of `val` for free occurrences of `var`.
///
/// Substituted expressions must be closed, so no renaming is ever required:
/// an input prefix binding the same variable simply shadows it.
pub fn substitute(term: &Process, var: &str, val: &ValueExpr) -> Process {
    match term {
        Process::Nil => Process::Nil,
        Process::Sum(groups) => Process::Sum(
            groups
                .iter()
                .map(|g| {
                    let prefix = match &g.prefix {
                        Prefix::Output { chan, arg } => Prefix::Output {
                            chan: chan.clone(),
                            arg: arg.as_ref().map(|e| e.substitute(var, val)),
                        },
                        other => other.clone(),
                    };
                    let shadowed = matches!(&g.prefix, Prefix::Input { var: v, .. } if v == var);
                    let branches = g
                        .branches
                        .iter()
                        .map(|(p, cont)| {
                            let cont = if shadowed {
                                cont.clone()
                            } else {
                                substitute(cont, var, val)
                            };
                            (*p, cont)
                        })
                        .collect();
                    SumGroup { prefix, branches }
                })
                .collect(),
        ),
        Process::Par(l, r) => Process::par(substitute(l, var, val), substitute(r, var, val)),
        Process::Restrict(inner, chans) => {
            Process::Restrict(Box::new(substitute(inner, var, val)), chans.clone())
        }
        Process::If(b, t, e) => Process::cond(
            b.substitute(var, val),
            substitute(t, var, val),
            substitute(e, var, val),
        ),
        Process::Call(name, args) => Process::Call(
            name.clone(),
            args.iter().map(|a| a.substitute(var, val)).collect(),
        ),
    }
}

/// Canonical form used for state identity in transition systems.
///
/// Three normalisations are applied, all of them bisimilarity-preserving:
/// `Nil` is dropped from parallel compositions (and a restricted `Nil`
/// collapses to `Nil`), conditionals with closed guards are resolved, and
/// bound variables are renamed to a canonical numbering so that terms equal
/// up to alpha-renaming become syntactically equal.
pub fn canonical(term: &Process) -> Process {
    let mut counter = 0usize;
    canon(term, &BTreeMap::new(), &mut counter)
}

fn canon(term: &Process, renames: &BTreeMap<String, String>, counter: &mut usize) -> Process {
    match term {
        Process::Nil => Process::Nil,
        Process::Sum(groups) => Process::Sum(
            groups
                .iter()
                .map(|g| match &g.prefix {
                    Prefix::Input { chan, var } => {
                        let fresh = format!("#{counter}");
                        *counter += 1;
                        let mut inner = renames.clone();
                        inner.insert(var.clone(), fresh.clone());
                        SumGroup {
                            prefix: Prefix::Input {
                                chan: chan.clone(),
                                var: fresh,
                            },
                            branches: g
                                .branches
                                .iter()
                                .map(|(p, c)| (*p, canon(c, &inner, counter)))
                                .collect(),
                        }
                    }
                    Prefix::Output { chan, arg } => SumGroup {
                        prefix: Prefix::Output {
                            chan: chan.clone(),
                            arg: arg.as_ref().map(|e| e.rename_vars(renames)),
                        },
                        branches: g
                            .branches
                            .iter()
                            .map(|(p, c)| (*p, canon(c, renames, counter)))
                            .collect(),
                    },
                    Prefix::Tau => SumGroup {
                        prefix: Prefix::Tau,
                        branches: g
                            .branches
                            .iter()
                            .map(|(p, c)| (*p, canon(c, renames, counter)))
                            .collect(),
                    },
                })
                .collect(),
        ),
        Process::Par(l, r) => {
            let l = canon(l, renames, counter);
            let r = canon(r, renames, counter);
            match (l, r) {
                (Process::Nil, r) => r,
                (l, Process::Nil) => l,
                (l, r) => Process::par(l, r),
            }
        }
        Process::Restrict(inner, chans) => match canon(inner, renames, counter) {
            Process::Nil => Process::Nil,
            p => Process::Restrict(Box::new(p), chans.clone()),
        },
        Process::If(b, t, e) => {
            let b = b.rename_vars(renames);
            if b.is_closed() {
                let taken = if b.eval().unwrap_or(false) { t } else { e };
                canon(taken, renames, counter)
            } else {
                Process::cond(
                    b,
                    canon(t, renames, counter),
                    canon(e, renames, counter),
                )
            }
        }
        Process::Call(name, args) => Process::Call(
            name.clone(),
            args.iter().map(|a| a.rename_vars(renames)).collect(),
        ),
    }
}

// Precedence levels for printing: parallel is loosest, then summation, then
// postfix restriction and atoms.
fn fmt_process(p: &Process, f: &mut fmt::Formatter<'_>, in_par: bool) -> fmt::Result {
    match p {
        Process::Nil => write!(f, "Nil"),
        Process::Sum(groups) => {
            let branches: Vec<String> = groups
                .iter()
                .flat_map(|g| {
                    g.branches.iter().map(move |(prob, cont)| {
                        let needs_bracket = g.branches.len() > 1 || prob.into_inner() != 1.0;
                        let head = if needs_bracket {
                            format!("[{}]{}", prob, g.prefix)
                        } else {
                            format!("{}", g.prefix)
                        };
                        format!("{head}.{}", PrintAtom(cont))
                    })
                })
                .collect();
            if branches.is_empty() {
                write!(f, "Nil")
            } else {
                write!(f, "{}", branches.join(" + "))
            }
        }
        Process::Par(l, r) => {
            fmt_process(l, f, true)?;
            write!(f, " | ")?;
            // Right-nested parallels get parentheses so the printed form
            // re-parses to the same left-associated tree.
            if matches!(**r, Process::Par(..)) {
                write!(f, "({})", r)
            } else {
                fmt_process(r, f, true)
            }
        }
        Process::Restrict(inner, chans) => {
            let names: Vec<&str> = chans.iter().map(|s| s.as_str()).collect();
            // The restriction postfix binds tighter than prefixing, so any
            // summation body needs parentheses to survive a round trip.
            let needs_parens = matches!(
                **inner,
                Process::Par(..) | Process::If(..) | Process::Sum(..)
            );
            if needs_parens {
                write!(f, "({})\\{{{}}}", inner, names.join(","))
            } else {
                write!(f, "{}\\{{{}}}", inner, names.join(","))
            }
        }
        Process::If(b, t, e) => {
            if in_par {
                write!(f, "(if {b} then {t} else {e})")
            } else {
                write!(f, "if {b} then {t} else {e}")
            }
        }
        Process::Call(name, args) => {
            if args.is_empty() {
                write!(f, "{name}")
            } else {
                let args: Vec<String> = args.iter().map(|a| format!("{a}")).collect();
                write!(f, "{name}({})", args.join(","))
            }
        }
    }
}

/// Helper that parenthesises anything looser than an atom (prefix
/// continuations and restriction bodies).
struct PrintAtom<'a>(&'a Process);

impl fmt::Display for PrintAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let needs_parens = match self.0 {
            Process::Par(..) | Process::If(..) => true,
            Process::Sum(groups) => {
                groups.len() > 1 || groups.iter().any(|g| g.branches.len() > 1)
            }
            _ => false,
        };
        if needs_parens {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_process(self, f, false)
    }
}

/// Ground value carried by experienced transitions on the channel level.
/// Inputs always carry the concrete value they received; outputs may be
/// bare synchronisations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLabel {
    Tau,
    In { chan: String, value: Value },
    Out { chan: String, value: Option<Value> },
}

impl ActionLabel {
    pub fn channel(&self) -> Option<&str> {
        match self {
            ActionLabel::Tau => None,
            ActionLabel::In { chan, .. } | ActionLabel::Out { chan, .. } => Some(chan),
        }
    }

    pub fn output(chan: impl Into<String>, value: Value) -> Self {
        ActionLabel::Out {
            chan: chan.into(),
            value: Some(value),
        }
    }

    pub fn input(chan: impl Into<String>, value: Value) -> Self {
        ActionLabel::In {
            chan: chan.into(),
            value,
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Tau => write!(f, "tau"),
            ActionLabel::In { chan, value } => write!(f, "{chan}({value})"),
            ActionLabel::Out { chan, value: None } => write!(f, "'{chan}"),
            ActionLabel::Out {
                chan,
                value: Some(v),
            } => write!(f, "'{chan}({v})"),
        }
    }
}
