//! Reactive operational semantics of the process calculus.
//!
//! A transition `P --α[p]--> Q` performs action `α` with probability `p`.
//! Inputs are instantiated lazily: a standalone input prefix produces one
//! transition per value in the supplied stimulus set, while a communication
//! inside a parallel composition always instantiates the input at exactly
//! the value its partner outputs, regardless of the stimulus set. The
//! probability of a communication is the product of the two branch
//! probabilities.

use std::collections::{BTreeMap, BTreeSet};

use super::error::SemanticsError;
use super::process::{ActionLabel, DefinitionEnv, Prefix, Process};
use super::value::{Value, ValueExpr};

/// Values that exposed input prefixes may receive, optionally per channel.
#[derive(Clone, Debug, Default)]
pub struct Stimuli {
    default: BTreeSet<Value>,
    per_chan: BTreeMap<String, BTreeSet<Value>>,
}

impl Stimuli {
    pub fn none() -> Self {
        Self::default()
    }

    /// The same candidate values for every channel.
    pub fn uniform(values: impl IntoIterator<Item = Value>) -> Self {
        Stimuli {
            default: values.into_iter().collect(),
            per_chan: BTreeMap::new(),
        }
    }

    /// Restrict a channel to a dedicated value set.
    pub fn with_channel(
        mut self,
        chan: impl Into<String>,
        values: impl IntoIterator<Item = Value>,
    ) -> Self {
        self.per_chan
            .insert(chan.into(), values.into_iter().collect());
        self
    }

    fn for_chan(&self, chan: &str) -> &BTreeSet<Value> {
        self.per_chan.get(chan).unwrap_or(&self.default)
    }
}

/// One derived transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub label: ActionLabel,
    pub prob: f64,
    pub target: Process,
}

const MAX_UNFOLD_DEPTH: usize = 128;

/// All transitions of `term` derivable from the semantics rules, with input
/// prefixes instantiated over `stimuli`.
pub fn derive_transitions(
    term: &Process,
    env: &DefinitionEnv,
    stimuli: &Stimuli,
) -> Result<Vec<Transition>, SemanticsError> {
    derive(term, env, stimuli, 0)
}

fn derive(
    term: &Process,
    env: &DefinitionEnv,
    stimuli: &Stimuli,
    depth: usize,
) -> Result<Vec<Transition>, SemanticsError> {
    if depth > MAX_UNFOLD_DEPTH {
        return Err(SemanticsError::UnfoldDepthExceeded(MAX_UNFOLD_DEPTH));
    }
    match term {
        Process::Nil => Ok(Vec::new()),
        Process::Sum(groups) => {
            let mut out = Vec::new();
            for g in groups {
                match &g.prefix {
                    Prefix::Tau => {
                        for (p, cont) in &g.branches {
                            out.push(Transition {
                                label: ActionLabel::Tau,
                                prob: p.into_inner(),
                                target: cont.clone(),
                            });
                        }
                    }
                    Prefix::Output { chan, arg } => {
                        let value = match arg {
                            None => None,
                            Some(e) => Some(e.eval()?),
                        };
                        for (p, cont) in &g.branches {
                            out.push(Transition {
                                label: ActionLabel::Out {
                                    chan: chan.clone(),
                                    value: value.clone(),
                                },
                                prob: p.into_inner(),
                                target: cont.clone(),
                            });
                        }
                    }
                    Prefix::Input { chan, var } => {
                        for v in stimuli.for_chan(chan) {
                            for (p, cont) in &g.branches {
                                out.push(Transition {
                                    label: ActionLabel::In {
                                        chan: chan.clone(),
                                        value: v.clone(),
                                    },
                                    prob: p.into_inner(),
                                    target: super::process::substitute(
                                        cont,
                                        var,
                                        &ValueExpr::Lit(v.clone()),
                                    ),
                                });
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
        Process::Par(l, r) => {
            let lt = derive(l, env, stimuli, depth)?;
            let rt = derive(r, env, stimuli, depth)?;
            let mut out = Vec::new();
            for t in &lt {
                out.push(Transition {
                    label: t.label.clone(),
                    prob: t.prob,
                    target: Process::par(t.target.clone(), (**r).clone()),
                });
            }
            for t in &rt {
                out.push(Transition {
                    label: t.label.clone(),
                    prob: t.prob,
                    target: Process::par((**l).clone(), t.target.clone()),
                });
            }
            // Communication: every output on one side against the matching
            // input instances of the other side.
            for t in &lt {
                if let ActionLabel::Out {
                    chan,
                    value: Some(v),
                } = &t.label
                {
                    for (q, rtgt) in input_transitions(r, env, chan, v, depth)? {
                        out.push(Transition {
                            label: ActionLabel::Tau,
                            prob: t.prob * q,
                            target: Process::par(t.target.clone(), rtgt),
                        });
                    }
                }
            }
            for t in &rt {
                if let ActionLabel::Out {
                    chan,
                    value: Some(v),
                } = &t.label
                {
                    for (q, ltgt) in input_transitions(l, env, chan, v, depth)? {
                        out.push(Transition {
                            label: ActionLabel::Tau,
                            prob: q * t.prob,
                            target: Process::par(ltgt, t.target.clone()),
                        });
                    }
                }
            }
            Ok(out)
        }
        Process::Restrict(inner, chans) => {
            let ts = derive(inner, env, stimuli, depth)?;
            Ok(ts
                .into_iter()
                .filter(|t| match t.label.channel() {
                    Some(c) => !chans.contains(c),
                    None => true,
                })
                .map(|t| Transition {
                    label: t.label,
                    prob: t.prob,
                    target: Process::Restrict(Box::new(t.target), chans.clone()),
                })
                .collect())
        }
        Process::If(b, t, e) => {
            let guard = b.eval()?;
            if guard {
                derive(t, env, stimuli, depth)
            } else {
                derive(e, env, stimuli, depth)
            }
        }
        Process::Call(name, args) => {
            let body = unfold_call(term, env, name, args)?;
            derive(&body, env, stimuli, depth + 1)
        }
    }
}

/// Transitions of `term` that input value `v` on channel `chan`, used to
/// instantiate communications at the partner's output value.
fn input_transitions(
    term: &Process,
    env: &DefinitionEnv,
    chan: &str,
    v: &Value,
    depth: usize,
) -> Result<Vec<(f64, Process)>, SemanticsError> {
    if depth > MAX_UNFOLD_DEPTH {
        return Err(SemanticsError::UnfoldDepthExceeded(MAX_UNFOLD_DEPTH));
    }
    match term {
        Process::Nil => Ok(Vec::new()),
        Process::Sum(groups) => {
            let mut out = Vec::new();
            for g in groups {
                if let Prefix::Input { chan: c, var } = &g.prefix {
                    if c == chan {
                        for (p, cont) in &g.branches {
                            out.push((
                                p.into_inner(),
                                super::process::substitute(cont, var, &ValueExpr::Lit(v.clone())),
                            ));
                        }
                    }
                }
            }
            Ok(out)
        }
        Process::Par(l, r) => {
            let mut out = Vec::new();
            for (p, tgt) in input_transitions(l, env, chan, v, depth)? {
                out.push((p, Process::par(tgt, (**r).clone())));
            }
            for (p, tgt) in input_transitions(r, env, chan, v, depth)? {
                out.push((p, Process::par((**l).clone(), tgt)));
            }
            Ok(out)
        }
        Process::Restrict(inner, chans) => {
            if chans.contains(chan) {
                return Ok(Vec::new());
            }
            Ok(input_transitions(inner, env, chan, v, depth)?
                .into_iter()
                .map(|(p, tgt)| (p, Process::Restrict(Box::new(tgt), chans.clone())))
                .collect())
        }
        Process::If(b, t, e) => {
            if b.eval()? {
                input_transitions(t, env, chan, v, depth)
            } else {
                input_transitions(e, env, chan, v, depth)
            }
        }
        Process::Call(name, args) => {
            let body = unfold_call(term, env, name, args)?;
            input_transitions(&body, env, chan, v, depth + 1)
        }
    }
}

fn unfold_call(
    term: &Process,
    env: &DefinitionEnv,
    name: &str,
    args: &[ValueExpr],
) -> Result<Process, SemanticsError> {
    let _ = term;
    let (params, body) = env
        .lookup(name)
        .ok_or_else(|| SemanticsError::UndefinedIdentifier(name.to_string()))?;
    if params.len() != args.len() {
        return Err(SemanticsError::ArityMismatch {
            name: name.to_string(),
            expected: params.len(),
            got: args.len(),
        });
    }
    let mut out = body.clone();
    for (param, arg) in params.iter().zip(args) {
        if !arg.is_closed() {
            return Err(SemanticsError::OpenCallArgument(name.to_string()));
        }
        out = super::process::substitute(&out, param, arg);
    }
    Ok(out)
}

/// Total probability with which `term` reaches a process in `class` via
/// `action`. Membership is decided on canonical forms, so `class` should
/// hold canonical terms.
pub fn mu(
    term: &Process,
    action: &ActionLabel,
    class: &BTreeSet<Process>,
    env: &DefinitionEnv,
    stimuli: &Stimuli,
) -> Result<f64, SemanticsError> {
    let ts = derive_transitions(term, env, stimuli)?;
    Ok(ts
        .iter()
        .filter(|t| t.label == *action && class.contains(&super::process::canonical(&t.target)))
        .map(|t| t.prob)
        .sum())
}
