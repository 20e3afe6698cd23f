//! Ground values and the expression language carried by actions.
//!
//! Values are the data exchanged on channels: symbolic names (action
//! identifiers), integers, reals, and pairs. Expressions add variables on
//! top; a closed expression always evaluates to a [`Value`].

use std::fmt;

use ordered_float::NotNan;

use super::error::EvalError;

/// A ground value. Ordered and hashable so it can serve as part of a
/// transition label and as a state-identity component.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// Symbolic constant, e.g. an action name.
    Name(String),
    Int(i64),
    Real(NotNan<f64>),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn name(s: impl Into<String>) -> Self {
        Value::Name(s.into())
    }

    pub fn real(x: f64) -> Self {
        Value::Real(NotNan::new(x).expect("NaN is not a value"))
    }

    pub fn pair(a: Value, b: Value) -> Self {
        Value::Pair(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Name(s) => write!(f, "{s}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// Value expression: a ground value, a variable, or a pair of expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueExpr {
    Lit(Value),
    Var(String),
    Pair(Box<ValueExpr>, Box<ValueExpr>),
}

impl ValueExpr {
    pub fn var(s: impl Into<String>) -> Self {
        ValueExpr::Var(s.into())
    }

    pub fn lit(v: Value) -> Self {
        ValueExpr::Lit(v)
    }

    pub fn pair(a: ValueExpr, b: ValueExpr) -> Self {
        ValueExpr::Pair(Box::new(a), Box::new(b))
    }

    /// True when the expression contains no variables.
    pub fn is_closed(&self) -> bool {
        match self {
            ValueExpr::Lit(_) => true,
            ValueExpr::Var(_) => false,
            ValueExpr::Pair(a, b) => a.is_closed() && b.is_closed(),
        }
    }

    /// Evaluate a closed expression.
    pub fn eval(&self) -> Result<Value, EvalError> {
        match self {
            ValueExpr::Lit(v) => Ok(v.clone()),
            ValueExpr::Var(x) => Err(EvalError::UnboundVariable(x.clone())),
            ValueExpr::Pair(a, b) => Ok(Value::pair(a.eval()?, b.eval()?)),
        }
    }

    /// Replace every occurrence of `var` by `val`.
    pub fn substitute(&self, var: &str, val: &ValueExpr) -> ValueExpr {
        match self {
            ValueExpr::Lit(_) => self.clone(),
            ValueExpr::Var(x) if x == var => val.clone(),
            ValueExpr::Var(_) => self.clone(),
            ValueExpr::Pair(a, b) => {
                ValueExpr::pair(a.substitute(var, val), b.substitute(var, val))
            }
        }
    }

    pub(crate) fn rename_vars(
        &self,
        map: &std::collections::BTreeMap<String, String>,
    ) -> ValueExpr {
        match self {
            ValueExpr::Lit(_) => self.clone(),
            ValueExpr::Var(x) => match map.get(x) {
                Some(y) => ValueExpr::Var(y.clone()),
                None => self.clone(),
            },
            ValueExpr::Pair(a, b) => ValueExpr::pair(a.rename_vars(map), b.rename_vars(map)),
        }
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Lit(v) => write!(f, "{v}"),
            ValueExpr::Var(x) => write!(f, "{x}"),
            ValueExpr::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// Boolean guard of a conditional process.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolExpr {
    Const(bool),
    Eq(ValueExpr, ValueExpr),
    And(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn and(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn is_closed(&self) -> bool {
        match self {
            BoolExpr::Const(_) => true,
            BoolExpr::Eq(a, b) => a.is_closed() && b.is_closed(),
            BoolExpr::And(a, b) => a.is_closed() && b.is_closed(),
        }
    }

    pub fn eval(&self) -> Result<bool, EvalError> {
        match self {
            BoolExpr::Const(b) => Ok(*b),
            BoolExpr::Eq(a, b) => Ok(a.eval()? == b.eval()?),
            BoolExpr::And(a, b) => Ok(a.eval()? && b.eval()?),
        }
    }

    pub fn substitute(&self, var: &str, val: &ValueExpr) -> BoolExpr {
        match self {
            BoolExpr::Const(_) => self.clone(),
            BoolExpr::Eq(a, b) => BoolExpr::Eq(a.substitute(var, val), b.substitute(var, val)),
            BoolExpr::And(a, b) => {
                BoolExpr::and(a.substitute(var, val), b.substitute(var, val))
            }
        }
    }

    pub(crate) fn rename_vars(
        &self,
        map: &std::collections::BTreeMap<String, String>,
    ) -> BoolExpr {
        match self {
            BoolExpr::Const(_) => self.clone(),
            BoolExpr::Eq(a, b) => BoolExpr::Eq(a.rename_vars(map), b.rename_vars(map)),
            BoolExpr::And(a, b) => BoolExpr::and(a.rename_vars(map), b.rename_vars(map)),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Const(b) => write!(f, "{b}"),
            BoolExpr::Eq(a, b) => write!(f, "{a}={b}"),
            BoolExpr::And(a, b) => write!(f, "({a},{b})"),
        }
    }
}
