//! Signal temporal logic over discrete-time trajectories.
//!
//! Temporal windows are closed step intervals `[start, end]`. Quantitative
//! robustness follows the classical min/max semantics; a value of exactly zero
//! counts as satisfaction.

mod gradient;
mod parse;
mod robustness;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use gradient::smooth_robustness_grad;
pub use parse::parse_formula;
pub use robustness::{robustness, robustness_with_top, smooth_robustness, DEFAULT_TOP};

/// Names of the state coordinates a formula may refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    names: Vec<String>,
}

impl Signature {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Closed step window `[start, end]` of a temporal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(
                "window",
                format!("start {start} exceeds end {end}"),
            ));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Comparison::Lt | Comparison::Gt)
    }

    /// True when the satisfied side is `expr` above the threshold.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparison::Gt | Comparison::Ge)
    }
}

/// `sum(coefficient * state[index]) + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn variable(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn eval(&self, state: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * state[i])
    }
}

/// Atomic comparison `expr <cmp> threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub expr: LinearExpr,
    pub cmp: Comparison,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(expr: LinearExpr, cmp: Comparison, threshold: f64) -> Self {
        Self {
            expr,
            cmp,
            threshold,
        }
    }

    /// Signed distance to the threshold, positive on the satisfied side.
    pub fn margin(&self, state: &[f64]) -> f64 {
        let value = self.expr.eval(state);
        if self.cmp.is_lower_bound() {
            value - self.threshold
        } else {
            self.threshold - value
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Predicate(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Globally(Window, Box<Formula>),
    Finally(Window, Box<Formula>),
    Until(Window, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn globally(start: usize, end: usize, f: Formula) -> Result<Self> {
        Ok(Formula::Globally(Window::new(start, end)?, Box::new(f)))
    }

    pub fn finally(start: usize, end: usize, f: Formula) -> Result<Self> {
        Ok(Formula::Finally(Window::new(start, end)?, Box::new(f)))
    }

    pub fn until(start: usize, end: usize, lhs: Formula, rhs: Formula) -> Result<Self> {
        Ok(Formula::Until(
            Window::new(start, end)?,
            Box::new(lhs),
            Box::new(rhs),
        ))
    }

    /// Number of steps after the evaluation time the formula looks at.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) => a.horizon().max(b.horizon()),
            Formula::Globally(w, f) | Formula::Finally(w, f) => w.end + f.horizon(),
            Formula::Until(w, a, b) => w.end + a.horizon().max(b.horizon()),
        }
    }

    /// Largest number of operands any min/max in the formula aggregates.
    pub fn max_arity(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 1,
            Formula::Not(f) => f.max_arity(),
            Formula::And(a, b) | Formula::Or(a, b) => 2.max(a.max_arity()).max(b.max_arity()),
            Formula::Globally(w, f) | Formula::Finally(w, f) => w.len().max(f.max_arity()),
            Formula::Until(w, a, b) => w
                .len()
                .max(w.end + 1)
                .max(a.max_arity())
                .max(b.max_arity()),
        }
    }

    /// Longest chain of nested min/max aggregations (Until counts twice).
    pub fn aggregation_depth(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 0,
            Formula::Not(f) => f.aggregation_depth(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                1 + a.aggregation_depth().max(b.aggregation_depth())
            }
            Formula::Globally(_, f) | Formula::Finally(_, f) => 1 + f.aggregation_depth(),
            Formula::Until(_, a, b) => 2 + a.aggregation_depth().max(b.aggregation_depth()),
        }
    }

    /// Highest state index referenced by any predicate.
    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Formula::True => None,
            Formula::Predicate(p) => p.expr.terms.iter().map(|&(i, _)| i).max(),
            Formula::Not(f) | Formula::Globally(_, f) | Formula::Finally(_, f) => f.max_variable(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.max_variable().max(b.max_variable())
            }
        }
    }

    /// Renders the formula in the textual grammar accepted by [`parse_formula`].
    pub fn display<'a>(&'a self, signature: &'a Signature) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            signature,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    signature: &'a Signature,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self.formula, self.signature)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, formula: &Formula, sig: &Signature) -> fmt::Result {
    let sub = |f: &mut fmt::Formatter<'_>, g: &Formula| write_formula(f, g, sig);
    match formula {
        Formula::True => write!(f, "true"),
        Formula::Predicate(p) => {
            write_expr(f, &p.expr, sig)?;
            write!(f, " {} {}", p.cmp.symbol(), p.threshold)
        }
        Formula::Not(g) => {
            write!(f, "!(")?;
            sub(f, g)?;
            write!(f, ")")
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            let op = if matches!(formula, Formula::And(..)) { "&" } else { "|" };
            write!(f, "(")?;
            sub(f, a)?;
            write!(f, " {op} ")?;
            sub(f, b)?;
            write!(f, ")")
        }
        Formula::Globally(w, g) | Formula::Finally(w, g) => {
            let op = if matches!(formula, Formula::Globally(..)) { 'G' } else { 'F' };
            write!(f, "{op}[{},{}](", w.start, w.end)?;
            sub(f, g)?;
            write!(f, ")")
        }
        Formula::Until(w, a, b) => {
            write!(f, "U[{},{}](", w.start, w.end)?;
            sub(f, a)?;
            write!(f, ", ")?;
            sub(f, b)?;
            write!(f, ")")
        }
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, expr: &LinearExpr, sig: &Signature) -> fmt::Result {
    let mut first = true;
    for &(index, coef) in &expr.terms {
        if !first {
            write!(f, " + ")?;
        }
        first = false;
        let name = sig.name(index).unwrap_or("?");
        if coef == 1.0 {
            write!(f, "{name}")?;
        } else if coef == -1.0 {
            write!(f, "-{name}")?;
        } else {
            write!(f, "{coef}*{name}")?;
        }
    }
    if first {
        write!(f, "{}", expr.constant)
    } else if expr.constant != 0.0 {
        write!(f, " + {}", expr.constant)
    } else {
        Ok(())
    }
}

/// Finite state sequence `s_0 .. s_T` sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    dt: f64,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: &[Vec<f64>], dt: f64) -> Result<Self> {
        let dim = states.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * states.len());
        for s in states {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "trajectory state",
                    expected: dim,
                    got: s.len(),
                });
            }
            data.extend_from_slice(s);
        }
        Self::from_flat(dim, data, dt)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>, dt: f64) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(
                "trajectory",
                "must contain at least one state of positive dimension",
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        Ok(Self { dim, dt, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of states, `T + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}
