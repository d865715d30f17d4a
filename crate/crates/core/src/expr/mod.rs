//! Scalar expressions over chart coordinates and named parameters.
//!
//! A [`ScalarExpr`] is an immutable, reference-counted tree. Identifiers are
//! stored as plain symbols; whether a symbol is a coordinate or a parameter is
//! decided when the expression is evaluated or compiled against a list of
//! coordinate names and a [`ParamBinding`].
//!
//! Two families of constructors exist:
//!
//! * `ScalarExpr::unary` / `ScalarExpr::binary` build nodes verbatim. The
//!   parser and [`ScalarExpr::substitute`] use these so that trees round-trip.
//! * The operator impls (`+`, `-`, `*`, `/`, unary `-`) and the helpers
//!   [`ScalarExpr::pow`], [`ScalarExpr::exp`], ... fold constants and apply
//!   the 0/1 identities. There is no other simplification.

mod compile;
mod diff;
mod eval;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use compile::Program;
pub use eval::{EvalError, ParamBinding};
pub use parse::{parse_scalar_expr, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Ln => Some("ln"),
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "ln" => UnaryOp::Ln,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Symbol(Arc<str>),
    Unary(UnaryOp, ScalarExpr),
    Binary(BinaryOp, ScalarExpr, ScalarExpr),
}

/// Immutable symbolic scalar. Cloning is a reference-count bump.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpr(Arc<Node>);

impl ScalarExpr {
    /// A real literal. Non-finite values are not representable.
    pub fn constant(value: f64) -> Self {
        assert!(value.is_finite(), "expression constants must be finite");
        ScalarExpr(Arc::new(Node::Const(value)))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn symbol(name: &str) -> Self {
        ScalarExpr(Arc::new(Node::Symbol(Arc::from(name))))
    }

    /// Verbatim unary node, no folding.
    pub fn unary(op: UnaryOp, arg: ScalarExpr) -> Self {
        ScalarExpr(Arc::new(Node::Unary(op, arg)))
    }

    /// Verbatim binary node, no folding.
    pub fn binary(op: BinaryOp, lhs: ScalarExpr, rhs: ScalarExpr) -> Self {
        ScalarExpr(Arc::new(Node::Binary(op, lhs, rhs)))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Free symbols, coordinates and parameters alike.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Symbol(s) => {
                out.insert(s.to_string());
            }
            Node::Unary(_, a) => a.collect_symbols(out),
            Node::Binary(_, a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Symbol(s) => &**s == name,
            Node::Unary(_, a) => a.depends_on(name),
            Node::Binary(_, a, b) => a.depends_on(name) || b.depends_on(name),
        }
    }

    /// Number of nodes counted as a tree (shared subtrees counted each time).
    pub fn tree_size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Symbol(_) => 1,
            Node::Unary(_, a) => 1 + a.tree_size(),
            Node::Binary(_, a, b) => 1 + a.tree_size() + b.tree_size(),
        }
    }

    /// Simultaneous substitution of symbols. Nodes are rebuilt verbatim, so
    /// `exp(t)` with `t -> 0` becomes `exp(0)`, not `1`.
    pub fn substitute(&self, map: &BTreeMap<String, ScalarExpr>) -> ScalarExpr {
        if map.is_empty() {
            return self.clone();
        }
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Symbol(s) => map.get(&**s).cloned().unwrap_or_else(|| self.clone()),
            Node::Unary(op, a) => ScalarExpr::unary(*op, a.substitute(map)),
            Node::Binary(op, a, b) => ScalarExpr::binary(*op, a.substitute(map), b.substitute(map)),
        }
    }

    /// Replaces parameters with constants and folds. Coordinates are left alone.
    pub fn bind_params(&self, binding: &ParamBinding) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Symbol(s) => match binding.get(s) {
                Some(v) => ScalarExpr::constant(v),
                None => self.clone(),
            },
            Node::Unary(op, a) => fold_unary(*op, a.bind_params(binding)),
            Node::Binary(op, a, b) => fold_binary(*op, a.bind_params(binding), b.bind_params(binding)),
        }
    }

    pub fn pow(&self, exponent: impl Into<ScalarExpr>) -> ScalarExpr {
        fold_binary(BinaryOp::Pow, self.clone(), exponent.into())
    }

    pub fn exp(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Exp, self.clone())
    }

    pub fn ln(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Ln, self.clone())
    }

    pub fn sin(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Sin, self.clone())
    }

    pub fn cos(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Cos, self.clone())
    }

    pub fn sqrt(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Sqrt, self.clone())
    }

    pub fn abs(&self) -> ScalarExpr {
        fold_unary(UnaryOp::Abs, self.clone())
    }

    /// Sum with folding; the empty sum is zero.
    pub fn sum<I: IntoIterator<Item = ScalarExpr>>(terms: I) -> ScalarExpr {
        terms
            .into_iter()
            .fold(ScalarExpr::zero(), |acc, t| fold_binary(BinaryOp::Add, acc, t))
    }
}

impl From<f64> for ScalarExpr {
    fn from(v: f64) -> Self {
        ScalarExpr::constant(v)
    }
}

impl From<i32> for ScalarExpr {
    fn from(v: i32) -> Self {
        ScalarExpr::constant(f64::from(v))
    }
}

fn apply_unary(op: UnaryOp, x: f64) -> Option<f64> {
    let v = match op {
        UnaryOp::Neg => -x,
        UnaryOp::Exp => x.exp(),
        UnaryOp::Ln if x > 0.0 => x.ln(),
        UnaryOp::Ln => return None,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Sqrt if x >= 0.0 => x.sqrt(),
        UnaryOp::Sqrt => return None,
        UnaryOp::Abs => x.abs(),
    };
    v.is_finite().then_some(v)
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Option<f64> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div if b != 0.0 => a / b,
        BinaryOp::Div => return None,
        BinaryOp::Pow => eval::checked_pow(a, b).ok()?,
    };
    v.is_finite().then_some(v)
}

pub(crate) fn fold_unary(op: UnaryOp, a: ScalarExpr) -> ScalarExpr {
    if let Some(x) = a.as_const() {
        if let Some(v) = apply_unary(op, x) {
            return ScalarExpr::constant(v);
        }
    }
    if op == UnaryOp::Neg {
        if let Node::Unary(UnaryOp::Neg, inner) = a.node() {
            return inner.clone();
        }
    }
    ScalarExpr::unary(op, a)
}

pub(crate) fn fold_binary(op: BinaryOp, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(v) = apply_binary(op, x, y) {
            return ScalarExpr::constant(v);
        }
    }
    match op {
        BinaryOp::Add => {
            if a.is_zero() {
                return b;
            }
            if b.is_zero() {
                return a;
            }
        }
        BinaryOp::Sub => {
            if b.is_zero() {
                return a;
            }
            if a.is_zero() {
                return fold_unary(UnaryOp::Neg, b);
            }
        }
        BinaryOp::Mul => {
            if a.is_zero() || b.is_zero() {
                return ScalarExpr::zero();
            }
            if a.is_one() {
                return b;
            }
            if b.is_one() {
                return a;
            }
        }
        BinaryOp::Div => {
            if b.is_one() {
                return a;
            }
            if a.is_zero() && b.as_const().map_or(true, |c| c != 0.0) {
                return ScalarExpr::zero();
            }
        }
        BinaryOp::Pow => {
            if b.is_zero() {
                return ScalarExpr::one();
            }
            if b.is_one() {
                return a;
            }
            if a.is_one() {
                return ScalarExpr::one();
            }
        }
    }
    ScalarExpr::binary(op, a, b)
}

macro_rules! folding_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                fold_binary($op, self, rhs)
            }
        }
        impl ops::$trait<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                fold_binary($op, self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                fold_binary($op, self, rhs.clone())
            }
        }
        impl ops::$trait<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                fold_binary($op, self.clone(), rhs)
            }
        }
        impl ops::$trait<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                fold_binary($op, self, ScalarExpr::constant(rhs))
            }
        }
        impl ops::$trait<f64> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                fold_binary($op, self.clone(), ScalarExpr::constant(rhs))
            }
        }
    };
}

folding_binop!(Add, add, BinaryOp::Add);
folding_binop!(Sub, sub, BinaryOp::Sub);
folding_binop!(Mul, mul, BinaryOp::Mul);
folding_binop!(Div, div, BinaryOp::Div);

impl ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        fold_unary(UnaryOp::Neg, self)
    }
}

impl ops::Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        fold_unary(UnaryOp::Neg, self.clone())
    }
}

// Printing precedence levels. Binary operands are parenthesized so that the
// printed text parses back to the same tree.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl ScalarExpr {
    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => PREC_NEG,
            Node::Const(_) | Node::Symbol(_) => PREC_ATOM,
            Node::Unary(UnaryOp::Neg, _) => PREC_NEG,
            Node::Unary(_, _) => PREC_ATOM,
            Node::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => PREC_ADD,
            Node::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => PREC_MUL,
            Node::Binary(BinaryOp::Pow, _, _) => PREC_POW,
        }
    }

    fn fmt_min(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.fmt_bare(f)?;
            write!(f, ")")
        } else {
            self.fmt_bare(f)
        }
    }

    fn fmt_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(v) => write!(f, "{}", v),
            Node::Symbol(s) => write!(f, "{}", s),
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                a.fmt_min(f, PREC_NEG)
            }
            Node::Unary(op, a) => {
                write!(f, "{}(", op.function_name().unwrap_or("?"))?;
                a.fmt_bare(f)?;
                write!(f, ")")
            }
            Node::Binary(op, a, b) => {
                let (lmin, rmin) = match op {
                    BinaryOp::Add | BinaryOp::Sub => (PREC_ADD, PREC_MUL),
                    BinaryOp::Mul | BinaryOp::Div => (PREC_MUL, PREC_NEG),
                    BinaryOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                a.fmt_min(f, lmin)?;
                write!(f, "{}", op.symbol())?;
                b.fmt_min(f, rmin)
            }
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_bare(f)
    }
}
