use super::{BinaryOp, Node, ScalarExpr, UnaryOp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogOfNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("negative base {0} raised to non-integer power {1}")]
    PowDomain(f64, f64),
    #[error("result overflowed to a non-finite value")]
    Overflow,
    #[error("unbound symbol '{0}'")]
    Unbound(String),
}

/// Parameter name to value, e.g. `m -> 3`, `lambda -> 0.5`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamBinding(BTreeMap<String, f64>);

impl ParamBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub(crate) fn checked_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    let v = if exponent.fract() == 0.0 && exponent.abs() < 2_147_483_648.0 {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        base.powi(exponent as i32)
    } else {
        if base < 0.0 {
            return Err(EvalError::PowDomain(base, exponent));
        }
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        base.powf(exponent)
    };
    finite(v)
}

pub(crate) fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow)
    }
}

pub(crate) fn unary_value(op: UnaryOp, x: f64) -> Result<f64, EvalError> {
    match op {
        UnaryOp::Neg => Ok(-x),
        UnaryOp::Exp => finite(x.exp()),
        UnaryOp::Ln => {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(EvalError::LogOfNonPositive(x))
            }
        }
        UnaryOp::Sin => Ok(x.sin()),
        UnaryOp::Cos => Ok(x.cos()),
        UnaryOp::Sqrt => {
            if x >= 0.0 {
                Ok(x.sqrt())
            } else {
                Err(EvalError::SqrtOfNegative(x))
            }
        }
        UnaryOp::Abs => Ok(x.abs()),
    }
}

pub(crate) fn binary_value(op: BinaryOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinaryOp::Add => finite(a + b),
        BinaryOp::Sub => finite(a - b),
        BinaryOp::Mul => finite(a * b),
        BinaryOp::Div => {
            if b == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                finite(a / b)
            }
        }
        BinaryOp::Pow => checked_pow(a, b),
    }
}

impl ScalarExpr {
    /// Tree-walking evaluation. Coordinates (looked up by name in `coords`,
    /// values from `point`) shadow parameters of the same name.
    ///
    /// For repeated evaluation over many points use [`super::Program`].
    pub fn evaluate(&self, coords: &[String], point: &[f64], binding: &ParamBinding) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(v) => Ok(*v),
            Node::Symbol(s) => {
                if let Some(i) = coords.iter().position(|c| c == &**s) {
                    Ok(point[i])
                } else {
                    binding.get(s).ok_or_else(|| EvalError::Unbound(s.to_string()))
                }
            }
            Node::Unary(op, a) => unary_value(*op, a.evaluate(coords, point, binding)?),
            Node::Binary(op, a, b) => {
                let x = a.evaluate(coords, point, binding)?;
                let y = b.evaluate(coords, point, binding)?;
                binary_value(*op, x, y)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar_expr;

    fn coords4() -> Vec<String> {
        ["t", "x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn inverse_square_of_parameter() {
        let e = parse_scalar_expr("m^(-2)").unwrap();
        let v = e
            .evaluate(&coords4(), &[3.0, -1.0, 2.0, 7.0], &ParamBinding::new().with("m", 4.0))
            .unwrap();
        assert_eq!(v, 0.0625);
    }

    #[test]
    fn origin_bump_at_origin() {
        let e = parse_scalar_expr("1/(m^2+x^2+y^2+z^2)").unwrap();
        let v = e
            .evaluate(&coords4(), &[0.0; 4], &ParamBinding::new().with("m", 1.0))
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn exp_at_zero() {
        let e = parse_scalar_expr("exp(t)").unwrap();
        assert_eq!(e.evaluate(&coords4(), &[0.0; 4], &ParamBinding::new()).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        let b = ParamBinding::new();
        let c = coords4();
        let p = [0.0, -1.0, 0.0, 0.0];
        let ev = |s: &str| parse_scalar_expr(s).unwrap().evaluate(&c, &p, &b);
        assert_eq!(ev("1/t"), Err(EvalError::DivisionByZero));
        assert!(matches!(ev("ln(x)"), Err(EvalError::LogOfNonPositive(_))));
        assert!(matches!(ev("sqrt(x)"), Err(EvalError::SqrtOfNegative(_))));
        assert!(matches!(ev("x^0.5"), Err(EvalError::PowDomain(_, _))));
        assert_eq!(ev("x^3"), Ok(-1.0));
        assert_eq!(ev("exp(1000)"), Err(EvalError::Overflow));
        assert_eq!(ev("q"), Err(EvalError::Unbound("q".into())));
    }

    #[test]
    fn coordinates_shadow_parameters() {
        let e = parse_scalar_expr("x").unwrap();
        let v = e
            .evaluate(&coords4(), &[0.0, 5.0, 0.0, 0.0], &ParamBinding::new().with("x", 1.0))
            .unwrap();
        assert_eq!(v, 5.0);
    }
}
