use super::{BinaryOp, Node, ScalarExpr, UnaryOp};

impl ScalarExpr {
    /// Exact partial derivative with respect to the symbol `var`. Every other
    /// symbol is held constant.
    ///
    /// `abs(u)` differentiates to `u*u'/abs(u)`, which is a division by zero
    /// wherever `u` vanishes.
    pub fn differentiate(&self, var: &str) -> ScalarExpr {
        if !self.depends_on(var) {
            return ScalarExpr::zero();
        }
        match self.node() {
            Node::Const(_) => ScalarExpr::zero(),
            Node::Symbol(s) => {
                if &**s == var {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }
            Node::Unary(op, u) => {
                let du = u.differentiate(var);
                match op {
                    UnaryOp::Neg => -du,
                    UnaryOp::Exp => u.exp() * du,
                    UnaryOp::Ln => du / u,
                    UnaryOp::Sin => u.cos() * du,
                    UnaryOp::Cos => -(u.sin() * du),
                    UnaryOp::Sqrt => du / (ScalarExpr::constant(2.0) * u.sqrt()),
                    UnaryOp::Abs => (u * &du) / u.abs(),
                }
            }
            Node::Binary(op, u, v) => match op {
                BinaryOp::Add => u.differentiate(var) + v.differentiate(var),
                BinaryOp::Sub => u.differentiate(var) - v.differentiate(var),
                BinaryOp::Mul => u.differentiate(var) * v + u * v.differentiate(var),
                BinaryOp::Div => {
                    let num = u.differentiate(var) * v - u * v.differentiate(var);
                    num / v.pow(2.0)
                }
                BinaryOp::Pow => {
                    if !v.depends_on(var) {
                        let lowered = v - 1.0;
                        v * u.pow(lowered) * u.differentiate(var)
                    } else {
                        // d(u^v) = u^v (v' ln u + v u'/u)
                        let inner = v.differentiate(var) * u.ln() + v * u.differentiate(var) / u;
                        u.pow(v.clone()) * inner
                    }
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse_scalar_expr, EvalError, ParamBinding};

    fn coords() -> Vec<String> {
        vec!["t".into(), "x".into()]
    }

    #[test]
    fn square_differentiates_to_two_x() {
        let d = parse_scalar_expr("x^2").unwrap().differentiate("x");
        assert_eq!(d.to_string(), "2*x");
    }

    #[test]
    fn exp_is_its_own_derivative() {
        let d = parse_scalar_expr("exp(t)").unwrap().differentiate("t");
        assert_eq!(d.to_string(), "exp(t)");
    }

    #[test]
    fn bump_derivative_matches_hand_value() {
        // d/dx m/(1+(x-m)^2) = -2m(x-m)/(1+(x-m)^2)^2 = -1 at m=2, x=3
        let e = parse_scalar_expr("m/(1+(x-m)^2)").unwrap();
        let d = e.differentiate("x");
        let b = ParamBinding::new().with("m", 2.0);
        let v = d.evaluate(&coords(), &[0.0, 3.0], &b).unwrap();
        assert!((v + 1.0).abs() < 1e-15);

        let h = 1e-5;
        let f = |x: f64| e.evaluate(&coords(), &[0.0, x], &b).unwrap();
        let fd = (f(3.0 + h) - f(3.0 - h)) / (2.0 * h);
        assert!((fd - v).abs() <= 1e-6 * v.abs());
    }

    #[test]
    fn parameters_are_constants() {
        let d = parse_scalar_expr("m*x").unwrap().differentiate("m");
        assert_eq!(d.to_string(), "x");
        assert!(parse_scalar_expr("m^2").unwrap().differentiate("x").is_zero());
    }

    #[test]
    fn abs_derivative_is_a_domain_error_at_zero() {
        let d = parse_scalar_expr("abs(x)").unwrap().differentiate("x");
        let err = d.evaluate(&coords(), &[0.0, 0.0], &ParamBinding::new());
        assert_eq!(err, Err(EvalError::DivisionByZero));
        assert_eq!(d.evaluate(&coords(), &[0.0, -2.0], &ParamBinding::new()), Ok(-1.0));
    }

    #[test]
    fn variable_exponent() {
        // d/dx x^x = x^x (ln x + 1)
        let d = parse_scalar_expr("x^x").unwrap().differentiate("x");
        let v = d.evaluate(&coords(), &[0.0, 2.0], &ParamBinding::new()).unwrap();
        assert!((v - 4.0 * (2f64.ln() + 1.0)).abs() < 1e-12);
    }
}
