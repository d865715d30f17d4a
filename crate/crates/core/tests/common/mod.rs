#![allow(dead_code)]

use lorentz_topology::expr::{parse_scalar_expr, ScalarExpr};
use lorentz_topology::geometry::{Chart, MetricField, Signature, TensorField};
use proptest::prelude::*;

pub fn e(s: &str) -> ScalarExpr {
    parse_scalar_expr(s).unwrap_or_else(|err| panic!("{s}: {err}"))
}

pub fn chart3() -> Chart {
    Chart::new(&["t", "x", "y"]).unwrap()
}

/// `(a)*t + (b)*x + (c)*y`.
fn phase(c: &[f64]) -> String {
    format!("({})*t + ({})*x + ({})*y", c[0], c[1], c[2])
}

/// 18 coefficients in `[-1, 1]` for [`metric3`].
pub fn metric_coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 18)
}

/// A symmetric 3x3 field with diagonal magnitudes in `[1, 4]` and
/// off-diagonal entries within `0.3`. The off-diagonal part has Frobenius
/// norm below 1, so the signs of the diagonal fix the signature.
pub fn metric3(c: &[f64], lorentzian: bool) -> MetricField {
    let mut rows = vec![vec![ScalarExpr::zero(); 3]; 3];
    let mut k = 0;
    for i in 0..3 {
        let sign = if lorentzian && i > 0 { "-" } else { "" };
        rows[i][i] = e(&format!("{sign}(2.5 + 1.5*sin({}))", phase(&c[k..k + 3])));
        k += 3;
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let off = e(&format!("0.3*cos({})", phase(&c[k..k + 3])));
            rows[i][j] = off.clone();
            rows[j][i] = off;
            k += 3;
        }
    }
    let sig = if lorentzian {
        Signature::Lorentzian
    } else {
        Signature::Riemannian
    };
    MetricField::from_covariant(TensorField::from_matrix(0, 2, rows).unwrap(), sig).unwrap()
}

/// Coefficients for [`field3`]: four per component of a rank ≤ 3 tensor.
pub fn field_coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 4 * 27)
}

/// A smooth `(contra, cov)` field on [`chart3`] with components
/// `a + b sin(c t + d x - y)`.
pub fn field3(contra: usize, cov: usize, c: &[f64]) -> TensorField {
    let mut k = 0;
    TensorField::from_fn(3, contra, cov, |_| {
        let q = &c[4 * k..4 * k + 4];
        k += 1;
        e(&format!("({}) + ({})*sin(({})*t + ({})*x - y)", q[0], q[1], q[2], q[3]))
    })
}

/// A rank `(r, s)` with `r + s` between 1 and 3.
pub fn rank() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3).prop_flat_map(|total| (0..=total).prop_map(move |r| (r, total - r)))
}
