use super::{Chart, GeometryError, MetricField, TensorField};
use crate::expr::{ParamBinding, Program, ScalarExpr};
use crate::linalg;
use std::collections::BTreeMap;

const ROUND_TRIP_TOL: f64 = 1e-9;
const JACOBIAN_TOL: f64 = 1e-12;

/// A diffeomorphism `ψ` of the chart domain given by explicit forward and
/// inverse coordinate maps.
#[derive(Debug, Clone)]
pub struct Diffeo {
    forward: Vec<ScalarExpr>,
    inverse: Vec<ScalarExpr>,
    /// `∂ψ^i/∂x^j` at `i*n + j`.
    jacobian: Vec<ScalarExpr>,
    /// `∂(ψ⁻¹)^a/∂y^c` evaluated at `y = ψ(x)`.
    inverse_jacobian_at_image: Vec<ScalarExpr>,
}

fn jacobian(map: &[ScalarExpr], chart: &Chart) -> Vec<ScalarExpr> {
    map.iter()
        .flat_map(|f| chart.coords().iter().map(move |x| f.differentiate(x)))
        .collect()
}

fn as_substitution(map: &[ScalarExpr], chart: &Chart) -> BTreeMap<String, ScalarExpr> {
    chart.coords().iter().cloned().zip(map.iter().cloned()).collect()
}

impl Diffeo {
    /// Builds `ψ` and checks at each sample point that `ψ∘ψ⁻¹` is the
    /// identity and that both Jacobians are invertible.
    pub fn new(
        chart: &Chart,
        forward: Vec<ScalarExpr>,
        inverse: Vec<ScalarExpr>,
        binding: &ParamBinding,
        points: &[Vec<f64>],
    ) -> Result<Self, GeometryError> {
        let n = chart.dim();
        if forward.len() != n || inverse.len() != n {
            return Err(GeometryError::Shape(format!("coordinate maps need {n} components")));
        }
        let jac = jacobian(&forward, chart);
        let inv_jac = jacobian(&inverse, chart);
        let inverse_jacobian_at_image = inv_jac
            .iter()
            .map(|e| e.substitute(&as_substitution(&forward, chart)))
            .collect();
        let d = Diffeo {
            forward,
            inverse,
            jacobian: jac,
            inverse_jacobian_at_image,
        };
        d.validate(chart, binding, points)?;
        Ok(d)
    }

    /// Translation `x ↦ x + offset`.
    pub fn translation(chart: &Chart, offset: &[f64]) -> Result<Self, GeometryError> {
        let forward = (0..chart.dim()).map(|i| chart.coord(i) + offset[i]).collect();
        let inverse = (0..chart.dim()).map(|i| chart.coord(i) - offset[i]).collect();
        Diffeo::new(chart, forward, inverse, &ParamBinding::new(), &[])
    }

    fn validate(&self, chart: &Chart, binding: &ParamBinding, points: &[Vec<f64>]) -> Result<(), GeometryError> {
        let n = chart.dim();
        let compile = |exprs: &[ScalarExpr]| {
            Program::compile(exprs, chart.coords(), binding).map_err(|e| GeometryError::eval(&[], e))
        };
        let fwd = compile(&self.forward)?;
        let inv = compile(&self.inverse)?;
        let jac = compile(&self.jacobian)?;
        for p in points {
            let q = inv.eval(p).map_err(|e| GeometryError::eval(p, e))?;
            let back = fwd.eval(&q).map_err(|e| GeometryError::eval(&q, e))?;
            let scale = 1.0 + p.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let deviation = back.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if deviation > ROUND_TRIP_TOL * scale {
                return Err(GeometryError::DiffeoMismatch {
                    point: p.clone(),
                    deviation,
                });
            }
            for x in [p, &q] {
                let j = jac.eval(x).map_err(|e| GeometryError::eval(x, e))?;
                let (det, _) = linalg::det_and_inverse(&j, n);
                if det.abs() < JACOBIAN_TOL {
                    return Err(GeometryError::NonInvertibleJacobian { point: x.clone(), det });
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self) -> &[ScalarExpr] {
        &self.forward
    }

    pub fn inverse(&self) -> &[ScalarExpr] {
        &self.inverse
    }

    pub fn apply(&self, chart: &Chart, p: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, GeometryError> {
        eval_map(&self.forward, chart, p, binding)
    }

    pub fn apply_inverse(&self, chart: &Chart, p: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, GeometryError> {
        eval_map(&self.inverse, chart, p, binding)
    }
}

fn eval_map(map: &[ScalarExpr], chart: &Chart, p: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, GeometryError> {
    map.iter()
        .map(|f| f.evaluate(chart.coords(), p, binding).map_err(|e| GeometryError::eval(p, e)))
        .collect()
}

/// `ψ*K`: components at `x` are those of `K` at `ψ(x)`, with covariant
/// slots contracted against `Dψ(x)` and contravariant slots against
/// `D(ψ⁻¹)(ψ(x))`.
pub fn pullback(k: &TensorField, psi: &Diffeo, chart: &Chart) -> TensorField {
    let n = k.dim();
    let (r, s) = k.rank();
    let mut out = k.substitute(&as_substitution(&psi.forward, chart));
    let jt: Vec<ScalarExpr> = (0..n * n).map(|i| psi.jacobian[(i % n) * n + i / n].clone()).collect();
    for slot in r..r + s {
        out = out.apply_slot(slot, &jt);
    }
    for slot in 0..r {
        out = out.apply_slot(slot, &psi.inverse_jacobian_at_image);
    }
    out
}

/// Pullback of both forms of a metric; they stay mutually inverse.
pub fn pullback_metric(m: &MetricField, psi: &Diffeo, chart: &Chart) -> MetricField {
    MetricField::from_parts(
        pullback(m.covariant(), psi, chart),
        pullback(m.contravariant(), psi, chart),
        m.signature(),
    )
    .expect("pullback preserves metric ranks")
}
