use super::bounding::canonical_equivalent_riemannian;
use super::convergence::{judge_trace, ConvergenceVerdict, Family, Trace, TracePoint};
use super::{derivative_tower, worst, TopologyError};
use crate::geometry::{christoffel, MetricField, TensorField};
use crate::norms::{estimate_sup, uniform_norm, Domain, NormError, Scope, SupEstimate};
use serde::Serialize;

/// A test field `ψ` of rank `(s + order, r)` paired against `∇^(order) φ`
/// for a rank-`(r, s)` family `φ`.
#[derive(Debug, Clone)]
pub struct ObservableTest {
    pub name: String,
    pub field: TensorField,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableReport {
    pub family: String,
    pub verdict: ConvergenceVerdict,
    pub witness: Option<String>,
    /// `|sup φ_λ·ψ − sup φ·ψ|` per test.
    pub traces: Vec<Trace>,
    /// `sup φ·ψ` for the limit, per test.
    pub limits: Vec<SupEstimate>,
}

fn signed_sup(
    phi: &TensorField,
    psi: &TensorField,
    domain: &Domain,
    probes: &[Vec<f64>],
) -> Result<SupEstimate, TopologyError> {
    let s = phi.full_contraction(psi)?;
    let prog = crate::expr::Program::compile(&[s], domain.chart.coords(), &domain.binding)
        .map_err(|e| NormError::eval(&[], e))?;
    let mut scratch = prog.scratch();
    let mut out = [0.0];
    Ok(estimate_sup(&domain.exhaustion, Scope::Full, probes, |p| {
        prog.eval_into(p, &mut scratch, &mut out)?;
        Ok(Some(out[0]))
    })?)
}

/// Compares `sup_M (∇^(j) φ_λ · ψ)` with the same sup for the limit, for
/// each test field. Every `ψ` must be bounded under the canonical reference
/// of `g`; an unbounded one is rejected and named.
pub fn observable_convergence(
    family: &Family,
    limit: &TensorField,
    tests: &[ObservableTest],
    g: &MetricField,
    domain: &Domain,
) -> Result<ObservableReport, TopologyError> {
    let h_star = canonical_equivalent_riemannian(g, &MetricField::euclidean(g.dim()), domain)?;
    for t in tests {
        let est = uniform_norm(&t.field, &h_star, domain, Scope::Full, &[])?;
        if !est.is_bounded() {
            return Err(TopologyError::PreconditionViolated(format!(
                "test field '{}' is not bounded under the canonical reference ({:?}, sup {} near {:?})",
                t.name, est.status, est.value, est.argmax
            )));
        }
    }
    let conn = christoffel(g, &domain.chart);
    let max_order = tests.iter().map(|t| t.order).max().unwrap_or(0);
    let limit_tower = derivative_tower(limit, &conn, domain, max_order);
    let members: Vec<Vec<TensorField>> = family
        .values
        .iter()
        .map(|&v| derivative_tower(&family.member(v), &conn, domain, max_order))
        .collect();
    let mut traces = Vec::new();
    let mut limits = Vec::new();
    let mut verdicts = Vec::new();
    for t in tests {
        let star = signed_sup(&limit_tower[t.order], &t.field, domain, &[])?;
        let mut points = Vec::new();
        for (tower, &v) in members.iter().zip(&family.values) {
            let probes = family.member_probes(v, domain)?;
            let s = signed_sup(&tower[t.order], &t.field, domain, &probes)?;
            points.push(TracePoint {
                param: v,
                value: (s.value - star.value).abs(),
                status: worst([s.status, star.status]),
            });
        }
        let (v, w) = judge_trace(&points);
        verdicts.push((v, w.map(|w| format!("test '{}': {w}", t.name))));
        traces.push(Trace {
            label: t.name.clone(),
            points,
        });
        limits.push(star);
    }
    let verdict = if verdicts.iter().any(|v| v.0 == ConvergenceVerdict::Diverges) {
        ConvergenceVerdict::Diverges
    } else if verdicts.iter().all(|v| v.0 == ConvergenceVerdict::Converges) {
        ConvergenceVerdict::Converges
    } else {
        ConvergenceVerdict::Inconclusive
    };
    let witness = verdicts.into_iter().find(|v| v.0 == verdict).and_then(|v| v.1);
    Ok(ObservableReport {
        family: family.name.clone(),
        verdict,
        witness,
        traces,
        limits,
    })
}
