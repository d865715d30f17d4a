use super::{derivative_tower, TopologyError};
use crate::expr::ScalarExpr;
use crate::geometry::{christoffel, Connection, MetricField, TensorField};
use crate::norms::{estimate_sup, fiber_norm_at, fiber_norm_expr, Domain, FiberNorm, Scope, SupEstimate, SupStatus};
use crate::serde_ext::Extended;
use serde::Serialize;

/// Below this both sides of a ratio count as zero and the point is skipped.
const RATIO_FLOOR: f64 = 1e-14;
const CANONICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tri {
    Holds,
    Fails,
    Inconclusive,
}

impl Tri {
    fn from_statuses(statuses: impl IntoIterator<Item = SupStatus>) -> Tri {
        match super::worst(statuses) {
            SupStatus::Bounded => Tri::Holds,
            SupStatus::Unbounded => Tri::Fails,
            SupStatus::Inconclusive => Tri::Inconclusive,
        }
    }
}

/// One sup of a ratio of pointwise norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEvidence {
    pub label: String,
    pub estimate: SupEstimate,
}

/// `sup num/den` over `scope`. Points where both vanish are skipped; a
/// nonzero numerator over a vanishing denominator is `+∞`.
fn ratio_sup(
    num: &mut FiberNorm,
    den: &mut FiberNorm,
    domain: &Domain,
    scope: Scope,
    probes: &[Vec<f64>],
) -> Result<SupEstimate, TopologyError> {
    Ok(estimate_sup(&domain.exhaustion, scope, probes, |p| {
        let a = num.value(p)?;
        let b = den.value(p)?;
        Ok(if a < RATIO_FLOOR && b < RATIO_FLOOR {
            None
        } else if b < RATIO_FLOOR {
            Some(f64::INFINITY)
        } else {
            Some(a / b)
        })
    })?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundingReport {
    pub order: usize,
    /// `c_j` with `c_j |∇^j K|_f ≤ |∇^j K'|_f`.
    pub lower: Vec<Extended>,
    /// `c'_j` with `|∇^j K'|_f ≤ c'_j |∇^j K|_f`.
    pub upper: Vec<Extended>,
    pub verdict: Tri,
    pub evidence: Vec<RatioEvidence>,
}

/// Whether `K` and `K'` bound each other up to order `order`: for each
/// `j` there are positive constants with
/// `c |∇^j K|_f ≤ |∇^j K'|_f ≤ c' |∇^j K|_f` everywhere.
pub fn mutual_bounding(
    k: &TensorField,
    k2: &TensorField,
    f: &MetricField,
    domain: &Domain,
    order: usize,
) -> Result<BoundingReport, TopologyError> {
    let conn = if order > 0 {
        christoffel(f, &domain.chart)
    } else {
        Connection::flat(f.dim())
    };
    let a = derivative_tower(k, &conn, domain, order);
    let b = derivative_tower(k2, &conn, domain, order);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut evidence = Vec::new();
    for j in 0..=order {
        let mut na = FiberNorm::new(&a[j], f, &domain.chart, &domain.binding)?;
        let mut nb = FiberNorm::new(&b[j], f, &domain.chart, &domain.binding)?;
        let up = ratio_sup(&mut nb, &mut na, domain, Scope::Full, &[])?;
        let down = ratio_sup(&mut na, &mut nb, domain, Scope::Full, &[])?;
        upper.push(Extended(up.value));
        lower.push(Extended(1.0 / down.value));
        evidence.push(RatioEvidence {
            label: format!("|D^{j}K'|/|D^{j}K|"),
            estimate: up,
        });
        evidence.push(RatioEvidence {
            label: format!("|D^{j}K|/|D^{j}K'|"),
            estimate: down,
        });
    }
    let verdict = Tri::from_statuses(evidence.iter().map(|e| e.estimate.status));
    Ok(BoundingReport {
        order,
        lower,
        upper,
        verdict,
        evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquivalenceVerdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub verdict: EquivalenceVerdict,
    /// Names of the test fields, in the order they were tried.
    pub family: Vec<String>,
    pub evidence: Vec<RatioEvidence>,
}

/// [`norm_equivalent_on`] over all of ℝⁿ with no extra test fields.
pub fn norm_equivalent(f: &MetricField, f2: &MetricField, domain: &Domain) -> Result<EquivalenceReport, TopologyError> {
    norm_equivalent_on(f, f2, domain, Scope::Full, &[])
}

/// Whether `|·|_f` and `|·|_{f'}` are uniformly equivalent, tested on the
/// finite family `{f, f', euclidean, diag(exp(t), 1, ..., 1)}` plus `extra`.
/// Each test field `F` contributes `sup |F|_{f'}/|F|_f` and its reciprocal;
/// testing stops at the first unbounded ratio.
pub fn norm_equivalent_on(
    f: &MetricField,
    f2: &MetricField,
    domain: &Domain,
    scope: Scope,
    extra: &[(String, TensorField)],
) -> Result<EquivalenceReport, TopologyError> {
    let n = f.dim();
    let chart = &domain.chart;
    let exp_time = {
        let mut d = vec![ScalarExpr::one(); n];
        d[0] = chart.coord(0).exp();
        TensorField::diagonal_covariant(d)
    };
    let mut tests: Vec<(String, TensorField)> = vec![
        ("f".into(), f.covariant().clone()),
        ("f'".into(), f2.covariant().clone()),
        ("euclidean".into(), MetricField::euclidean(n).covariant().clone()),
        ("exp_time".into(), exp_time),
    ];
    tests.extend(extra.iter().cloned());
    let mut evidence = Vec::new();
    let mut family = Vec::new();
    for (name, field) in &tests {
        family.push(name.clone());
        let mut under_f = FiberNorm::new(field, f, chart, &domain.binding)?;
        let mut under_f2 = FiberNorm::new(field, f2, chart, &domain.binding)?;
        for (label, est) in [
            (
                format!("|{name}|_f'/|{name}|_f"),
                ratio_sup(&mut under_f2, &mut under_f, domain, scope, &[])?,
            ),
            (
                format!("|{name}|_f/|{name}|_f'"),
                ratio_sup(&mut under_f, &mut under_f2, domain, scope, &[])?,
            ),
        ] {
            let stop = est.is_unbounded();
            evidence.push(RatioEvidence { label, estimate: est });
            if stop {
                return Ok(EquivalenceReport {
                    verdict: EquivalenceVerdict::NotEquivalent,
                    family,
                    evidence,
                });
            }
        }
    }
    let verdict = if evidence.iter().all(|e| e.estimate.is_bounded()) {
        EquivalenceVerdict::Equivalent
    } else {
        EquivalenceVerdict::Inconclusive
    };
    Ok(EquivalenceReport {
        verdict,
        family,
        evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComponentVerdict {
    Same,
    Different,
    Inconclusive,
}

/// Whether `g` and `g'` lie in the same component of the global topology,
/// which is the case exactly when they are norm-equivalent.
pub fn same_component(
    g: &MetricField,
    g2: &MetricField,
    domain: &Domain,
) -> Result<(ComponentVerdict, EquivalenceReport), TopologyError> {
    let report = norm_equivalent(g, g2, domain)?;
    let verdict = match report.verdict {
        EquivalenceVerdict::Equivalent => ComponentVerdict::Same,
        EquivalenceVerdict::NotEquivalent => ComponentVerdict::Different,
        EquivalenceVerdict::Inconclusive => ComponentVerdict::Inconclusive,
    };
    Ok((verdict, report))
}

/// `h*` with `h*^{ab} = h0^{ab} / |g|_{h0}`, so that `|g|_{h*} ≡ 1`. The
/// identity is certified at the domain's sample points.
pub fn canonical_equivalent_riemannian(
    g: &MetricField,
    h0: &MetricField,
    domain: &Domain,
) -> Result<MetricField, TopologyError> {
    canonical_for(g.covariant(), h0, domain)
}

pub(crate) fn canonical_for(g: &TensorField, h0: &MetricField, domain: &Domain) -> Result<MetricField, TopologyError> {
    if g.rank() != (0, 2) {
        return Err(TopologyError::InvalidArgument("canonical reference needs a (0,2) field".into()));
    }
    let norm = fiber_norm_expr(g, h0)?;
    for p in &domain.samples {
        let v = norm
            .evaluate(domain.chart.coords(), p, &domain.binding)
            .map_err(|e| crate::norms::NormError::Eval {
                point: p.clone(),
                source: e,
            })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(TopologyError::PreconditionViolated(format!(
                "|g|_h0 = {v} at {p:?}; the canonical reference needs it positive"
            )));
        }
    }
    let h = MetricField::from_parts(
        h0.covariant().scale(&norm),
        h0.contravariant().map(|c| c / &norm),
        h0.signature(),
    )?;
    for p in &domain.samples {
        let v = fiber_norm_at(g, &h, &domain.chart, p, &domain.binding)?;
        if (v - 1.0).abs() > CANONICAL_TOL {
            return Err(TopologyError::PreconditionViolated(format!(
                "|g|_h* = {v} at {p:?} instead of 1"
            )));
        }
    }
    Ok(h)
}
