use super::{TopologyError, TopologyKind};
use crate::expr::ScalarExpr;
use crate::geometry::{MetricField, TensorField};
use crate::norms::{uniform_norm, Domain, Scope, SupEstimate, SupStatus};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Endpoint {
    Start,
    End,
}

/// A chain center `factor · g` (start) or `factor · g'` (end).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainCenter {
    pub base: Endpoint,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub kind: TopologyKind,
    pub radius: f64,
    /// `‖g − g'‖`.
    pub distance: f64,
    /// Contraction factor `c`.
    pub scale: f64,
    pub steps_start: usize,
    pub steps_end: usize,
    pub centers: Vec<ChainCenter>,
    /// Sup distance between consecutive centers.
    pub links: Vec<SupEstimate>,
    /// Every link is bounded and shorter than twice the radius, so
    /// consecutive balls intersect.
    pub certified: bool,
    #[serde(skip)]
    pub center_fields: Vec<TensorField>,
}

fn bounded_norm(k: &TensorField, h: &MetricField, domain: &Domain) -> Result<f64, TopologyError> {
    let est = uniform_norm(k, h, domain, Scope::Full, &[])?;
    match est.status {
        SupStatus::Bounded => Ok(est.value),
        other => Err(TopologyError::WrongComponent(other)),
    }
}

/// `⌊1 + x⌋`, with `x` within rounding of an integer taken as that integer.
fn steps(x: f64) -> usize {
    let r = x.round();
    let x = if (x - r).abs() <= 1e-9 * (1.0 + r) { r } else { x };
    (1.0 + x).floor() as usize
}

/// A chain of `radius`-balls of the global topology (reference `h2`, order
/// 0) from `g` to `g'`, each meeting the next.
///
/// With `d = ‖g − g'‖` and `c = radius / 2d`, the centers run `g, ..., c g`
/// in `N = ⌊1 + (1 − c)‖g‖/radius⌋` equal steps, then `c g', ..., g'` in
/// `N'` steps. Equal endpoints give a single ball; `c ≥ 1` otherwise is an
/// error, since the endpoints are then too close for the construction.
pub fn uniform_chain(
    g: &TensorField,
    g2: &TensorField,
    radius: f64,
    h2: &MetricField,
    domain: &Domain,
) -> Result<ChainReport, TopologyError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(TopologyError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let d = bounded_norm(&g.sub(g2)?, h2, domain)?;
    let mut centers = vec![ChainCenter {
        base: Endpoint::Start,
        factor: 1.0,
    }];
    let (scale, n1, n2) = if d == 0.0 {
        (1.0, 0, 0)
    } else {
        let c = radius / (2.0 * d);
        if c >= 1.0 {
            return Err(TopologyError::DegenerateChain { scale: c, distance: d });
        }
        let n1 = steps((1.0 - c) * bounded_norm(g, h2, domain)? / radius);
        let n2 = steps((1.0 - c) * bounded_norm(g2, h2, domain)? / radius);
        for n in 1..=n1 {
            centers.push(ChainCenter {
                base: Endpoint::Start,
                factor: 1.0 - n as f64 * (1.0 - c) / n1 as f64,
            });
        }
        for n in (0..=n2).rev() {
            centers.push(ChainCenter {
                base: Endpoint::End,
                factor: 1.0 - n as f64 * (1.0 - c) / n2 as f64,
            });
        }
        (c, n1, n2)
    };
    let center_fields: Vec<TensorField> = centers
        .iter()
        .map(|c| {
            let base = match c.base {
                Endpoint::Start => g,
                Endpoint::End => g2,
            };
            if c.factor == 1.0 {
                base.clone()
            } else {
                base.scale(&ScalarExpr::constant(c.factor))
            }
        })
        .collect();
    let links = center_fields
        .windows(2)
        .map(|w| uniform_norm(&w[1].sub(&w[0])?, h2, domain, Scope::Full, &[]).map_err(TopologyError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let certified = links.iter().all(|l| l.is_bounded() && l.value < 2.0 * radius);
    Ok(ChainReport {
        kind: TopologyKind::Global,
        radius,
        distance: d,
        scale,
        steps_start: n1,
        steps_end: n2,
        centers,
        links,
        certified,
        center_fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use crate::norms::CompactExhaustion;

    fn domain2() -> Domain {
        Domain::new(Chart::new(&["t", "x"]).unwrap(), CompactExhaustion::new(2, 1.0, 6, 9).unwrap(), 4)
    }

    #[test]
    fn scaled_minkowski_chain() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let h = crate::topology::canonical_equivalent_riemannian(&eta, &MetricField::euclidean(2), &d).unwrap();
        let g2 = eta.covariant().scale(&ScalarExpr::constant(2.0));
        let r = uniform_chain(eta.covariant(), &g2, 0.25, &h, &d).unwrap();
        assert!((r.scale - 0.125).abs() < 1e-12);
        assert_eq!((r.steps_start, r.steps_end), (4, 8));
        assert_eq!(r.centers.len(), 14);
        assert!(r.certified);
    }

    #[test]
    fn close_endpoints_are_reported() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let h = MetricField::euclidean(2);
        let g2 = eta.covariant().scale(&ScalarExpr::constant(1.01));
        let err = uniform_chain(eta.covariant(), &g2, 1.0, &h, &d).unwrap_err();
        assert!(matches!(err, TopologyError::DegenerateChain { scale, .. } if scale > 1.0));
        let same = uniform_chain(eta.covariant(), eta.covariant(), 1.0, &h, &d).unwrap();
        assert_eq!(same.centers.len(), 1);
        assert!(same.certified);
    }

    #[test]
    fn different_components_are_rejected() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let far = TensorField::diagonal_covariant(vec![crate::expr::parse_scalar_expr("exp(t)").unwrap(), (-1.0).into()]);
        let err = uniform_chain(eta.covariant(), &far, 0.5, &MetricField::euclidean(2), &d).unwrap_err();
        assert!(matches!(err, TopologyError::WrongComponent(SupStatus::Unbounded)));
    }
}
