use super::bounding::{norm_equivalent, EquivalenceVerdict};
use super::{ck_norms, combine, worst, TopologyError, TopologyKind};
use crate::expr::ScalarExpr;
use crate::geometry::{MetricField, Signature, TensorField};
use crate::norms::{Domain, NormError, Scope, SupEstimate, SupStatus};
use serde::Serialize;
use std::sync::OnceLock;

/// `B(K, ε; h)`: fields whose first `order` covariant derivatives of the
/// difference from `center` have uniform `h`-norm below `ε` over `scope`.
#[derive(Debug, Clone)]
pub struct BallSpec {
    pub center: TensorField,
    pub radius: f64,
    pub reference: MetricField,
    pub scope: Scope,
    pub order: usize,
    pub kind: TopologyKind,
    /// Extra sample points for every sup taken against this ball.
    pub probes: Vec<Vec<f64>>,
    center_metric: Option<MetricField>,
    equivalence: OnceLock<EquivalenceVerdict>,
}

impl BallSpec {
    fn build(
        center: TensorField,
        radius: f64,
        reference: MetricField,
        scope: Scope,
        order: usize,
        kind: TopologyKind,
        center_metric: Option<MetricField>,
    ) -> Result<Self, TopologyError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(TopologyError::InvalidBall(format!("radius must be positive, got {radius}")));
        }
        if reference.signature() != Signature::Riemannian {
            return Err(TopologyError::InvalidBall("reference metric must be Riemannian".into()));
        }
        if center.dim() != reference.dim() {
            return Err(TopologyError::InvalidBall("center and reference dimensions differ".into()));
        }
        Ok(BallSpec {
            center,
            radius,
            reference,
            scope,
            order,
            kind,
            probes: Vec::new(),
            center_metric,
            equivalence: OnceLock::new(),
        })
    }

    /// A basic set of the compact-open topology, measured on one level box.
    pub fn compact_open(
        center: TensorField,
        radius: f64,
        reference: MetricField,
        level: usize,
        order: usize,
    ) -> Result<Self, TopologyError> {
        Self::build(center, radius, reference, Scope::Level(level), order, TopologyKind::CompactOpen, None)
    }

    /// A basic set of the open topology: any Riemannian reference, sup over
    /// all of ℝⁿ.
    pub fn open(center: TensorField, radius: f64, reference: MetricField, order: usize) -> Result<Self, TopologyError> {
        Self::build(center, radius, reference, Scope::Full, order, TopologyKind::Open, None)
    }

    /// A basic set of the global topology. The reference must be
    /// norm-equivalent to the center metric; this is checked on first use.
    pub fn global(center: &MetricField, radius: f64, reference: MetricField, order: usize) -> Result<Self, TopologyError> {
        Self::build(
            center.covariant().clone(),
            radius,
            reference,
            Scope::Full,
            order,
            TopologyKind::Global,
            Some(center.clone()),
        )
    }

    pub fn with_probes(mut self, probes: Vec<Vec<f64>>) -> Self {
        self.probes = probes;
        self
    }

    /// For global balls, the cached result of the reference equivalence
    /// check, which must be `Equivalent`.
    pub fn validate(&self, domain: &Domain) -> Result<(), TopologyError> {
        let Some(g) = &self.center_metric else {
            return Ok(());
        };
        let verdict = match self.equivalence.get() {
            Some(v) => *v,
            None => {
                let v = norm_equivalent(&self.reference, g, domain)?.verdict;
                *self.equivalence.get_or_init(|| v)
            }
        };
        match verdict {
            EquivalenceVerdict::Equivalent => Ok(()),
            other => Err(TopologyError::ReferenceNotEquivalent(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MembershipVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub verdict: MembershipVerdict,
    /// `ε − max_j ‖∇^j (K − K')‖`.
    #[serde(serialize_with = "crate::serde_ext::extended")]
    pub margin: f64,
    /// One estimate per derivative order.
    pub estimates: Vec<SupEstimate>,
}

/// Relative band around the radius inside which membership is undecided.
const BOUNDARY_TOL: f64 = 1e-12;

/// Whether `candidate` lies in `ball`. Holds when every order is bounded
/// below the radius; fails when any order reaches the radius or is
/// unbounded. A distance within rounding of the radius is inconclusive.

pub fn ball_contains(ball: &BallSpec, candidate: &TensorField, domain: &Domain) -> Result<Membership, TopologyError> {
    ball.validate(domain)?;
    let diff = ball.center.sub(candidate)?;
    let estimates = ck_norms(&diff, &ball.reference, domain, ball.scope, ball.order, &ball.probes)?;
    let (max, status) = combine(&estimates);
    let on_boundary = (max - ball.radius).abs() <= BOUNDARY_TOL * (1.0 + ball.radius);
    let verdict = if status == SupStatus::Unbounded || (max >= ball.radius && !on_boundary) {
        MembershipVerdict::Fails
    } else if status == SupStatus::Bounded && !on_boundary {
        MembershipVerdict::Holds
    } else {
        MembershipVerdict::Inconclusive
    };
    Ok(Membership {
        verdict,
        margin: ball.radius - max,
        estimates,
    })
}

/// A ball around `g''` inside both `b1` and `b2`, given that `g''` lies in
/// both. The reference is `h + h'` on contravariant components and the
/// radius is the smaller of the two membership margins.
pub fn refine_ball(
    b1: &BallSpec,
    b2: &BallSpec,
    g3: &MetricField,
    domain: &Domain,
) -> Result<BallSpec, TopologyError> {
    if b1.kind != b2.kind || b1.scope != b2.scope {
        return Err(TopologyError::InvalidArgument("balls come from different topologies".into()));
    }
    let m1 = ball_contains(b1, g3.covariant(), domain)?;
    let m2 = ball_contains(b2, g3.covariant(), domain)?;
    for m in [&m1, &m2] {
        if m.verdict != MembershipVerdict::Holds {
            return Err(TopologyError::PreconditionViolated(format!(
                "center is not certified inside both balls ({:?})",
                m.verdict
            )));
        }
    }
    let radius = m1.margin.min(m2.margin);
    if !(radius > 0.0) {
        return Err(TopologyError::MarginExhausted(radius));
    }
    let contra = b1.reference.contravariant().add(b2.reference.contravariant())?;
    let reference = MetricField::from_contravariant(contra, Signature::Riemannian)?;
    let order = b1.order.max(b2.order);
    let mut out = match b1.kind {
        TopologyKind::Global => BallSpec::global(g3, radius, reference, order)?,
        _ => BallSpec::build(g3.covariant().clone(), radius, reference, b1.scope, order, b1.kind, None)?,
    };
    out.probes = b1.probes.iter().chain(&b2.probes).cloned().collect();
    out.validate(domain)?;
    Ok(out)
}

/// Carries `B(Ω g, ε; h)` to `B(g, ε; Ω h)`, with `Ω h` scaling the
/// contravariant components. At order 0, `Ω K'` is in the first ball
/// exactly when `K'` is in the second. `Ω` must be positive at every
/// sample point and the center must be a (0,2) field.
pub fn conformal_ball_transfer(ball: &BallSpec, omega: &ScalarExpr, domain: &Domain) -> Result<BallSpec, TopologyError> {
    if ball.center.rank() != (0, 2) {
        return Err(TopologyError::InvalidArgument("conformal transfer needs a (0,2) center".into()));
    }
    for p in &domain.samples {
        let v = omega
            .evaluate(domain.chart.coords(), p, &domain.binding)
            .map_err(|e| NormError::Eval {
                point: p.clone(),
                source: e,
            })?;
        if !(v > 0.0) {
            return Err(TopologyError::PreconditionViolated(format!(
                "conformal factor {v} is not positive at {p:?}"
            )));
        }
    }
    let center = ball.center.map(|c| c / omega);
    let reference = MetricField::from_parts(
        ball.reference.covariant().map(|c| c / omega),
        ball.reference.contravariant().scale(omega),
        Signature::Riemannian,
    )?;
    let center_metric = ball
        .center_metric
        .as_ref()
        .map(|g| MetricField::from_parts(center.clone(), g.contravariant().scale(omega), g.signature()))
        .transpose()?;
    let mut out = BallSpec::build(center, ball.radius, reference, ball.scope, ball.order, ball.kind, center_metric)?;
    out.probes = ball.probes.clone();
    Ok(out)
}

impl Membership {
    /// Worst status among the per-order estimates.
    pub fn status(&self) -> SupStatus {
        worst(self.estimates.iter().map(|e| e.status))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar_expr;
    use crate::geometry::Chart;
    use crate::norms::CompactExhaustion;

    fn e(s: &str) -> ScalarExpr {
        parse_scalar_expr(s).unwrap()
    }

    fn domain2() -> Domain {
        Domain::new(Chart::new(&["t", "x"]).unwrap(), CompactExhaustion::new(2, 1.0, 6, 9).unwrap(), 2)
    }

    fn eta_plus(s: &str) -> TensorField {
        TensorField::diagonal_covariant(vec![e(&format!("1 + {s}")), e("-1")])
    }

    #[test]
    fn membership_by_margin() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let ball = BallSpec::open(eta.covariant().clone(), 0.5, MetricField::euclidean(2), 0).unwrap();
        let inside = ball_contains(&ball, &eta_plus("0.3/(1+x^2)"), &d).unwrap();
        assert_eq!(inside.verdict, MembershipVerdict::Holds);
        assert!((inside.margin - 0.2).abs() < 1e-12);
        let outside = ball_contains(&ball, &eta_plus("0.7/(1+x^2)"), &d).unwrap();
        assert_eq!(outside.verdict, MembershipVerdict::Fails);
        let unbounded = ball_contains(&ball, &eta_plus("x^2"), &d).unwrap();
        assert_eq!(unbounded.verdict, MembershipVerdict::Fails);
    }

    #[test]
    fn derivative_order_tightens_the_ball() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let wiggle = eta_plus("0.1*sin(10*x)");
        let c0 = BallSpec::open(eta.covariant().clone(), 0.5, MetricField::euclidean(2), 0).unwrap();
        let c1 = BallSpec::open(eta.covariant().clone(), 0.5, MetricField::euclidean(2), 1).unwrap();
        assert_eq!(ball_contains(&c0, &wiggle, &d).unwrap().verdict, MembershipVerdict::Holds);
        assert_eq!(ball_contains(&c1, &wiggle, &d).unwrap().verdict, MembershipVerdict::Fails);
    }

    #[test]
    fn global_ball_requires_equivalent_reference() {
        let d = domain2();
        let eta = MetricField::minkowski(2);
        let bad = MetricField::from_contravariant(
            TensorField::diagonal_contravariant(vec![e("exp(-t)"), e("1")]),
            Signature::Riemannian,
        )
        .unwrap();
        let ball = BallSpec::global(&eta, 0.5, bad, 0).unwrap();
        assert!(matches!(
            ball_contains(&ball, eta.covariant(), &d),
            Err(TopologyError::ReferenceNotEquivalent(EquivalenceVerdict::NotEquivalent))
        ));
        let good = BallSpec::global(&eta, 0.5, MetricField::euclidean(2), 0).unwrap();
        assert_eq!(ball_contains(&good, eta.covariant(), &d).unwrap().verdict, MembershipVerdict::Holds);
    }

    #[test]
    fn invalid_balls_are_rejected() {
        let eta = MetricField::minkowski(2);
        assert!(BallSpec::open(eta.covariant().clone(), 0.0, MetricField::euclidean(2), 0).is_err());
        assert!(BallSpec::open(eta.covariant().clone(), 1.0, MetricField::minkowski(2), 0).is_err());
    }

    #[test]
    fn refined_radius_is_the_smaller_margin() {
        let d = domain2();
        let h = MetricField::euclidean(2);
        let g = MetricField::minkowski(2);
        let g3 = MetricField::from_covariant(eta_plus("0.3"), Signature::Lorentzian).unwrap();
        let g2 = MetricField::from_covariant(eta_plus("0.5"), Signature::Lorentzian).unwrap();
        // ‖g - g''‖ = 0.3 and ‖g' - g''‖ = 0.2
        let b1 = BallSpec::open(g.covariant().clone(), 1.0, h.clone(), 0).unwrap();
        let b2 = BallSpec::open(g2.covariant().clone(), 0.5, h.clone(), 0).unwrap();
        let r = refine_ball(&b1, &b2, &g3, &d).unwrap();
        assert!((r.radius - 0.3).abs() < 1e-12);
        let tight = BallSpec::open(g2.covariant().clone(), 0.2, h.clone(), 0).unwrap();
        assert_eq!(ball_contains(&tight, g3.covariant(), &d).unwrap().verdict, MembershipVerdict::Inconclusive);
        assert!(matches!(
            refine_ball(&b1, &tight, &g3, &d),
            Err(TopologyError::PreconditionViolated(_))
        ));
        let outside = BallSpec::open(g2.covariant().clone(), 0.15, h, 0).unwrap();
        assert_eq!(ball_contains(&outside, g3.covariant(), &d).unwrap().verdict, MembershipVerdict::Fails);
    }

    #[test]
    fn conformal_transfer_preserves_membership() {
        let d = domain2();
        let g = MetricField::minkowski(2);
        let omega = e("2 + sin(x)");
        let h = MetricField::euclidean(2);
        let big = BallSpec::open(g.covariant().scale(&omega), 0.4, h, 0).unwrap();
        let small = conformal_ball_transfer(&big, &omega, &d).unwrap();
        for s in ["0.1/(1+x^2)", "0.25*exp(-x^2)", "0.5/(2+t^2)"] {
            let k = eta_plus(s);
            let a = ball_contains(&big, &k.scale(&omega), &d).unwrap();
            let b = ball_contains(&small, &k, &d).unwrap();
            assert_eq!(a.verdict, b.verdict);
            assert!((a.margin - b.margin).abs() < 1e-12);
        }
    }
}
