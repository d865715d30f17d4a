//! Decision procedures for the compact-open, open and global topologies on
//! spaces of Lorentzian metrics.
//!
//! Every verdict is three-valued. A procedure only answers yes or no when
//! its sup estimates carry a definite status; anything else is reported as
//! inconclusive with the evidence attached.

mod ball;
mod bounding;
mod chain;
mod convergence;
mod observable;

use crate::geometry::{christoffel, covariant_derivative, Connection, GeometryError, MetricField, TensorField};
use crate::norms::{uniform_norm, Domain, NormError, Scope, SupEstimate, SupStatus};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ball::{ball_contains, conformal_ball_transfer, refine_ball, BallSpec, Membership, MembershipVerdict};
pub use bounding::{
    canonical_equivalent_riemannian, mutual_bounding, norm_equivalent, norm_equivalent_on, same_component,
    BoundingReport, ComponentVerdict, EquivalenceReport, EquivalenceVerdict, RatioEvidence, Tri,
};
pub use chain::{uniform_chain, ChainCenter, ChainReport, Endpoint};
pub use convergence::{
    continuity_check, converge_check, judge_trace, vanishes, ContinuityConfig, ContinuityReport, ContinuityRound,
    ContinuityVerdict, ConvergeConfig, ConvergenceReport, ConvergenceVerdict, Family, Trace, TracePoint,
};
pub use observable::{observable_convergence, ObservableReport, ObservableTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyKind {
    CompactOpen,
    Open,
    Global,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [TopologyKind::CompactOpen, TopologyKind::Open, TopologyKind::Global];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::CompactOpen => "compact_open",
            TopologyKind::Open => "open",
            TopologyKind::Global => "global",
        }
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "compact_open" | "compactopen" | "co" => Ok(TopologyKind::CompactOpen),
            "open" => Ok(TopologyKind::Open),
            "global" => Ok(TopologyKind::Global),
            other => Err(format!("unknown topology '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("invalid ball: {0}")]
    InvalidBall(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reference metric is not norm-equivalent to the center ({0:?})")]
    ReferenceNotEquivalent(EquivalenceVerdict),
    #[error("distance between the endpoints is not bounded ({0:?}); they lie in different components")]
    WrongComponent(SupStatus),
    #[error("chain factor c = {scale} >= 1: the endpoints are {distance} apart, within half the radius")]
    DegenerateChain { scale: f64, distance: f64 },
    #[error("refined radius {0} is not positive")]
    MarginExhausted(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// Worst of a set of statuses: unbounded, then inconclusive, then bounded.
pub(crate) fn worst(statuses: impl IntoIterator<Item = SupStatus>) -> SupStatus {
    let mut out = SupStatus::Bounded;
    for s in statuses {
        match s {
            SupStatus::Unbounded => return SupStatus::Unbounded,
            SupStatus::Inconclusive => out = SupStatus::Inconclusive,
            SupStatus::Bounded => {}
        }
    }
    out
}

/// `∇^(j) K` for `j = 0..=order` under `conn`.
pub(crate) fn derivative_tower(k: &TensorField, conn: &Connection, domain: &Domain, order: usize) -> Vec<TensorField> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(k.clone());
    for j in 0..order {
        let next = covariant_derivative(&out[j], conn, &domain.chart);
        out.push(next);
    }
    out
}

/// Uniform norms of `∇^(j) K` under `h` for `j = 0..=order`, with `h`'s
/// Levi-Civita connection.
pub(crate) fn ck_norms(
    k: &TensorField,
    h: &MetricField,
    domain: &Domain,
    scope: Scope,
    order: usize,
    probes: &[Vec<f64>],
) -> Result<Vec<SupEstimate>, TopologyError> {
    let conn = if order > 0 {
        christoffel(h, &domain.chart)
    } else {
        Connection::flat(h.dim())
    };
    derivative_tower(k, &conn, domain, order)
        .iter()
        .map(|d| uniform_norm(d, h, domain, scope, probes).map_err(TopologyError::from))
        .collect()
}

/// Collapses per-order estimates into `max_j` value and worst status.
pub(crate) fn combine(estimates: &[SupEstimate]) -> (f64, SupStatus) {
    let value = estimates.iter().map(|e| e.value).fold(0.0, f64::max);
    (value, worst(estimates.iter().map(|e| e.status)))
}
