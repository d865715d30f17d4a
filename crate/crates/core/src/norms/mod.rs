//! Pointwise fiber norms, uniform norms over compact exhaustions and the
//! status protocol that turns a finite sample into a sup estimate.

mod exhaustion;
mod fiber;
mod nuclear;

use crate::expr::{EvalError, ParamBinding};
use crate::geometry::{Chart, GeometryError};
use crate::sampling::random_points;
use thiserror::Error;

pub use exhaustion::{
    estimate_sup, grid_schedule, judge_full, uniform_norm, CompactExhaustion, Scope, SupEstimate, SupStatus,
    BLOWUP_THRESHOLD,
};
pub use fiber::{fiber_norm_at, fiber_norm_expr, frobenius_cross_check, in_kernel, FiberNorm, KernelVerdict};
pub use nuclear::{nuclear_frobenius_bounds, NuclearBounds};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("evaluation failed at {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("degenerate reference metric at {point:?} (determinant {det:e})")]
    Degenerate { point: Vec<f64>, det: f64 },
    #[error("reference metric is not positive definite at {point:?}")]
    NotRiemannian { point: Vec<f64> },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid exhaustion: {0}")]
    InvalidExhaustion(String),
}

impl NormError {
    pub(crate) fn eval(point: &[f64], source: EvalError) -> Self {
        NormError::Eval {
            point: point.to_vec(),
            source,
        }
    }
}

/// Everything a uniform-norm computation needs besides the fields: the
/// chart, parameter values, the exhaustion, and sample points used for
/// pointwise certificates.
#[derive(Debug, Clone)]
pub struct Domain {
    pub chart: Chart,
    pub binding: ParamBinding,
    pub exhaustion: CompactExhaustion,
    pub samples: Vec<Vec<f64>>,
}

/// Number of seeded random sample points besides the origin.
pub const DEFAULT_SAMPLE_COUNT: usize = 24;

impl Domain {
    /// Samples are the origin plus seeded points in `[-4 R0, 4 R0]^n`.
    pub fn new(chart: Chart, exhaustion: CompactExhaustion, seed: u64) -> Self {
        let n = chart.dim();
        let mut samples = vec![vec![0.0; n]];
        samples.extend(random_points(n, 4.0 * exhaustion.r0(), DEFAULT_SAMPLE_COUNT, seed));
        Domain {
            chart,
            binding: ParamBinding::new(),
            exhaustion,
            samples,
        }
    }

    pub fn with_binding(mut self, binding: ParamBinding) -> Self {
        self.binding = binding;
        self
    }

    pub fn with_param(&self, name: &str, value: f64) -> Domain {
        let mut d = self.clone();
        d.binding.set(name, value);
        d
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}
