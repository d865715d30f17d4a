//! Charts, tensor fields, metrics, Levi-Civita connections and pullbacks.
//!
//! Everything here is symbolic: components are [`ScalarExpr`]s over the
//! coordinates of a single global [`Chart`]. Invariants that can only be
//! checked numerically (symmetry, signature, nondegeneracy) are verified at
//! caller-supplied sample points.

mod connection;
mod diffeo;
mod metric;
mod tensor;

use crate::expr::{EvalError, ScalarExpr};
use serde::Serialize;
use thiserror::Error;

pub use connection::{christoffel, covariant_derivative, covariant_derivative_n, Connection};
pub use diffeo::{pullback, pullback_metric, Diffeo};
pub use metric::{
    conformal_rescale, metric_inverse, signature_check, symbolic_inverse, MetricField, PointSignature, Signature,
    SignatureReport,
};
pub use tensor::TensorField;

/// Largest dimension for which symbolic cofactor inversion is attempted.
pub const MAX_SYMBOLIC_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("evaluation failed at {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("degenerate metric at {point:?} (determinant {det:e})")]
    Degenerate { point: Vec<f64>, det: f64 },
    #[error("component matrix not symmetric at {point:?} (deviation {deviation:e})")]
    NotSymmetric { point: Vec<f64>, deviation: f64 },
    #[error("inverse check failed at {point:?} (deviation {deviation:e})")]
    InverseMismatch { point: Vec<f64>, deviation: f64 },
    #[error("expected {expected:?} signature, found {found:?} at {point:?}")]
    SignatureMismatch {
        point: Vec<f64>,
        expected: Signature,
        found: PointSignature,
    },
    #[error("signature differs between sample points")]
    MixedSignature,
    #[error("conformal factor {value} is not positive at {point:?}")]
    NonPositiveFactor { point: Vec<f64>, value: f64 },
    #[error("jacobian not invertible at {point:?} (determinant {det:e})")]
    NonInvertibleJacobian { point: Vec<f64>, det: f64 },
    #[error("forward and inverse maps disagree at {point:?} (deviation {deviation:e})")]
    DiffeoMismatch { point: Vec<f64>, deviation: f64 },
    #[error("dimension {0} exceeds the symbolic inversion limit")]
    DimensionTooLarge(usize),
}

impl GeometryError {
    pub(crate) fn eval(point: &[f64], source: EvalError) -> Self {
        GeometryError::Eval {
            point: point.to_vec(),
            source,
        }
    }
}

/// A single global coordinate chart on ℝⁿ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chart {
    coords: Vec<String>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, GeometryError> {
        let coords: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if coords.len() < 2 {
            return Err(GeometryError::InvalidChart("dimension must be at least 2".into()));
        }
        for (i, c) in coords.iter().enumerate() {
            if c.is_empty() {
                return Err(GeometryError::InvalidChart("empty coordinate name".into()));
            }
            if coords[..i].contains(c) {
                return Err(GeometryError::InvalidChart(format!("duplicate coordinate '{c}'")));
            }
        }
        Ok(Chart { coords })
    }

    /// Coordinates `t, x, y, z` on ℝ⁴.
    pub fn spacetime() -> Self {
        Chart::new(&["t", "x", "y", "z"]).expect("static chart")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> ScalarExpr {
        ScalarExpr::symbol(&self.coords[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_validation() {
        assert!(Chart::new(&["t"]).is_err());
        assert!(Chart::new(&["t", "t"]).is_err());
        let c = Chart::spacetime();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.index_of("y"), Some(2));
    }
}
