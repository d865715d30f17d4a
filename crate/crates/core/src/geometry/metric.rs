use super::{Chart, GeometryError, TensorField, MAX_SYMBOLIC_DIM};
use crate::expr::{ParamBinding, ScalarExpr};
use crate::linalg;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Declared signature of a metric. Lorentzian means `(+,-,...,-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Lorentzian,
    Riemannian,
}

/// Signature observed at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSignature {
    Lorentzian,
    Riemannian,
    Degenerate,
    Other { positive: usize, negative: usize },
}

impl PointSignature {
    pub fn matches(self, sig: Signature) -> bool {
        matches!(
            (self, sig),
            (PointSignature::Lorentzian, Signature::Lorentzian) | (PointSignature::Riemannian, Signature::Riemannian)
        )
    }
}

const EIGEN_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const DET_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-9;

/// Classifies a symmetric matrix by the signs of its eigenvalues.
pub(crate) fn classify(values: &[f64], n: usize) -> PointSignature {
    let norm = linalg::frobenius(values);
    let eig = linalg::symmetric_eigenvalues(values, n, EIGEN_TOL);
    let cutoff = EIGEN_TOL * norm;
    if norm == 0.0 || eig.iter().any(|l| l.abs() < cutoff) {
        return PointSignature::Degenerate;
    }
    let positive = eig.iter().filter(|&&l| l > 0.0).count();
    let negative = n - positive;
    match (positive, negative) {
        (p, 0) if p == n => PointSignature::Riemannian,
        (1, m) if m == n - 1 => PointSignature::Lorentzian,
        _ => PointSignature::Other { positive, negative },
    }
}

/// Symbolic inverse of an `n x n` matrix by cofactor expansion, with
/// memoized minors. Returns the inverse entries and the determinant.
pub fn symbolic_inverse(matrix: &[ScalarExpr], n: usize) -> Result<(Vec<ScalarExpr>, ScalarExpr), GeometryError> {
    if n > MAX_SYMBOLIC_DIM {
        return Err(GeometryError::DimensionTooLarge(n));
    }
    if matrix.len() != n * n {
        return Err(GeometryError::Shape(format!("expected {} entries, got {}", n * n, matrix.len())));
    }
    let mut memo = HashMap::new();
    let all = (1u32 << n) - 1;
    let det = minor(matrix, n, all, all, &mut memo);
    if det.is_zero() {
        return Err(GeometryError::Degenerate {
            point: Vec::new(),
            det: 0.0,
        });
    }
    let mut inv = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // (A⁻¹)_ij = (-1)^{i+j} M_ji / det
            let m = if n == 1 {
                ScalarExpr::one()
            } else {
                minor(matrix, n, all & !(1 << j), all & !(1 << i), &mut memo)
            };
            let cof = if (i + j) % 2 == 0 { m } else { -m };
            inv.push(cof / &det);
        }
    }
    Ok((inv, det))
}

/// Determinant of the submatrix with the given row and column masks,
/// expanded along its first row.
fn minor(a: &[ScalarExpr], n: usize, rows: u32, cols: u32, memo: &mut HashMap<(u32, u32), ScalarExpr>) -> ScalarExpr {
    if let Some(d) = memo.get(&(rows, cols)) {
        return d.clone();
    }
    let r = rows.trailing_zeros() as usize;
    let d = if rows.count_ones() == 1 {
        a[r * n + cols.trailing_zeros() as usize].clone()
    } else {
        let mut terms = Vec::new();
        let mut sign_even = true;
        for c in (0..n).filter(|c| cols & (1 << c) != 0) {
            let entry = &a[r * n + c];
            if !entry.is_zero() {
                let sub = minor(a, n, rows & !(1 << r), cols & !(1 << c), memo);
                let term = entry * sub;
                terms.push(if sign_even { term } else { -term });
            }
            sign_even = !sign_even;
        }
        ScalarExpr::sum(terms)
    };
    memo.insert((rows, cols), d.clone());
    d
}

/// A metric with both covariant and contravariant components.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    cov: TensorField,
    contra: TensorField,
    signature: Signature,
}

impl MetricField {
    /// From covariant components `m_ab`; the inverse is computed
    /// symbolically.
    pub fn from_covariant(cov: TensorField, signature: Signature) -> Result<Self, GeometryError> {
        if cov.rank() != (0, 2) {
            return Err(GeometryError::Shape("covariant metric must have rank (0,2)".into()));
        }
        let n = cov.dim();
        let (inv, _) = symbolic_inverse(cov.comps(), n)?;
        let contra = TensorField::new(n, 2, 0, inv)?;
        Ok(MetricField {
            cov,
            contra,
            signature,
        })
    }

    /// From contravariant components `m^ab`; the covariant form is computed
    /// symbolically.
    pub fn from_contravariant(contra: TensorField, signature: Signature) -> Result<Self, GeometryError> {
        if contra.rank() != (2, 0) {
            return Err(GeometryError::Shape("contravariant metric must have rank (2,0)".into()));
        }
        let n = contra.dim();
        let (inv, _) = symbolic_inverse(contra.comps(), n)?;
        let cov = TensorField::new(n, 0, 2, inv)?;
        Ok(MetricField {
            cov,
            contra,
            signature,
        })
    }

    /// Both forms supplied by the caller, who guarantees they are mutually
    /// inverse. [`MetricField::verify`] checks this numerically.
    pub fn from_parts(cov: TensorField, contra: TensorField, signature: Signature) -> Result<Self, GeometryError> {
        if cov.rank() != (0, 2) || contra.rank() != (2, 0) || cov.dim() != contra.dim() {
            return Err(GeometryError::Shape("metric parts must be (0,2) and (2,0) on one chart".into()));
        }
        Ok(MetricField {
            cov,
            contra,
            signature,
        })
    }

    pub fn euclidean(n: usize) -> Self {
        let ones = vec![ScalarExpr::one(); n];
        MetricField {
            cov: TensorField::diagonal_covariant(ones.clone()),
            contra: TensorField::diagonal_contravariant(ones),
            signature: Signature::Riemannian,
        }
    }

    /// `diag(1, -1, ..., -1)`.
    pub fn minkowski(n: usize) -> Self {
        let entries: Vec<ScalarExpr> = (0..n)
            .map(|i| ScalarExpr::constant(if i == 0 { 1.0 } else { -1.0 }))
            .collect();
        MetricField {
            cov: TensorField::diagonal_covariant(entries.clone()),
            contra: TensorField::diagonal_contravariant(entries),
            signature: Signature::Lorentzian,
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn covariant(&self) -> &TensorField {
        &self.cov
    }

    pub fn contravariant(&self) -> &TensorField {
        &self.contra
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn bind_params(&self, binding: &ParamBinding) -> MetricField {
        MetricField {
            cov: self.cov.bind_params(binding),
            contra: self.contra.bind_params(binding),
            signature: self.signature,
        }
    }

    /// Checks symmetry, nondegeneracy, the inverse identity and the declared
    /// signature at each point.
    pub fn verify(&self, chart: &Chart, binding: &ParamBinding, points: &[Vec<f64>]) -> Result<(), GeometryError> {
        let n = self.dim();
        let cov_prog = self.cov.compile(chart, binding).map_err(|e| GeometryError::eval(&[], e))?;
        let contra_prog = self.contra.compile(chart, binding).map_err(|e| GeometryError::eval(&[], e))?;
        for p in points {
            let g = cov_prog.eval(p).map_err(|e| GeometryError::eval(p, e))?;
            let h = contra_prog.eval(p).map_err(|e| GeometryError::eval(p, e))?;
            for m in [&g, &h] {
                let scale = 1.0 + m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let dev = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| (m[i * n + j] - m[j * n + i]).abs())
                    .fold(0.0, f64::max);
                if dev > SYMMETRY_TOL * scale {
                    return Err(GeometryError::NotSymmetric {
                        point: p.clone(),
                        deviation: dev,
                    });
                }
            }
            let (det, _) = linalg::det_and_inverse(&g, n);
            if det.abs() < DET_TOL {
                return Err(GeometryError::Degenerate { point: p.clone(), det });
            }
            let prod = linalg::matmul(&g, &h, n);
            let id = linalg::identity(n);
            let dev = prod.iter().zip(&id).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dev > INVERSE_TOL {
                return Err(GeometryError::InverseMismatch {
                    point: p.clone(),
                    deviation: dev,
                });
            }
            let found = classify(&g, n);
            if !found.matches(self.signature) {
                return Err(GeometryError::SignatureMismatch {
                    point: p.clone(),
                    expected: self.signature,
                    found,
                });
            }
        }
        Ok(())
    }
}

/// The contravariant components `m^ab`.
pub fn metric_inverse(m: &MetricField) -> TensorField {
    m.contra.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureReport {
    pub points: Vec<(Vec<f64>, PointSignature)>,
    pub aggregate: PointSignature,
}

/// Eigen-sign classification at each point; the aggregate is the common
/// signature, and disagreement between points is an error.
pub fn signature_check(
    m: &MetricField,
    chart: &Chart,
    binding: &ParamBinding,
    points: &[Vec<f64>],
) -> Result<SignatureReport, GeometryError> {
    let n = m.dim();
    let prog = m.cov.compile(chart, binding).map_err(|e| GeometryError::eval(&[], e))?;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let g = prog.eval(p).map_err(|e| GeometryError::eval(p, e))?;
        out.push((p.clone(), classify(&g, n)));
    }
    let aggregate = out.first().map(|x| x.1).unwrap_or(PointSignature::Degenerate);
    if out.iter().any(|x| x.1 != aggregate) {
        return Err(GeometryError::MixedSignature);
    }
    Ok(SignatureReport { points: out, aggregate })
}

/// `Ω m`: covariant components times `Ω`, contravariant divided by `Ω`.
/// `Ω` must be positive at every sample point.
pub fn conformal_rescale(
    m: &MetricField,
    omega: &ScalarExpr,
    chart: &Chart,
    binding: &ParamBinding,
    points: &[Vec<f64>],
) -> Result<MetricField, GeometryError> {
    for p in points {
        let v = omega
            .evaluate(chart.coords(), p, binding)
            .map_err(|e| GeometryError::eval(p, e))?;
        if !(v > 0.0) {
            return Err(GeometryError::NonPositiveFactor {
                point: p.clone(),
                value: v,
            });
        }
    }
    Ok(MetricField {
        cov: m.cov.scale(omega),
        contra: m.contra.map(|c| c / omega),
        signature: m.signature,
    })
}
