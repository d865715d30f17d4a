use super::{Chart, GeometryError};
use crate::expr::{EvalError, ParamBinding, Program, ScalarExpr};
use std::collections::{BTreeMap, BTreeSet};

/// A rank-(r,s) tensor field on a chart of dimension n.
///
/// Components are stored row-major over the multi-index
/// `(a_1 .. a_r, b_1 .. b_s)`, contravariant slots first.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    contra: usize,
    cov: usize,
    comps: Vec<ScalarExpr>,
}

impl TensorField {
    pub fn new(dim: usize, contra: usize, cov: usize, comps: Vec<ScalarExpr>) -> Result<Self, GeometryError> {
        let want = dim.pow((contra + cov) as u32);
        if comps.len() != want {
            return Err(GeometryError::Shape(format!(
                "rank ({contra},{cov}) on dimension {dim} needs {want} components, got {}",
                comps.len()
            )));
        }
        Ok(TensorField {
            dim,
            contra,
            cov,
            comps,
        })
    }

    pub fn zeros(dim: usize, contra: usize, cov: usize) -> Self {
        let len = dim.pow((contra + cov) as u32);
        TensorField {
            dim,
            contra,
            cov,
            comps: vec![ScalarExpr::zero(); len],
        }
    }

    pub fn scalar(dim: usize, value: ScalarExpr) -> Self {
        TensorField {
            dim,
            contra: 0,
            cov: 0,
            comps: vec![value],
        }
    }

    pub fn from_fn(dim: usize, contra: usize, cov: usize, mut f: impl FnMut(&[usize]) -> ScalarExpr) -> Self {
        let mut t = Self::zeros(dim, contra, cov);
        for flat in 0..t.comps.len() {
            let idx = t.multi_index(flat);
            t.comps[flat] = f(&idx);
        }
        t
    }

    /// Rank-2 field from a row-major matrix of components.
    pub fn from_matrix(contra: usize, cov: usize, rows: Vec<Vec<ScalarExpr>>) -> Result<Self, GeometryError> {
        if contra + cov != 2 {
            return Err(GeometryError::Shape("from_matrix needs a rank-2 field".into()));
        }
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GeometryError::Shape(format!("component matrix is not {dim}x{dim}")));
        }
        Self::new(dim, contra, cov, rows.into_iter().flatten().collect())
    }

    /// Diagonal (0,2) field.
    pub fn diagonal_covariant(entries: Vec<ScalarExpr>) -> Self {
        Self::diagonal(0, 2, entries)
    }

    /// Diagonal (2,0) field.
    pub fn diagonal_contravariant(entries: Vec<ScalarExpr>) -> Self {
        Self::diagonal(2, 0, entries)
    }

    fn diagonal(contra: usize, cov: usize, entries: Vec<ScalarExpr>) -> Self {
        let n = entries.len();
        Self::from_fn(n, contra, cov, |ix| {
            if ix[0] == ix[1] {
                entries[ix[0]].clone()
            } else {
                ScalarExpr::zero()
            }
        })
    }

    /// Outer product; the result's contravariant slots are `self`'s followed
    /// by `other`'s, and likewise for covariant slots.
    pub fn outer(&self, other: &TensorField) -> Result<TensorField, GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::Shape("outer product across dimensions".into()));
        }
        let (r1, s1) = self.rank();
        let (r2, _) = other.rank();
        let contra = r1 + r2;
        let cov = s1 + other.cov;
        Ok(Self::from_fn(self.dim, contra, cov, |ix| {
            let mut a = Vec::with_capacity(r1 + s1);
            let mut b = Vec::with_capacity(r2 + other.cov);
            a.extend_from_slice(&ix[..r1]);
            b.extend_from_slice(&ix[r1..contra]);
            a.extend_from_slice(&ix[contra..contra + s1]);
            b.extend_from_slice(&ix[contra + s1..]);
            self.component(&a) * other.component(&b)
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(contravariant, covariant)` slot counts.
    pub fn rank(&self) -> (usize, usize) {
        (self.contra, self.cov)
    }

    pub fn slots(&self) -> usize {
        self.contra + self.cov
    }

    pub fn comps(&self) -> &[ScalarExpr] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<ScalarExpr> {
        self.comps
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.slots());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.slots()];
        for slot in (0..idx.len()).rev() {
            idx[slot] = flat % self.dim;
            flat /= self.dim;
        }
        idx
    }

    pub fn component(&self, idx: &[usize]) -> &ScalarExpr {
        &self.comps[self.flat_index(idx)]
    }

    fn check_same_shape(&self, other: &TensorField) -> Result<(), GeometryError> {
        if self.dim != other.dim || self.rank() != other.rank() {
            return Err(GeometryError::Shape(format!(
                "rank ({},{}) on dimension {} vs rank ({},{}) on dimension {}",
                self.contra, self.cov, self.dim, other.contra, other.cov, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField, GeometryError> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField, GeometryError> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &TensorField, f: impl Fn(&ScalarExpr, &ScalarExpr) -> ScalarExpr) -> TensorField {
        TensorField {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
            ..self.clone()
        }
    }

    /// Pointwise multiplication by a scalar expression.
    pub fn scale(&self, factor: &ScalarExpr) -> TensorField {
        self.map(|c| factor * c)
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> TensorField {
        TensorField {
            comps: self.comps.iter().map(f).collect(),
            ..self.clone()
        }
    }

    pub fn bind_params(&self, binding: &ParamBinding) -> TensorField {
        self.map(|c| c.bind_params(binding))
    }

    pub fn substitute(&self, map: &BTreeMap<String, ScalarExpr>) -> TensorField {
        self.map(|c| c.substitute(map))
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.comps.iter().all(ScalarExpr::is_zero)
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        self.comps.iter().flat_map(|c| c.symbols()).collect()
    }

    pub fn compile(&self, chart: &Chart, binding: &ParamBinding) -> Result<Program, EvalError> {
        Program::compile(&self.comps, chart.coords(), binding)
    }

    /// Numeric component values at a point.
    pub fn eval_at(&self, chart: &Chart, point: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, GeometryError> {
        self.compile(chart, binding)
            .and_then(|p| p.eval(point))
            .map_err(|e| GeometryError::eval(point, e))
    }

    /// Applies an `n x n` matrix of expressions (`out x in`) to one slot:
    /// `T'[.. o ..] = Σ_i mat[o][i] T[.. i ..]`.
    pub(crate) fn apply_slot(&self, slot: usize, mat: &[ScalarExpr]) -> TensorField {
        let n = self.dim;
        let stride = n.pow((self.slots() - slot - 1) as u32);
        let mut out = Vec::with_capacity(self.comps.len());
        for flat in 0..self.comps.len() {
            let o = (flat / stride) % n;
            let base = flat - o * stride;
            out.push(ScalarExpr::sum(
                (0..n).map(|i| &mat[o * n + i] * &self.comps[base + i * stride]),
            ));
        }
        TensorField {
            comps: out,
            ..self.clone()
        }
    }

    /// Full contraction `φ^{A}_{B} ψ^{B}_{A}` of a rank-(r,s) field with a
    /// rank-(s,r) field.
    pub fn full_contraction(&self, other: &TensorField) -> Result<ScalarExpr, GeometryError> {
        if self.dim != other.dim || self.contra != other.cov || self.cov != other.contra {
            return Err(GeometryError::Shape(format!(
                "cannot fully contract rank ({},{}) with rank ({},{})",
                self.contra, self.cov, other.contra, other.cov
            )));
        }
        let r = self.contra;
        let terms = (0..self.comps.len()).map(|flat| {
            let ix = self.multi_index(flat);
            let mut jx = Vec::with_capacity(ix.len());
            jx.extend_from_slice(&ix[r..]);
            jx.extend_from_slice(&ix[..r]);
            &self.comps[flat] * other.component(&jx)
        });
        Ok(ScalarExpr::sum(terms))
    }
}
