use super::NormError;
use crate::expr::{EvalError, ParamBinding, Program, ScalarExpr};
use crate::geometry::{Chart, MetricField, TensorField};
use crate::linalg;
use serde::Serialize;

/// `dst[.. o ..] = Σ_i mat[o][i] src[.. i ..]` on one slot of a flat tensor.
fn apply_slot(src: &[f64], dst: &mut [f64], n: usize, slots: usize, slot: usize, mat: &[f64]) {
    let stride = n.pow((slots - slot - 1) as u32);
    for (flat, d) in dst.iter_mut().enumerate() {
        let o = (flat / stride) % n;
        let base = flat - o * stride;
        let row = &mat[o * n..o * n + n];
        let mut acc = 0.0;
        for (i, m) in row.iter().enumerate() {
            acc += m * src[base + i * stride];
        }
        *d = acc;
    }
}

/// Compiled evaluator for the pointwise norm `|K|_f` of a fixed field under
/// a fixed metric.
///
/// The squared norm is the full contraction of `K` with itself, every
/// contravariant slot lowered by `f_ab` and every covariant slot raised by
/// `f^ab`.
#[derive(Debug, Clone)]
pub struct FiberNorm {
    program: Program,
    scratch: Vec<f64>,
    values: Vec<f64>,
    n: usize,
    contra: usize,
    slots: usize,
    ncomp: usize,
    /// Per-component weights when both metric forms are constant and
    /// diagonal, so that `K·K = Σ w_A K_A²`.
    weights: Option<Vec<f64>>,
    work: [Vec<f64>; 2],
}

impl FiberNorm {
    pub fn new(k: &TensorField, f: &MetricField, chart: &Chart, binding: &ParamBinding) -> Result<Self, NormError> {
        if k.dim() != f.dim() || k.dim() != chart.dim() {
            return Err(NormError::Shape("field, metric and chart dimensions differ".into()));
        }
        let (contra, cov) = k.rank();
        let mut exprs: Vec<ScalarExpr> = k.comps().to_vec();
        if contra > 0 {
            exprs.extend_from_slice(f.covariant().comps());
        }
        if cov > 0 {
            exprs.extend_from_slice(f.contravariant().comps());
        }
        let program = Program::compile(&exprs, chart.coords(), binding).map_err(|e| NormError::eval(&[], e))?;
        let ncomp = k.comps().len();
        let n = k.dim();
        let weights = constant_diagonal_weights(&program, k, ncomp);
        Ok(FiberNorm {
            scratch: program.scratch(),
            values: vec![0.0; exprs.len()],
            program,
            n,
            contra,
            slots: contra + cov,
            ncomp,
            weights,
            work: [vec![0.0; ncomp], vec![0.0; ncomp]],
        })
    }

    fn load(&mut self, p: &[f64]) -> Result<(), EvalError> {
        self.program.eval_into(p, &mut self.scratch, &mut self.values)
    }

    /// Transforms every slot of `K` (or of `|K|` with `|f|`), leaving the
    /// result in `work[result]`.
    fn transformed(&mut self, absolute: bool) -> usize {
        let (n, nc) = (self.n, self.ncomp);
        let mut cur = 0;
        let (k, rest) = self.values.split_at(nc);
        let nn = n * n;
        let (cov_m, contra_m) = if self.contra > 0 {
            (&rest[..nn], rest.get(nn..2 * nn).unwrap_or(&[]))
        } else {
            (&[][..], &rest[..rest.len().min(nn)])
        };
        let abs_buf;
        let (cov_m, contra_m): (&[f64], &[f64]) = if absolute {
            abs_buf = (
                cov_m.iter().map(|x| x.abs()).collect::<Vec<_>>(),
                contra_m.iter().map(|x| x.abs()).collect::<Vec<_>>(),
            );
            (&abs_buf.0, &abs_buf.1)
        } else {
            (cov_m, contra_m)
        };
        for (w, x) in self.work[0].iter_mut().zip(k) {
            *w = if absolute { x.abs() } else { *x };
        }
        for slot in 0..self.slots {
            let mat = if slot < self.contra { cov_m } else { contra_m };
            let [a, b] = &mut self.work;
            if cur == 0 {
                apply_slot(a, b, n, self.slots, slot, mat);
            } else {
                apply_slot(b, a, n, self.slots, slot, mat);
            }
            cur = 1 - cur;
        }
        cur
    }

    /// The signed full self-contraction `K·K` at `p`.
    pub fn contraction(&mut self, p: &[f64]) -> Result<f64, EvalError> {
        self.load(p)?;
        let s: f64 = if let Some(w) = &self.weights {
            self.values[..self.ncomp].iter().zip(w).map(|(a, w)| w * a * a).sum()
        } else {
            let cur = self.transformed(false);
            self.values[..self.ncomp]
                .iter()
                .zip(&self.work[cur])
                .map(|(a, b)| a * b)
                .sum()
        };
        if s.is_finite() {
            Ok(s)
        } else {
            Err(EvalError::Overflow)
        }
    }

    /// `|K|_f(p) = |K·K|^{1/2}`.
    pub fn value(&mut self, p: &[f64]) -> Result<f64, EvalError> {
        Ok(self.contraction(p)?.abs().sqrt())
    }

    /// The contraction together with the same sum taken over absolute
    /// values, which bounds its rounding error.
    pub fn contraction_with_mass(&mut self, p: &[f64]) -> Result<(f64, f64), EvalError> {
        let s = self.contraction(p)?;
        let cur = self.transformed(true);
        let mass: f64 = self.values[..self.ncomp]
            .iter()
            .zip(&self.work[cur])
            .map(|(a, b)| a.abs() * b)
            .sum();
        Ok((s, mass))
    }
}

/// Diagonal entries of the metric matrices feeding each slot, if all of
/// them are constant and diagonal.
fn constant_diagonal_weights(program: &Program, k: &TensorField, ncomp: usize) -> Option<Vec<f64>> {
    let n = k.dim();
    let (contra, cov) = k.rank();
    let mut diag = [Vec::new(), Vec::new()];
    let blocks = [contra > 0, cov > 0];
    let mut offset = ncomp;
    for (b, used) in blocks.iter().enumerate() {
        if !used {
            continue;
        }
        for r in 0..n {
            for c in 0..n {
                let v = program.constant_output(offset + r * n + c)?;
                if r == c {
                    diag[b].push(v);
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        offset += n * n;
    }
    Some(
        (0..ncomp)
            .map(|flat| {
                k.multi_index(flat)
                    .iter()
                    .enumerate()
                    .map(|(slot, &a)| if slot < contra { diag[0][a] } else { diag[1][a] })
                    .product()
            })
            .collect(),
    )
}

fn check_nondegenerate(f: &MetricField, chart: &Chart, p: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, NormError> {
    let n = f.dim();
    let g = f.covariant().eval_at(chart, p, binding)?;
    let (det, _) = linalg::det_and_inverse(&g, n);
    if det.abs() < 1e-12 {
        return Err(NormError::Degenerate { point: p.to_vec(), det });
    }
    Ok(g)
}

/// `|K|_f` at one point; `f` must be nondegenerate there.
pub fn fiber_norm_at(
    k: &TensorField,
    f: &MetricField,
    chart: &Chart,
    p: &[f64],
    binding: &ParamBinding,
) -> Result<f64, NormError> {
    check_nondegenerate(f, chart, p, binding)?;
    FiberNorm::new(k, f, chart, binding)?
        .value(p)
        .map_err(|e| NormError::eval(p, e))
}

/// The fiber norm as a symbolic expression `sqrt(abs(K·K))`.
pub fn fiber_norm_expr(k: &TensorField, f: &MetricField) -> Result<ScalarExpr, NormError> {
    if k.dim() != f.dim() {
        return Err(NormError::Shape("field and metric dimensions differ".into()));
    }
    let (contra, cov) = k.rank();
    let mut t = k.clone();
    for slot in 0..contra + cov {
        let mat = if slot < contra {
            f.covariant().comps()
        } else {
            f.contravariant().comps()
        };
        t = t.apply_slot(slot, mat);
    }
    let s = ScalarExpr::sum(k.comps().iter().zip(t.comps()).map(|(a, b)| a * b));
    Ok(s.abs().sqrt())
}

/// `|K|_h` computed independently of [`FiberNorm`]: factor `h = L Lᵀ`, move
/// `K` into the `h`-orthonormal frame `E = L^{-T}` and take the Frobenius
/// norm of its components there. `h` must be positive definite at `p`.
pub fn frobenius_cross_check(
    k: &TensorField,
    h: &MetricField,
    chart: &Chart,
    p: &[f64],
    binding: &ParamBinding,
) -> Result<f64, NormError> {
    let n = h.dim();
    let g = check_nondegenerate(h, chart, p, binding)?;
    let l = linalg::cholesky(&g, n, 1e-14).ok_or_else(|| NormError::NotRiemannian { point: p.to_vec() })?;
    let l_inv = linalg::lower_triangular_inverse(&l, n);
    // covariant slot: K'_i = Σ_a K_a E_ai = Σ_a (L⁻¹)_ia K_a
    // contravariant slot: V'^i = Σ_a (E⁻¹)_ia V^a = Σ_a L_ai V^a
    let lt = linalg::transpose(&l, n);
    let (contra, cov) = k.rank();
    let slots = contra + cov;
    let mut cur = k.eval_at(chart, p, binding)?;
    let mut next = vec![0.0; cur.len()];
    for slot in 0..slots {
        let mat = if slot < contra { &lt } else { &l_inv };
        apply_slot(&cur, &mut next, n, slots, slot, mat);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(linalg::frobenius(&cur))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelVerdict {
    pub point: Vec<f64>,
    pub in_kernel: bool,
    /// `|K|_f` at the point.
    pub value: f64,
}

/// Whether `|K|_f` vanishes at `p`. The tolerance applies to the squared
/// contraction, relative to the same sum over absolute values; the zero
/// tensor is in every kernel.
pub fn in_kernel(
    k: &TensorField,
    f: &MetricField,
    chart: &Chart,
    p: &[f64],
    binding: &ParamBinding,
) -> Result<KernelVerdict, NormError> {
    check_nondegenerate(f, chart, p, binding)?;
    let mut fnorm = FiberNorm::new(k, f, chart, binding)?;
    let (s, mass) = fnorm.contraction_with_mass(p).map_err(|e| NormError::eval(p, e))?;
    Ok(KernelVerdict {
        point: p.to_vec(),
        in_kernel: s.abs() <= 1e-12 * mass,
        value: s.abs().sqrt(),
    })
}
