use super::{Chart, MetricField, TensorField};
use crate::expr::ScalarExpr;

/// Christoffel symbols `Γ^a_bc` of a torsion-free connection, stored at
/// `a*n*n + b*n + c` and symmetric in `b, c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    dim: usize,
    gamma: Vec<ScalarExpr>,
}

impl Connection {
    /// The flat connection of the chart's coordinates.
    pub fn flat(dim: usize) -> Self {
        Connection {
            dim,
            gamma: vec![ScalarExpr::zero(); dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbol(&self, a: usize, b: usize, c: usize) -> &ScalarExpr {
        &self.gamma[(a * self.dim + b) * self.dim + c]
    }

    pub fn symbols(&self) -> &[ScalarExpr] {
        &self.gamma
    }

    pub fn is_flat(&self) -> bool {
        self.gamma.iter().all(ScalarExpr::is_zero)
    }
}

/// Levi-Civita connection `Γ^a_bc = ½ m^ad (∂_b m_dc + ∂_c m_bd − ∂_d m_bc)`.
pub fn christoffel(m: &MetricField, chart: &Chart) -> Connection {
    let n = m.dim();
    let cov = m.covariant();
    let contra = m.contravariant();
    // dm[(d*n + b)*n + c] = ∂_c m_db
    let mut dm = Vec::with_capacity(n * n * n);
    for d in 0..n {
        for b in 0..n {
            let comp = cov.component(&[d, b]);
            for c in 0..n {
                dm.push(comp.differentiate(&chart.coords()[c]));
            }
        }
    }
    let at = |d: usize, b: usize, c: usize| &dm[(d * n + b) * n + c];
    let mut gamma = vec![ScalarExpr::zero(); n * n * n];
    // first kind: lowered[(d*n + b)*n + c] = ½(∂_b m_dc + ∂_c m_bd − ∂_d m_bc)
    let mut lowered = vec![ScalarExpr::zero(); n * n * n];
    for d in 0..n {
        for b in 0..n {
            for c in b..n {
                let v = (at(d, c, b) + at(b, d, c) - at(b, c, d)) * 0.5;
                lowered[(d * n + b) * n + c] = v.clone();
                lowered[(d * n + c) * n + b] = v;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let v = ScalarExpr::sum((0..n).map(|d| contra.component(&[a, d]) * &lowered[(d * n + b) * n + c]));
                gamma[(a * n + b) * n + c] = v.clone();
                gamma[(a * n + c) * n + b] = v;
            }
        }
    }
    Connection { dim: n, gamma }
}

/// `∇K`: a rank-(r,s) field becomes rank (r,s+1), the new covariant index
/// appended last.
pub fn covariant_derivative(k: &TensorField, conn: &Connection, chart: &Chart) -> TensorField {
    let n = k.dim();
    let (r, s) = k.rank();
    let slots = r + s;
    let partials: Vec<Vec<ScalarExpr>> = k
        .comps()
        .iter()
        .map(|comp| chart.coords().iter().map(|x| comp.differentiate(x)).collect())
        .collect();
    let flat_conn = conn.is_flat();
    TensorField::from_fn(n, r, s + 1, |ix| {
        let c = ix[slots];
        let base = &ix[..slots];
        let mut terms = vec![partials[k.flat_index(base)][c].clone()];
        if !flat_conn {
            let mut jx = base.to_vec();
            for slot in 0..slots {
                let orig = jx[slot];
                for d in 0..n {
                    jx[slot] = d;
                    let comp = k.component(&jx);
                    if comp.is_zero() {
                        continue;
                    }
                    if slot < r {
                        terms.push(conn.symbol(orig, c, d) * comp);
                    } else {
                        terms.push(-(conn.symbol(d, c, orig) * comp));
                    }
                }
                jx[slot] = orig;
            }
        }
        ScalarExpr::sum(terms)
    })
}

/// `∇^(order) K`, each application appending one covariant index.
pub fn covariant_derivative_n(k: &TensorField, conn: &Connection, chart: &Chart, order: usize) -> TensorField {
    let mut out = k.clone();
    for _ in 0..order {
        out = covariant_derivative(&out, conn, chart);
    }
    out
}
