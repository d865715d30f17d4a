//! Small dense row-major matrix helpers for n <= 6.

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Iterates until the off-diagonal mass falls below `tol` times the
/// Frobenius norm.
pub fn symmetric_eigenvalues(a: &[f64], n: usize, tol: f64) -> Vec<f64> {
    symmetric_eigen(a, n, tol).0
}

/// Eigenvalues (ascending) and column eigenvectors (row-major `n x n`).
pub fn symmetric_eigen(a: &[f64], n: usize, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = identity(n);
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vecs[row * n + col] = v[row * n + src];
        }
    }
    (values, vecs)
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Lower-triangular `L` with `a = L Lᵀ`, or `None` if a pivot drops below
/// `tol` times the largest diagonal entry.
pub fn cholesky(a: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let diag_scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol * diag_scale) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_triangular_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * n + k] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    inv
}

/// Determinant and inverse by Gauss-Jordan elimination with partial
/// pivoting. The inverse is `None` when the matrix is exactly singular.
pub fn det_and_inverse(a: &[f64], n: usize) -> (f64, Option<Vec<f64>>) {
    let mut m = a.to_vec();
    let mut inv = identity(n);
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return (0.0, None);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[r * n + k] -= f * m[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    (det, Some(inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -3.0];
        let ev = symmetric_eigenvalues(&a, 3, 1e-14);
        let want = [-3.0, 1.0, 3.0];
        for (g, w) in ev.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn jacobi_eigenvectors_reconstruct() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let (vals, vecs) = symmetric_eigen(&a, 3, 1e-15);
        let mut d = vec![0.0; 9];
        for i in 0..3 {
            d[i * 3 + i] = vals[i];
        }
        let rec = matmul(&matmul(&vecs, &d, 3), &transpose(&vecs, 3), 3);
        for (x, y) in rec.iter().zip(&a) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_and_triangular_inverse() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2, 1e-12).unwrap();
        let llt = matmul(&l, &transpose(&l, 2), 2);
        for (x, y) in llt.iter().zip(&a) {
            assert!((x - y).abs() < 1e-14);
        }
        let li = lower_triangular_inverse(&l, 2);
        let id = matmul(&l, &li, 2);
        assert!((id[0] - 1.0).abs() < 1e-15 && id[1].abs() < 1e-15 && (id[3] - 1.0).abs() < 1e-15);
        assert!(cholesky(&[1.0, 0.0, 0.0, -1.0], 2, 1e-12).is_none());
    }

    #[test]
    fn determinant_and_inverse() {
        let a = [0.0, 2.0, 1.0, 1.0];
        let (det, inv) = det_and_inverse(&a, 2);
        assert!((det + 2.0).abs() < 1e-15);
        let inv = inv.unwrap();
        let id = matmul(&a, &inv, 2);
        assert!((id[0] - 1.0).abs() < 1e-15 && id[1].abs() < 1e-15);
        assert_eq!(det_and_inverse(&[1.0, 2.0, 2.0, 4.0], 2).0, 0.0);
    }
}
