use crate::linalg;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuclearBounds {
    pub frobenius: f64,
    pub nuclear: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

impl NuclearBounds {
    /// Slack in `‖A‖_F ≤ ‖A‖_* ≤ √rank ‖A‖_F`; both are nonnegative when the
    /// sandwich holds.
    pub fn slack(&self) -> (f64, f64) {
        (
            self.nuclear - self.frobenius,
            (self.rank as f64).sqrt() * self.frobenius - self.nuclear,
        )
    }
}

/// Singular values of a row-major `rows x cols` matrix from the
/// eigenvalues of `AᵀA`, with the Frobenius and nuclear norms and the
/// numerical rank.
pub fn nuclear_frobenius_bounds(a: &[f64], rows: usize, cols: usize) -> NuclearBounds {
    assert_eq!(a.len(), rows * cols, "matrix has the wrong number of entries");
    let mut ata = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            ata[i * cols + j] = (0..rows).map(|k| a[k * cols + i] * a[k * cols + j]).sum();
        }
    }
    let eig = linalg::symmetric_eigenvalues(&ata, cols, 1e-15);
    let mut sv: Vec<f64> = eig.iter().rev().map(|l| l.max(0.0).sqrt()).collect();
    sv.truncate(rows.min(cols));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    NuclearBounds {
        frobenius: linalg::frobenius(a),
        nuclear: sv.iter().sum(),
        rank,
        singular_values: sv,
    }
}
