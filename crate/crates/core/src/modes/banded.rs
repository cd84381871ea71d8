//! Cholesky factorisation of a symmetric positive-definite band matrix.

use crate::error::{Error, Result};

/// Lower factor `L` with `A = L Lᵀ`, row `i` holding columns
/// `i - bw ..= i`.
pub(crate) struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// `entry(i, j)` must return `A[i][j]` for `i - bw <= j <= i`.
    pub(crate) fn factor<F>(n: usize, bw: usize, entry: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                // Columns k shared by rows i and j inside both bands.
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Solver {
                            message: format!("matrix is not positive definite at row {i}"),
                            residual: s,
                        });
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[ri + k] * x[k];
            }
            x[i] = s / self.l[ri + i];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[i * w + bw];
            let xi = x[i];
            let ri = i * w + bw - i;
            for k in i.saturating_sub(bw)..i {
                x[k] -= self.l[ri + k] * xi;
            }
        }
    }
}
