//! Dense least-squares helpers built on orthogonal factorizations.

use nalgebra::{DMatrix, DVector};

/// Diagonal ratio of R below which a QR solve is abandoned for an SVD.
const QR_RANK_RTOL: f64 = 1e-10;
/// Singular values below `SVD_RTOL * s_max` are treated as zero.
const SVD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    /// True when the matrix was numerically rank deficient and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Solves `min ||A x - b||_2`.
///
/// Full-rank problems go through Householder QR of the column-equilibrated
/// matrix; rank-deficient ones fall back to the SVD minimum-norm solution.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> LstsqSolution {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return LstsqSolution {
            x: DVector::zeros(0),
            rank_deficient: false,
        };
    }
    if rows >= cols {
        let scales: Vec<f64> = a
            .column_iter()
            .map(|c| {
                let n = c.norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = a.clone();
        for (j, s) in scales.iter().enumerate() {
            scaled.column_mut(j).unscale_mut(*s);
        }
        let qr = scaled.qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].abs()).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if dmax > 0.0 && dmin > QR_RANK_RTOL * dmax {
            let qtb = qr.q().tr_mul(b);
            if let Some(mut y) = r.solve_upper_triangular(&qtb) {
                for (j, s) in scales.iter().enumerate() {
                    y[j] /= s;
                }
                if y.iter().all(|v| v.is_finite()) {
                    return LstsqSolution {
                        x: y,
                        rank_deficient: false,
                    };
                }
            }
        }
    }
    min_norm_svd(a, b)
}

fn min_norm_svd(a: &DMatrix<f64>, b: &DVector<f64>) -> LstsqSolution {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = SVD_RTOL * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let x = svd
        .solve(b, tol)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    LstsqSolution {
        x,
        rank_deficient: rank < a.ncols().min(a.nrows()) || a.nrows() < a.ncols(),
    }
}

/// Orthonormal basis for the column space of `a` (rank-revealing, via SVD).
pub fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > SVD_RTOL * smax)
        .map(|(i, _)| i)
        .collect();
    u.select_columns(&keep)
}

/// Copies the given columns of `a` into a new matrix.
pub fn columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    a.select_columns(cols)
}
