//! Covariance-matrix helpers shared by the two estimators.

use nalgebra::SMatrix;

/// Lower-triangular Cholesky factor of a symmetric positive
/// *semi*-definite matrix.
///
/// Pivots within `pivot_tol` of zero are clamped to zero (their column
/// is skipped), so rank-deficient covariances — in particular the exact
/// zero matrix — factor cleanly. Returns `None` when a pivot is negative
/// beyond the tolerance, i.e. the matrix is indefinite.
pub fn psd_cholesky<const N: usize>(
    a: &SMatrix<f64, N, N>,
    pivot_tol: f64,
) -> Option<SMatrix<f64, N, N>> {
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > pivot_tol {
            let root = d.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..N {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / root;
            }
        } else if d >= -pivot_tol {
            // Semi-definite direction: no spread along this column.
        } else {
            return None;
        }
    }
    Some(l)
}

/// Replace `m` with `(m + m^T) / 2`.
pub fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    for i in 0..N {
        for j in (i + 1)..N {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix, computed by
/// cyclic Jacobi rotations (plenty for the small fixed sizes used here).
pub fn symmetric_eigen_bounds<const N: usize>(m: &SMatrix<f64, N, N>) -> (f64, f64) {
    let mut a = *m;
    for _ in 0..30 {
        let mut off = 0.0;
        for i in 0..N {
            for j in (i + 1)..N {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + a.abs().max()) {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Jacobi rotation zeroing a[(p, q)].
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..N {
        lo = lo.min(a[(i, i)]);
        hi = hi.max(a[(i, i)]);
    }
    (lo, hi)
}
