//! Real-symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Matrices here are tiny (4x4 in the two-qubit decomposition), where
//! Jacobi is simple, numerically excellent, and produces an orthogonal
//! eigenbasis to machine precision.

use ndarray::Array2;

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns `(w, v)` with eigenvalues `w` in ascending order and
/// orthonormal eigenvectors in the columns of `v`, so that
/// `a = v diag(w) v^T`.
///
/// Panics if `a` is not square; symmetry is the caller's responsibility
/// (only the upper triangle drives the rotations, and the matrix is
/// symmetrized on entry).
pub fn eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.dim().0;
    assert_eq!(a.dim().1, n, "eigh requires a square matrix");
    // Work on the symmetrized copy so tiny asymmetries cannot stall the sweep.
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut v = Array2::eye(n);
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-15 * scale;

    for _sweep in 0..64 {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
            s.sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                // Rotate rows/columns p and q of m.
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = cos * mkp - sin * mkq;
                    m[(k, q)] = sin * mkp + cos * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = cos * mpk - sin * mqk;
                    m[(q, k)] = sin * mpk + cos * mqk;
                }
                // Accumulate the eigenvector rotation.
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cos * vkp - sin * vkq;
                    v[(k, q)] = sin * vkp + cos * vkq;
                }
            }
        }
    }

    // Sort ascending by eigenvalue, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let w: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vs = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vs[(row, new_col)] = v[(row, old_col)];
        }
    }
    (w, vs)
}
