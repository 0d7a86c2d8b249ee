//! Complex QR factorization via modified Gram-Schmidt.

use super::{CMat, ZERO};
use ndarray::Array2;

/// QR-factorize `a` and return `(q, r_diag)` where `q` has orthonormal
/// columns and `r_diag` holds the diagonal of `R`.
///
/// Used for Haar-random unitary sampling: drawing `a` with iid complex
/// Gaussian entries and forming `q * diag(r_kk / |r_kk|)` yields a
/// Haar-distributed unitary (the phase correction removes the sign
/// ambiguity of Gram-Schmidt).
pub fn qr_unitary(a: &CMat) -> (CMat, Vec<super::C64>) {
    let (n, m) = a.dim();
    assert_eq!(n, m, "qr_unitary expects a square matrix");
    let mut q = Array2::from_elem((n, n), ZERO);
    let mut r_diag = Vec::with_capacity(n);
    let mut work = a.clone();
    for j in 0..n {
        // Orthogonalize column j against all previous q columns (MGS).
        for i in 0..j {
            let mut proj = ZERO;
            for k in 0..n {
                proj += q[(k, i)].conj() * work[(k, j)];
            }
            for k in 0..n {
                let sub = proj * q[(k, i)];
                work[(k, j)] -= sub;
            }
        }
        let norm: f64 = (0..n).map(|k| work[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        assert!(
            norm > 1e-300,
            "qr_unitary: rank-deficient input (probability-zero for Gaussian draws)"
        );
        for k in 0..n {
            q[(k, j)] = work[(k, j)] / norm;
        }
        r_diag.push(super::c(norm));
    }
    (q, r_diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{dagger, eye, fro_norm, C64};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 6] {
            for _ in 0..25 {
                let a = Array2::from_shape_fn((n, n), |_| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let (q, _) = qr_unitary(&a);
                let delta = dagger(&q).dot(&q) - eye(n);
                assert!(fro_norm(&delta) < 1e-12);
            }
        }
    }
}
