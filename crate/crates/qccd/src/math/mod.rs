//! Small dense complex linear algebra.
//!
//! Everything in this crate is at most 4x4 (synthesis) or 2^n x 2^n with
//! n <= 6 (simulation), so the routines here favour clarity and exactness
//! over asymptotics: cyclic-Jacobi eigensolver, modified Gram-Schmidt QR,
//! cofactor-free determinants via elimination.

mod eig;
mod optim;
mod qr;

pub use eig::eigh;
pub use optim::{nelder_mead, NelderMeadResult};
pub use qr::qr_unitary;

use ndarray::{array, Array2};
use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Dense complex matrix used by synthesis and validation code.
pub type CMat = Array2<C64>;

/// `i` as a `C64`.
pub const IM: C64 = C64::new(0.0, 1.0);
/// `1` as a `C64`.
pub const ONE: C64 = C64::new(1.0, 0.0);
/// `0` as a `C64`.
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Real number promoted to `C64`.
#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `exp(i * theta)`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// n x n identity.
pub fn eye(n: usize) -> CMat {
    Array2::eye(n).mapv(|x: f64| c(x))
}

/// Pauli X.
pub fn pauli_x() -> CMat {
    array![[ZERO, ONE], [ONE, ZERO]]
}

/// Pauli Y.
pub fn pauli_y() -> CMat {
    array![[ZERO, -IM], [IM, ZERO]]
}

/// Pauli Z.
pub fn pauli_z() -> CMat {
    array![[ONE, ZERO], [ZERO, -ONE]]
}

/// Rotation about X: `exp(-i theta X / 2)`.
pub fn rx(theta: f64) -> CMat {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    array![[c(ch), -IM * sh], [-IM * sh, c(ch)]]
}

/// Rotation about Y: `exp(-i theta Y / 2)`.
pub fn ry(theta: f64) -> CMat {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    array![[c(ch), c(-sh)], [c(sh), c(ch)]]
}

/// Rotation about Z: `exp(-i theta Z / 2)`.
pub fn rz(theta: f64) -> CMat {
    array![[cis(-theta / 2.0), ZERO], [ZERO, cis(theta / 2.0)]]
}

/// Rotation by `theta` about the equatorial axis at angle `phi` from X:
/// `exp(-i theta/2 (X cos phi + Y sin phi)) = Rz(phi) Rx(theta) Rz(-phi)`.
pub fn rxy(theta: f64, phi: f64) -> CMat {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    array![
        [c(ch), -IM * sh * cis(-phi)],
        [-IM * sh * cis(phi), c(ch)]
    ]
}

/// The native entangler `exp(-i pi/4 Z (x) Z)` (diagonal).
pub fn u_zz() -> CMat {
    let p = cis(-std::f64::consts::FRAC_PI_4);
    let m = cis(std::f64::consts::FRAC_PI_4);
    let z = ZERO;
    array![
        [p, z, z, z],
        [z, m, z, z],
        [z, z, m, z],
        [z, z, z, p]
    ]
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|x| x.conj())
}

/// Kronecker product (row-major, first factor is the high-order subsystem).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::from_elem((ar * br, ac * bc), ZERO);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace.
pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// `true` iff `a` is unitary to within `tol` in Frobenius norm of
/// `a a^dagger - I`.
pub fn is_unitary(a: &CMat, tol: f64) -> bool {
    let (r, cdim) = a.dim();
    if r != cdim {
        return false;
    }
    let delta = a.dot(&dagger(a)) - eye(r);
    fro_norm(&delta) <= tol
}

/// Global-phase-invariant distance: the Frobenius norm `||U - e^{i phi} V||`
/// minimized over the global phase `phi` (the minimizer is
/// `phi = arg tr(V^dagger U)`).
///
/// Computed as an explicit matrix difference rather than via
/// `sqrt(2n - 2|tr|)`, which loses half the significant digits to
/// cancellation when the inputs are close.
pub fn phase_dist(u: &CMat, v: &CMat) -> f64 {
    let t = trace(&dagger(v).dot(u));
    // If the overlap vanishes (orthogonal frames), any phase is optimal.
    let phase = if t.norm() > 0.0 { t / t.norm() } else { ONE };
    let delta = u - &v.mapv(|x| x * phase);
    fro_norm(&delta)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &CMat) -> C64 {
    let n = a.dim().0;
    assert_eq!(a.dim().1, n, "det requires a square matrix");
    let mut m = a.clone();
    let mut d = ONE;
    for col in 0..n {
        let (mut piv, mut best) = (col, m[(col, col)].norm());
        for row in col + 1..n {
            if m[(row, col)].norm() > best {
                best = m[(row, col)].norm();
                piv = row;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            d = -d;
        }
        let pivot = m[(col, col)];
        d *= pivot;
        for row in col + 1..n {
            let f = m[(row, col)] / pivot;
            for j in col..n {
                let sub = f * m[(col, j)];
                m[(row, j)] -= sub;
            }
        }
    }
    d
}

/// Maximum absolute difference between entries of two equally-shaped
/// matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Wrap an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Embed a single-qubit unitary acting on qubit `q` into the full
/// `n`-qubit space.
///
/// Qubit 0 is the least-significant bit of the basis index throughout
/// the crate, so `embed_1q(u, 0, 2) == kron(I, u)`.
pub fn embed_1q(u: &CMat, q: usize, n: usize) -> CMat {
    assert!(q < n, "qubit {q} out of range for n={n}");
    assert_eq!(u.dim(), (2, 2));
    let dim = 1usize << n;
    let mut out = CMat::zeros((dim, dim));
    for col in 0..dim {
        let b = (col >> q) & 1;
        let base = col & !(1 << q);
        for rbit in 0..2 {
            out[(base | (rbit << q), col)] = u[(rbit, b)];
        }
    }
    out
}

/// Embed a two-qubit unitary into the full `n`-qubit space.
///
/// `q_low` is wired to the low-order bit of the 4x4 matrix index and
/// `q_high` to the high-order bit, so `embed_2q(u, 0, 1, 2) == u` and
/// `embed_2q(u, 1, 0, 2)` is `u` conjugated by SWAP.
pub fn embed_2q(u: &CMat, q_low: usize, q_high: usize, n: usize) -> CMat {
    assert!(q_low < n && q_high < n && q_low != q_high);
    assert_eq!(u.dim(), (4, 4));
    let dim = 1usize << n;
    let mut out = CMat::zeros((dim, dim));
    for col in 0..dim {
        let c_sub = ((col >> q_low) & 1) | (((col >> q_high) & 1) << 1);
        let base = col & !(1 << q_low) & !(1 << q_high);
        for r_sub in 0..4 {
            let row = base | ((r_sub & 1) << q_low) | (((r_sub >> 1) & 1) << q_high);
            out[(row, col)] = u[(r_sub, c_sub)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn rotations_are_unitary() {
        for theta in [0.0, 0.3, FRAC_PI_2, PI, 2.5] {
            assert!(is_unitary(&rx(theta), 1e-12));
            assert!(is_unitary(&ry(theta), 1e-12));
            assert!(is_unitary(&rz(theta), 1e-12));
            assert!(is_unitary(&rxy(theta, 0.7), 1e-12));
        }
    }

    #[test]
    fn rxy_matches_sandwich_form() {
        for &(theta, phi) in &[(0.4, 1.1), (FRAC_PI_2, -2.0), (PI, 0.3)] {
            let direct = rxy(theta, phi);
            let sandwich = rz(phi).dot(&rx(theta)).dot(&rz(-phi));
            assert!(max_abs_diff(&direct, &sandwich) < 1e-12);
        }
    }

    #[test]
    fn u_zz_matches_exponential_of_zz() {
        // exp(-i pi/4 Z(x)Z) is diagonal with phases -pi/4, +pi/4, +pi/4, -pi/4.
        let zz = kron(&pauli_z(), &pauli_z());
        let mut expected = eye(4);
        for k in 0..4 {
            let sign = zz[(k, k)].re;
            expected[(k, k)] = cis(-FRAC_PI_2 / 2.0 * sign);
        }
        assert!(max_abs_diff(&u_zz(), &expected) < 1e-12);
    }

    #[test]
    fn kron_pauli_dimensions_and_values() {
        let zz = kron(&pauli_z(), &pauli_z());
        assert_eq!(zz.dim(), (4, 4));
        let d: Vec<f64> = zz.diag().iter().map(|x| x.re).collect();
        assert_eq!(d, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn phase_dist_ignores_global_phase_only() {
        let u = rxy(0.9, 0.2);
        let v = u.mapv(|x| x * cis(1.2345));
        assert!(phase_dist(&u, &v) < 1e-12);
        let w = rxy(0.9001, 0.2);
        assert!(phase_dist(&u, &w) > 1e-6);
    }

    #[test]
    fn det_of_rotations_is_unit_modulus() {
        let m = rz(0.3).dot(&rx(1.1));
        assert_close(det(&m).norm(), 1.0, 1e-12);
        let big = kron(&rz(0.3), &ry(0.8));
        assert_close(det(&big).norm(), 1.0, 1e-12);
    }

    #[test]
    fn det_singular_matrix_is_zero() {
        let m = array![[ONE, ONE], [ONE, ONE]];
        assert_close(det(&m).norm(), 0.0, 1e-15);
    }

    #[test]
    fn wrap_angle_half_open_interval() {
        assert_close(wrap_angle(PI), PI, 1e-15);
        assert_close(wrap_angle(-PI), PI, 1e-15);
        assert_close(wrap_angle(3.0 * PI), PI, 1e-12);
        assert_close(wrap_angle(2.0 * PI + 0.1), 0.1, 1e-12);
        assert_close(wrap_angle(-0.1), -0.1, 1e-15);
    }

    #[test]
    fn embed_1q_matches_kron() {
        let x = pauli_x();
        assert!(max_abs_diff(&embed_1q(&x, 0, 2), &kron(&eye(2), &x)) < 1e-15);
        assert!(max_abs_diff(&embed_1q(&x, 1, 2), &kron(&x, &eye(2))) < 1e-15);
        let r = rxy(0.7, -1.3);
        let expect = kron(&kron(&eye(2), &r), &eye(2));
        assert!(max_abs_diff(&embed_1q(&r, 1, 3), &expect) < 1e-15);
    }

    #[test]
    fn embed_2q_orientations() {
        // Straight orientation is the identity embedding.
        let u = kron(&rz(0.4), &rxy(0.9, 0.1));
        assert!(max_abs_diff(&embed_2q(&u, 0, 1, 2), &u) < 1e-15);
        // Flipped orientation swaps the tensor factors.
        let flipped = kron(&rxy(0.9, 0.1), &rz(0.4));
        assert!(max_abs_diff(&embed_2q(&u, 1, 0, 2), &flipped) < 1e-15);
        // Non-adjacent embedding agrees with an explicit kron layout:
        // gate low bit on qubit 0, high bit on qubit 2 of three qubits.
        let g = kron(&pauli_x(), &pauli_z());
        let expect = kron(&pauli_x(), &kron(&eye(2), &pauli_z()));
        assert!(max_abs_diff(&embed_2q(&g, 0, 2, 3), &expect) < 1e-15);
    }
}
