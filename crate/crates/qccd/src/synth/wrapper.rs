//! Calibration of single-qubit wrapper pulses that turn the
//! phase-sensitive two-qubit drive into the fixed `ZZ` entangler.
//!
//! The physical two-qubit interaction is a Molmer-Sorensen gate whose
//! rotation axis rides on the optical phase `phi` at the ions:
//! `U_MS(phi) = exp(-i pi/4 A(phi) (x) A(phi))` with
//! `A(phi) = sin(phi) X + cos(phi) Y`. The compiler wants the
//! phase-insensitive `ZZ = exp(-i pi/4 Z (x) Z)` instead, so each MS
//! application is wrapped in symmetric single-qubit pulses driven by the
//! same beam (their axes track `phi` too):
//!
//! ```text
//! W2(phi) . U_MS(phi) . W1(phi),   Wk = wk (x) wk,
//! wk = RXY(theta_k, phi + delta_k)
//! ```
//!
//! With `theta = pi/2`, `delta1 = pi`, `delta2 = 0` the wrappers
//! conjugate the MS axis onto Z *exactly* whenever `phi` is a multiple
//! of `pi/2`: the axis `A(phi)` is then perpendicular to the wrapper
//! axis and a quarter turn lifts it out of the equator. In between, the
//! component of `A(phi)` parallel to the wrapper axis (proportional to
//! `sin 2 phi`) survives the conjugation, and no fixed parameter set
//! cancels it for every `phi` at once — matching `ZZ` at two generic
//! phases forces contradictory wrapper actions. [`search_zz_wrapper`]
//! therefore reports its best residual honestly rather than erroring:
//! the returned parameters are exact at `phi = 0`, and a drift in `phi`
//! shows up as a documented worst-case error, not a silent
//! miscalibration.

use crate::math::{c, eye, kron, phase_dist, rxy, u_zz, CMat, C64, IM};
use crate::math::nelder_mead;
use crate::rng::rng_for;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

/// Wrapper-pulse parameters: `w1 = RXY(pre_angle, phi + pre_axis_offset)`
/// before the MS drive, `w2 = RXY(post_angle, phi + post_axis_offset)`
/// after it, each applied to both qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZzWrapperParams {
    pub pre_angle: f64,
    pub pre_axis_offset: f64,
    pub post_angle: f64,
    pub post_axis_offset: f64,
}

/// Outcome of the wrapper search.
#[derive(Debug, Clone)]
pub struct ZzWrapperReport {
    /// Parameters the caller should use (exact at `phi = 0`).
    pub params: ZzWrapperParams,
    /// Worst distance to `ZZ` for `params` over the 64-point phase grid.
    pub worst_case: f64,
    /// Distance to `ZZ` for `params` at `phi = 0`.
    pub phi_zero_distance: f64,
    /// Whether the search met the uniform 1e-9 target over all phases.
    pub converged: bool,
    /// Best worst-case residual any parameter set achieved during the
    /// search (meaningful when `converged` is false).
    pub search_best_residual: f64,
}

/// Molmer-Sorensen unitary at optical phase `phi`.
///
/// The axis operator squares to the identity, so the exponential
/// truncates: `U_MS = (I - i A(x)A) / sqrt(2)`.
pub fn ms_unitary(phi: f64) -> CMat {
    let a = CMat::from_shape_vec(
        (2, 2),
        vec![
            c(0.0),
            C64::new(phi.sin(), -phi.cos()),
            C64::new(phi.sin(), phi.cos()),
            c(0.0),
        ],
    )
    .expect("2x2 shape");
    let aa = kron(&a, &a);
    let mut u = eye(4);
    u.zip_mut_with(&aa, |x, &y| *x = (*x - IM * y) * c(FRAC_1_SQRT_2));
    u
}

/// The wrapped entangler `W2 . U_MS(phi) . W1` for the given parameters.
pub fn wrapper_composite(phi: f64, p: &ZzWrapperParams) -> CMat {
    let w1 = rxy(p.pre_angle, phi + p.pre_axis_offset);
    let w2 = rxy(p.post_angle, phi + p.post_axis_offset);
    kron(&w2, &w2).dot(&ms_unitary(phi)).dot(&kron(&w1, &w1))
}

/// The closed-form parameter set that is exact at `phi = 0` (and at
/// every multiple of `pi/2`): quarter-turn wrappers with opposed axes.
pub fn zz_wrapper_phi_zero() -> ZzWrapperParams {
    ZzWrapperParams {
        pre_angle: PI / 2.0,
        pre_axis_offset: PI,
        post_angle: PI / 2.0,
        post_axis_offset: 0.0,
    }
}

fn params_from(x: &[f64]) -> ZzWrapperParams {
    ZzWrapperParams {
        pre_angle: x[0],
        pre_axis_offset: x[1],
        post_angle: x[2],
        post_axis_offset: x[3],
    }
}

fn wrap_params(p: ZzWrapperParams) -> ZzWrapperParams {
    ZzWrapperParams {
        pre_angle: p.pre_angle.rem_euclid(TAU),
        pre_axis_offset: p.pre_axis_offset.rem_euclid(TAU),
        post_angle: p.post_angle.rem_euclid(TAU),
        post_axis_offset: p.post_axis_offset.rem_euclid(TAU),
    }
}

/// Worst distance to `ZZ` over an `n`-point uniform grid of phases.
fn worst_over_grid(p: &ZzWrapperParams, n: usize) -> f64 {
    let target = u_zz();
    let mut worst = 0.0f64;
    for k in 0..n {
        let phi = TAU * k as f64 / n as f64;
        worst = worst.max(phase_dist(&wrapper_composite(phi, p), &target));
    }
    worst
}

/// Search for wrapper parameters that match `ZZ` uniformly in the
/// optical phase.
///
/// Multistart Nelder-Mead over `(theta1, delta1, theta2, delta2)` in
/// `[0, 2 pi)^4`: the closed-form point plus 200 seeded random starts
/// are scored on a coarse 16-point phase grid, the best few are refined,
/// and the winner is re-scored on the 64-point verification grid. A
/// uniform solution does not exist (see the module docs), so the
/// expected outcome is `converged = false` with the closed-form
/// parameters returned and the search's best residual recorded.
pub fn search_zz_wrapper(seed: u64) -> ZzWrapperReport {
    const COARSE_GRID: usize = 16;
    const VERIFY_GRID: usize = 64;
    const RANDOM_STARTS: usize = 200;
    const REFINE_TOP: usize = 5;
    const TARGET: f64 = 1e-9;

    let objective = |x: &[f64]| worst_over_grid(&params_from(x), COARSE_GRID);

    let closed = zz_wrapper_phi_zero();
    let mut starts: Vec<[f64; 4]> = vec![[
        closed.pre_angle,
        closed.pre_axis_offset,
        closed.post_angle,
        closed.post_axis_offset,
    ]];
    let mut rng = rng_for(seed, "zz-wrapper-search", 0);
    for _ in 0..RANDOM_STARTS {
        starts.push([
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
        ]);
    }

    let mut scored: Vec<(f64, [f64; 4])> =
        starts.into_iter().map(|x| (objective(&x), x)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite residuals"));

    let mut best_x = scored[0].1;
    let mut best_val = f64::INFINITY;
    for (_, x0) in scored.iter().take(REFINE_TOP) {
        let res = nelder_mead(objective, x0, 0.3, 400, 1e-12);
        if res.value < best_val {
            best_val = res.value;
            best_x = [res.x[0], res.x[1], res.x[2], res.x[3]];
        }
    }

    let best_params = wrap_params(params_from(&best_x));
    let search_best_residual = worst_over_grid(&best_params, VERIFY_GRID);

    if search_best_residual < TARGET {
        return ZzWrapperReport {
            params: best_params,
            worst_case: search_best_residual,
            phi_zero_distance: phase_dist(&wrapper_composite(0.0, &best_params), &u_zz()),
            converged: true,
            search_best_residual,
        };
    }
    ZzWrapperReport {
        params: closed,
        worst_case: worst_over_grid(&closed, VERIFY_GRID),
        phi_zero_distance: phase_dist(&wrapper_composite(0.0, &closed), &u_zz()),
        converged: false,
        search_best_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{is_unitary, max_abs_diff, pauli_y, rz};

    #[test]
    fn ms_unitary_is_unitary_for_all_phases() {
        for k in 0..16 {
            let phi = TAU * k as f64 / 16.0;
            assert!(is_unitary(&ms_unitary(phi), 1e-12), "phi = {phi}");
        }
    }

    #[test]
    fn ms_axis_at_zero_phase_is_yy() {
        let yy = kron(&pauli_y(), &pauli_y());
        let mut expect = eye(4);
        expect.zip_mut_with(&yy, |x, &y| *x = (*x - IM * y) * c(FRAC_1_SQRT_2));
        assert!(max_abs_diff(&ms_unitary(0.0), &expect) < 1e-15);
    }

    #[test]
    fn ms_phase_shift_is_a_frame_rotation() {
        // Advancing the optical phase rotates the axis about Z:
        // U_MS(phi) = (Rz(-phi) (x) Rz(-phi)) U_MS(0) (Rz(phi) (x) Rz(phi)).
        for k in 1..8 {
            let phi = TAU * k as f64 / 8.0;
            let frame = kron(&rz(-phi), &rz(-phi));
            let unframe = kron(&rz(phi), &rz(phi));
            let rotated = frame.dot(&ms_unitary(0.0)).dot(&unframe);
            assert!(max_abs_diff(&ms_unitary(phi), &rotated) < 1e-12, "phi = {phi}");
        }
    }

    #[test]
    fn ms_is_locally_equivalent_to_zz() {
        for k in 0..8 {
            let phi = TAU * k as f64 / 8.0;
            let w = super::super::kak::weyl_decompose(&ms_unitary(phi)).unwrap();
            assert!((w.a - PI / 4.0).abs() < 1e-10, "phi = {phi}: a = {}", w.a);
            assert!(w.b.abs() < 1e-10 && w.c.abs() < 1e-10, "phi = {phi}");
        }
    }

    #[test]
    fn closed_form_is_exact_at_quarter_turn_phases() {
        let p = zz_wrapper_phi_zero();
        for phi in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
            let d = phase_dist(&wrapper_composite(phi, &p), &u_zz());
            assert!(d < 1e-9, "phi = {phi}: distance {d}");
        }
    }

    #[test]
    fn closed_form_degrades_between_calibration_phases() {
        let p = zz_wrapper_phi_zero();
        let d = phase_dist(&wrapper_composite(PI / 4.0, &p), &u_zz());
        assert!(d > 1e-3, "phi = pi/4 should be the worst point, got {d}");
        assert!(worst_over_grid(&p, 64) > 1e-3);
    }

    #[test]
    fn perturbed_pre_axis_breaks_the_zero_phase_match() {
        let mut p = zz_wrapper_phi_zero();
        p.pre_axis_offset += 0.1;
        let d = phase_dist(&wrapper_composite(0.0, &p), &u_zz());
        assert!(d > 1e-3, "0.1 rad axis error must be visible, got {d}");
    }

    #[test]
    fn search_reports_honest_non_convergence() {
        let report = search_zz_wrapper(7);
        assert!(!report.converged, "no uniform-in-phase solution exists");
        assert!(
            report.search_best_residual > 1e-3,
            "search best residual {} should reflect the obstruction",
            report.search_best_residual
        );
        assert!(report.worst_case > 1e-3);
        assert!(report.phi_zero_distance < 1e-9);
        // Fallback must be the closed form.
        let c0 = zz_wrapper_phi_zero();
        assert_eq!(report.params, c0);
    }
}
