//! Unitary-to-native-gate synthesis.
//!
//! The machine's native set is small: software `RZ` (a phase-frame update
//! with a resolution limit of pi/500), equatorial rotations
//! `RXY(theta, phi)` with `theta` in {pi/2, pi}, and one fixed entangler
//! `ZZ = exp(-i pi/4 Z(x)Z)`. This module lowers arbitrary one- and
//! two-qubit unitaries onto that set:
//!
//! * [`synth_su2`] writes any 2x2 unitary as at most two pi/2 pulses plus
//!   one trailing `RZ` (closed form, no iteration).
//! * [`synth_su4`] writes any 4x4 unitary as exactly three `ZZ` gates
//!   interleaved with single-qubit native gates (Cartan decomposition in
//!   the magic basis; see [`kak`]).
//! * [`quantize_z`] snaps a Z angle to the pi/500 grid.
//! * [`commute_z_forward`] pushes `RZ` ops through later `RXY`/`ZZ` ops so
//!   they can be realized as frame updates instead of pulses.
//! * [`search_zz_wrapper`] searches for single-qubit wrapper pulses that
//!   make the phase-sensitive Molmer-Sorensen interaction act as the
//!   phase-insensitive `ZZ` (see [`wrapper`] for what the search family
//!   can and cannot achieve).
//!
//! Synthesis works in exact angles; quantization is a separate, explicit
//! step ([`NativeSequence::quantized`]) so that verification oracles can
//! check the closed forms at full precision.

mod haar;
mod kak;
mod wrapper;

pub use haar::{haar_su4, haar_unitary};
pub use kak::synth_su4;
pub use wrapper::{
    ms_unitary, search_zz_wrapper, wrapper_composite, zz_wrapper_phi_zero, ZzWrapperParams,
    ZzWrapperReport,
};

use crate::circuit::{Circuit, Gate};
use crate::math::{
    embed_1q, embed_2q, eye, is_unitary, rxy, rz, u_zz, wrap_angle, CMat,
};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

/// Angle below which a rotation is treated as absent when deciding how
/// many pulses to emit. Well under the 1e-9 verification tolerance.
const DEGENERATE_TOL: f64 = 1e-12;

/// Unitarity tolerance required of synthesis inputs.
const INPUT_TOL: f64 = 1e-10;

/// Z-angle grid spacing: the machine realizes `RZ` only in steps of
/// pi/500.
pub const Z_STEP: f64 = PI / 500.0;

/// An ordered list of native gates realizing some target unitary.
///
/// Ops act on local qubit indices (0, and 1 for two-qubit sequences);
/// [`NativeSequence::ops_on`] remaps them onto circuit qubits. Angles are
/// exact; [`NativeSequence::quantized`] snaps `RZ` angles to the pi/500
/// grid (`RXY` phases are never quantized — they come from software phase
/// tracking at full precision).
#[derive(Debug, Clone)]
pub struct NativeSequence {
    /// Native ops in time order (first op acts first).
    pub ops: Vec<Gate>,
    /// The unitary this sequence claims to implement, when known.
    pub target_unitary: Option<CMat>,
    /// Leftover per-qubit Z frame angles `(qubit, angle)` that
    /// [`commute_z_forward`] dropped from the op list. The realized
    /// unitary is `Rz(frames) * product(ops)`.
    pub residual_frames: Vec<(usize, f64)>,
}

impl NativeSequence {
    /// Sequence with the given ops and verification target.
    pub fn new(ops: Vec<Gate>, target_unitary: Option<CMat>) -> Self {
        NativeSequence {
            ops,
            target_unitary,
            residual_frames: Vec::new(),
        }
    }

    /// Matrix product of the ops on `n` qubits (frames excluded).
    ///
    /// Errors on non-unitary ops (measure/reset/cond); synthesis output
    /// never contains those.
    pub fn unitary(&self, n: usize) -> Result<CMat> {
        let mut u = eye(1 << n);
        for op in &self.ops {
            u = gate_matrix(op, n)?.dot(&u);
        }
        Ok(u)
    }

    /// Matrix product including the residual frames (applied last).
    pub fn unitary_with_frames(&self, n: usize) -> Result<CMat> {
        let mut u = self.unitary(n)?;
        for &(q, zeta) in &self.residual_frames {
            u = embed_1q(&rz(zeta), q, n).dot(&u);
        }
        Ok(u)
    }

    /// Copy with every `RZ` angle snapped to the pi/500 grid.
    pub fn quantized(&self) -> NativeSequence {
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                Gate::Rz { q, theta } => Gate::Rz {
                    q: *q,
                    theta: quantize_z(*theta),
                },
                other => other.clone(),
            })
            .collect();
        NativeSequence {
            ops,
            target_unitary: self.target_unitary.clone(),
            residual_frames: self.residual_frames.clone(),
        }
    }

    /// `true` when every `RZ` angle is an integer multiple of pi/500.
    pub fn is_z_quantized(&self) -> bool {
        self.ops.iter().all(|op| match op {
            Gate::Rz { theta, .. } => {
                let k = theta / Z_STEP;
                (k - k.round()).abs() < 1e-9
            }
            _ => true,
        })
    }

    /// Number of `RXY` ops.
    pub fn rxy_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, Gate::Rxy { .. }))
            .count()
    }

    /// Number of `RZ` ops.
    pub fn rz_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, Gate::Rz { .. }))
            .count()
    }

    /// Number of `ZZ` ops.
    pub fn zz_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, Gate::Zz { .. }))
            .count()
    }

    /// Ops with local qubit 0 mapped to `q0` and local qubit 1 to `q1`.
    pub fn ops_on(&self, q0: usize, q1: usize) -> Vec<Gate> {
        let map = |q: usize| if q == 0 { q0 } else { q1 };
        self.ops
            .iter()
            .map(|op| match op {
                Gate::Rz { q, theta } => Gate::Rz {
                    q: map(*q),
                    theta: *theta,
                },
                Gate::Rxy { q, theta, phi } => Gate::Rxy {
                    q: map(*q),
                    theta: *theta,
                    phi: *phi,
                },
                Gate::Zz { q, q2 } => Gate::Zz {
                    q: map(*q),
                    q2: map(*q2),
                },
                other => other.clone(),
            })
            .collect()
    }
}

/// Matrix of a unitary gate embedded in the `n`-qubit space.
fn gate_matrix(g: &Gate, n: usize) -> Result<CMat> {
    match g {
        Gate::Rz { q, theta } => Ok(embed_1q(&rz(*theta), *q, n)),
        Gate::Rxy { q, theta, phi } => Ok(embed_1q(&rxy(*theta, *phi), *q, n)),
        Gate::Zz { q, q2 } => Ok(embed_2q(&u_zz(), *q, *q2, n)),
        Gate::U2 { q, matrix } => Ok(embed_1q(matrix, *q, n)),
        Gate::U4 { q, q2, matrix } => Ok(embed_2q(matrix, *q, *q2, n)),
        Gate::Measure { .. } | Gate::Reset { .. } | Gate::Cond { .. } => Err(Error::Synth(
            "sequence contains a non-unitary op; no matrix form".into(),
        )),
    }
}

/// Full-circuit unitary for measurement-free circuits (verification
/// helper; exponential in `n_qubits`, intended for small test circuits).
pub fn circuit_unitary(c: &Circuit) -> Result<CMat> {
    if c.n_qubits > 10 {
        return Err(Error::Synth(format!(
            "circuit_unitary supports at most 10 qubits, got {}",
            c.n_qubits
        )));
    }
    let mut u = eye(1 << c.n_qubits);
    for op in &c.ops {
        u = gate_matrix(op, c.n_qubits)?.dot(&u);
    }
    Ok(u)
}

/// Snap a Z angle to the nearest integer multiple of pi/500.
///
/// The angle is first wrapped to `(-pi, pi]`, then rounded; exact
/// half-step ties round toward zero. The result is again in `(-pi, pi]`
/// (an angle that rounds to the -pi end of the grid comes back as +pi).
pub fn quantize_z(theta: f64) -> f64 {
    let w = wrap_angle(theta);
    let t = w / Z_STEP;
    let r = t.round(); // rounds half away from zero
    let k = if (r - t).abs() == 0.5 { t.trunc() } else { r };
    wrap_angle(k * Z_STEP)
}

/// Synthesize a 2x2 unitary as at most two `RXY(pi/2, .)` pulses followed
/// by at most one `RZ`, up to global phase.
///
/// Writing `U ~ Rz(zeta) . RXY(theta, pi/2 - lambda)` with ZYZ Euler
/// angles `(theta, phi, lambda)` and `zeta = phi + lambda`, and splitting
/// the middle rotation into two pi/2 pulses, gives the closed form
///
/// ```text
/// U ~ Rz(phi + lambda - theta) . RXY(pi/2, theta - lambda) . RXY(pi/2, pi - lambda)
/// ```
///
/// (matrix order; the rightmost factor acts first). Degenerate targets
/// emit shorter sequences: a diagonal `U` becomes a single `RZ`, and a
/// pure equatorial pi/2 rotation becomes a single `RXY`.
pub fn synth_su2(u: &CMat) -> Result<NativeSequence> {
    if u.dim() != (2, 2) {
        return Err(Error::Synth(format!(
            "synth_su2 expects a 2x2 matrix, got {:?}",
            u.dim()
        )));
    }
    if !is_unitary(u, INPUT_TOL) {
        return Err(Error::Synth("synth_su2 input is not unitary".into()));
    }
    let (u00, u01) = (u[(0, 0)], u[(0, 1)]);
    let (u10, u11) = (u[(1, 0)], u[(1, 1)]);
    let theta = 2.0 * u10.norm().atan2(u00.norm());

    let mut ops = Vec::with_capacity(3);
    if u10.norm() < DEGENERATE_TOL {
        // Diagonal target: a pure frame rotation.
        let zeta = wrap_angle(u11.arg() - u00.arg());
        if zeta.abs() > DEGENERATE_TOL {
            ops.push(Gate::Rz { q: 0, theta: zeta });
        }
    } else {
        let (phi, lambda) = if u00.norm() < DEGENERATE_TOL {
            // theta = pi: only phi - lambda is determined; split it evenly.
            let d = u10.arg() - u01.arg() + PI;
            (d / 2.0, -d / 2.0)
        } else {
            // Entry-ratio extraction avoids the halving ambiguity of the
            // usual (phi+lambda, phi-lambda) route: each angle is read off
            // a single ratio, so any 2-pi slack only shifts global phase.
            (u10.arg() - u00.arg(), u11.arg() - u10.arg())
        };
        let zeta = wrap_angle(phi + lambda);
        if zeta.abs() < DEGENERATE_TOL && (theta - FRAC_PI_2).abs() < DEGENERATE_TOL {
            ops.push(Gate::Rxy {
                q: 0,
                theta: FRAC_PI_2,
                phi: wrap_angle(FRAC_PI_2 - lambda),
            });
        } else {
            ops.push(Gate::Rxy {
                q: 0,
                theta: FRAC_PI_2,
                phi: wrap_angle(PI - lambda),
            });
            ops.push(Gate::Rxy {
                q: 0,
                theta: FRAC_PI_2,
                phi: wrap_angle(theta - lambda),
            });
            let trailing = wrap_angle(phi + lambda - theta);
            if trailing.abs() > DEGENERATE_TOL {
                ops.push(Gate::Rz {
                    q: 0,
                    theta: trailing,
                });
            }
        }
    }
    Ok(NativeSequence::new(ops, Some(u.clone())))
}

/// Commute every `RZ` forward (later in time) through `RXY` and `ZZ` ops,
/// merging them into per-qubit trailing rotations.
///
/// The rewrite rule is `RZ(zeta) then RXY(theta, phi)` ->
/// `RXY(theta, phi - zeta) then RZ(zeta)` (this crate's project-wide sign
/// convention: an accumulated frame `zeta` subtracts from later pulse
/// phases). `ZZ` and Z-basis measurements commute with `RZ` unchanged;
/// a reset discards the frame on its qubit; opaque and conditioned ops
/// flush the pending frame as an explicit `RZ` in front of them.
///
/// With `drop_trailing`, the merged trailing rotations are removed from
/// the op list and recorded in `residual_frames` (they are pure frame
/// bookkeeping unless something downstream measures in the equatorial
/// plane); otherwise they are kept as explicit trailing `RZ` ops and the
/// op product equals the input's up to global phase.
pub fn commute_z_forward(seq: &NativeSequence, drop_trailing: bool) -> NativeSequence {
    let mut frames: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ops = Vec::with_capacity(seq.ops.len());
    for op in &seq.ops {
        match op {
            Gate::Rz { q, theta } => {
                *frames.entry(*q).or_insert(0.0) += theta;
            }
            Gate::Rxy { q, theta, phi } => {
                let zeta = frames.get(q).copied().unwrap_or(0.0);
                ops.push(Gate::Rxy {
                    q: *q,
                    theta: *theta,
                    phi: wrap_angle(phi - zeta),
                });
            }
            Gate::Zz { .. } | Gate::Measure { .. } => ops.push(op.clone()),
            Gate::Reset { q } => {
                frames.remove(q);
                ops.push(op.clone());
            }
            other => {
                // Opaque or conditioned op: restore the exact frame first.
                for q in other.qubits() {
                    if let Some(zeta) = frames.remove(&q) {
                        let w = wrap_angle(zeta);
                        if w.abs() > DEGENERATE_TOL {
                            ops.push(Gate::Rz { q, theta: w });
                        }
                    }
                }
                ops.push(other.clone());
            }
        }
    }
    let mut residual_frames = seq.residual_frames.clone();
    for (q, zeta) in frames {
        let w = wrap_angle(zeta);
        if w.abs() <= DEGENERATE_TOL {
            continue;
        }
        if drop_trailing {
            residual_frames.push((q, w));
        } else {
            ops.push(Gate::Rz { q, theta: w });
        }
    }
    NativeSequence {
        ops,
        target_unitary: seq.target_unitary.clone(),
        residual_frames,
    }
}

/// Options for [`synthesize_circuit`].
#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    /// Snap every emitted `RZ` angle to the pi/500 grid.
    pub quantize: bool,
    /// Merge runs of two-qubit unitaries on the same pair (in either
    /// orientation, with no intervening op on either qubit) into one
    /// `U4` before decomposing, saving `ZZ` gates.
    pub merge_su4: bool,
}

/// Canonical form of a `U4`: qubit order `(min, max)` with the matrix
/// reindexed so its low-order bit is the lower qubit.
fn canonical_u4(q: usize, q2: usize, m: &CMat) -> (usize, usize, CMat) {
    if q < q2 {
        (q, q2, m.clone())
    } else {
        // Reindex = conjugate by SWAP.
        (q2, q, embed_2q(m, 1, 0, 2))
    }
}

/// Merge adjacent two-qubit unitaries on the same qubit pair.
fn merge_adjacent_u4(c: &Circuit) -> Circuit {
    let mut out = Circuit::new(c.n_qubits);
    out.metadata = c.metadata.clone();
    for op in &c.ops {
        if let Gate::U4 { q, q2, matrix } = op {
            let (lo, hi, m) = canonical_u4(*q, *q2, matrix);
            // Find the last op touching either qubit; merge if it is a U4
            // on exactly this pair.
            let prev = out
                .ops
                .iter()
                .rposition(|g| g.qubits().iter().any(|&x| x == lo || x == hi));
            if let Some(idx) = prev {
                if let Gate::U4 {
                    q: pq,
                    q2: pq2,
                    matrix: pm,
                } = &out.ops[idx]
                {
                    if (*pq, *pq2) == (lo, hi) {
                        let merged = m.dot(pm); // later op multiplies on the left
                        out.ops[idx] = Gate::U4 {
                            q: lo,
                            q2: hi,
                            matrix: merged,
                        };
                        continue;
                    }
                }
            }
            out.ops.push(Gate::U4 {
                q: lo,
                q2: hi,
                matrix: m,
            });
        } else {
            out.ops.push(op.clone());
        }
    }
    out
}

/// Extend `ops` with `seq` (optionally quantized) remapped onto circuit
/// qubits, wrapping each emitted gate in a condition when given.
fn emit_sequence(
    ops: &mut Vec<Gate>,
    seq: &NativeSequence,
    q0: usize,
    q1: usize,
    quantize: bool,
    cond: Option<(&str, u8)>,
) {
    let seq = if quantize { seq.quantized() } else { seq.clone() };
    for g in seq.ops_on(q0, q1) {
        match cond {
            Some((on, value)) => {
                // Quantized RZ(0) inside a condition is pure noise; skip it.
                if let Gate::Rz { theta, .. } = g {
                    if theta == 0.0 {
                        continue;
                    }
                }
                ops.push(Gate::Cond {
                    on: on.to_string(),
                    value,
                    apply: Box::new(g),
                });
            }
            None => ops.push(g),
        }
    }
}

/// Lower a circuit to native ops: opaque `U2`/`U4` boxes and non-native
/// `RXY` angles are synthesized; native ops pass through unchanged.
///
/// `U4 { q, q2 }` matrices are indexed with `q` as the low-order bit.
/// With [`SynthOptions::quantize`], emitted and passed-through `RZ`
/// angles are snapped to the pi/500 grid.
pub fn synthesize_circuit(c: &Circuit, opts: &SynthOptions) -> Result<Circuit> {
    crate::circuit::validate_circuit(c)?;
    let merged;
    let source = if opts.merge_su4 {
        merged = merge_adjacent_u4(c);
        &merged
    } else {
        c
    };
    let mut out = Circuit::new(source.n_qubits);
    out.metadata = source.metadata.clone();
    for op in &source.ops {
        lower_gate(op, &mut out.ops, opts, None)?;
    }
    Ok(out)
}

fn lower_gate(
    op: &Gate,
    ops: &mut Vec<Gate>,
    opts: &SynthOptions,
    cond: Option<(&str, u8)>,
) -> Result<()> {
    match op {
        Gate::U2 { q, matrix } => {
            let seq = synth_su2(matrix)?;
            emit_sequence(ops, &seq, *q, *q, opts.quantize, cond);
        }
        Gate::U4 { q, q2, matrix } => {
            let seq = synth_su4(matrix)?;
            emit_sequence(ops, &seq, *q, *q2, opts.quantize, cond);
        }
        Gate::Rxy { q, theta, phi } if !op.is_native() => {
            let seq = synth_su2(&rxy(*theta, *phi))?;
            emit_sequence(ops, &seq, *q, *q, opts.quantize, cond);
        }
        Gate::Rz { q, theta } if opts.quantize => {
            let g = Gate::Rz {
                q: *q,
                theta: quantize_z(*theta),
            };
            match cond {
                Some((on, value)) => ops.push(Gate::Cond {
                    on: on.to_string(),
                    value,
                    apply: Box::new(g),
                }),
                None => ops.push(g),
            }
        }
        Gate::Cond { on, value, apply } => {
            lower_gate(apply, ops, opts, Some((on, *value)))?;
        }
        other => match cond {
            Some((on, value)) => ops.push(Gate::Cond {
                on: on.to_string(),
                value,
                apply: Box::new(other.clone()),
            }),
            None => ops.push(other.clone()),
        },
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::validate_circuit;
    use crate::math::{c, kron, max_abs_diff, phase_dist};

    #[test]
    fn quantize_z_grid_and_ties() {
        assert_eq!(quantize_z(0.0), 0.0);
        // Nearest-multiple rounding away from ties.
        assert_eq!(quantize_z(3.4 * Z_STEP), 3.0 * Z_STEP);
        assert_eq!(quantize_z(-3.4 * Z_STEP), -3.0 * Z_STEP);
        assert_eq!(quantize_z(3.6 * Z_STEP), 4.0 * Z_STEP);
        // Exact half-step ties round toward zero (step/2 is exact in
        // floating point, so this really exercises the tie branch).
        assert_eq!(quantize_z(Z_STEP / 2.0), 0.0);
        assert_eq!(quantize_z(-Z_STEP / 2.0), 0.0);
        assert_eq!(quantize_z(1.5 * Z_STEP + 1e-9), 2.0 * Z_STEP);
        // Wrap-then-round: 2pi + pi/1000 wraps to ~pi/1000, which sits at
        // (or within float fuzz of) the half-step tie.
        let q = quantize_z(2.0 * PI + PI / 1000.0);
        assert!(
            q == 0.0 || q == Z_STEP,
            "tie case must resolve to 0 or one step, got {q}"
        );
        // Angles snapping to the -pi end of the grid come back as +pi.
        assert_eq!(quantize_z(-PI), PI);
        assert_eq!(quantize_z(-PI + 1e-12), PI);
        assert_eq!(quantize_z(7.0 * PI), PI);
    }

    #[test]
    fn quantize_z_is_idempotent_on_grid_points() {
        for k in [-499i32, -250, -1, 0, 1, 77, 500] {
            let theta = f64::from(k) * Z_STEP;
            assert_eq!(quantize_z(theta), theta);
        }
    }

    #[test]
    fn synth_su2_identity_is_empty() {
        let seq = synth_su2(&eye(2)).unwrap();
        assert!(seq.ops.is_empty());
    }

    #[test]
    fn synth_su2_pure_z_is_single_rz() {
        // exp(-i 0.3 Z / 2) = Rz(0.3).
        let seq = synth_su2(&rz(0.3)).unwrap();
        assert_eq!(seq.ops.len(), 1);
        match &seq.ops[0] {
            Gate::Rz { q: 0, theta } => assert!((theta - 0.3).abs() < 1e-15),
            other => panic!("expected a single RZ, got {other:?}"),
        }
        // Its quantized form sits on the grid within half a step of 0.3.
        let quant = seq.quantized();
        assert!(quant.is_z_quantized());
        match &quant.ops[0] {
            Gate::Rz { theta, .. } => assert!((theta - 0.3).abs() <= Z_STEP / 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn synth_su2_native_pulse_round_trips_to_itself() {
        let seq = synth_su2(&rxy(FRAC_PI_2, 0.7)).unwrap();
        assert_eq!(seq.ops.len(), 1, "pi/2 equatorial pulse is one op");
        match &seq.ops[0] {
            Gate::Rxy { q: 0, theta, phi } => {
                assert!((theta - FRAC_PI_2).abs() < 1e-12);
                assert!((phi - 0.7).abs() < 1e-12);
            }
            other => panic!("expected RXY, got {other:?}"),
        }
    }

    #[test]
    fn synth_su2_pi_pulse_uses_two_equal_phase_pulses() {
        let target = rxy(PI, 0.4);
        let seq = synth_su2(&target).unwrap();
        assert_eq!(seq.rxy_count(), 2);
        let v = seq.unitary(1).unwrap();
        assert!(phase_dist(&v, &target) < 1e-12);
        if let (Gate::Rxy { phi: p1, .. }, Gate::Rxy { phi: p2, .. }) =
            (&seq.ops[0], &seq.ops[1])
        {
            assert!((p1 - p2).abs() < 1e-12, "pi pulse = two same-axis pi/2 pulses");
        } else {
            panic!("expected two RXY ops first");
        }
    }

    #[test]
    fn synth_su2_haar_oracle() {
        for i in 0..100 {
            let u = haar_unitary(2, 1000 + i);
            let seq = synth_su2(&u).unwrap();
            assert!(seq.rxy_count() <= 2);
            assert!(seq.rz_count() <= 1);
            for op in &seq.ops {
                if let Gate::Rxy { theta, .. } = op {
                    assert!((theta - FRAC_PI_2).abs() < 1e-15, "only pi/2 pulses");
                }
            }
            let v = seq.unitary(1).unwrap();
            let d = phase_dist(&v, &u);
            assert!(d < 1e-9, "seed {i}: distance {d}");
        }
    }

    #[test]
    fn synth_su2_anti_diagonal_targets() {
        // Pauli X and Y, plus a phased anti-diagonal: the theta = pi
        // extraction branch.
        for u in [
            crate::math::pauli_x(),
            crate::math::pauli_y(),
            rxy(PI, -2.2),
        ] {
            let seq = synth_su2(&u).unwrap();
            let v = seq.unitary(1).unwrap();
            assert!(phase_dist(&v, &u) < 1e-12);
        }
    }

    #[test]
    fn synth_su2_rejects_non_unitary() {
        let mut m = eye(2);
        m[(0, 0)] = c(1.5);
        assert!(synth_su2(&m).is_err());
    }

    #[test]
    fn synth_su2_quantized_error_bound() {
        // Spec-level bound: quantizing the Z angle moves the product by at
        // most 2*(pi/1000) + 1e-9 in operator distance.
        let bound = 2.0 * (PI / 1000.0) + 1e-9;
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let u = haar_unitary(2, 50_000 + i);
            let quant = synth_su2(&u).unwrap().quantized();
            assert!(quant.is_z_quantized());
            let d = phase_dist(&quant.unitary(1).unwrap(), &u);
            worst = worst.max(d);
        }
        assert!(worst <= bound, "worst quantized distance {worst} > {bound}");
    }

    #[test]
    fn synth_su2_is_idempotent_on_its_output() {
        for i in 0..20 {
            let u = haar_unitary(2, 777 + i);
            let first = synth_su2(&u).unwrap();
            let v1 = first.unitary(1).unwrap();
            let second = synth_su2(&v1).unwrap();
            let v2 = second.unitary(1).unwrap();
            assert!(phase_dist(&v1, &v2) < 1e-9);
        }
    }

    #[test]
    fn commute_z_pure_frame_drops_to_residual() {
        let seq = NativeSequence::new(vec![Gate::Rz { q: 0, theta: 0.9 }], None);
        let out = commute_z_forward(&seq, true);
        assert!(out.ops.is_empty());
        assert_eq!(out.residual_frames.len(), 1);
        assert_eq!(out.residual_frames[0].0, 0);
        assert!((out.residual_frames[0].1 - 0.9).abs() < 1e-15);
        // The frame-completed unitary still matches the input.
        let orig = seq.unitary(1).unwrap();
        let reco = out.unitary_with_frames(1).unwrap();
        assert!(phase_dist(&orig, &reco) < 1e-12);
    }

    #[test]
    fn commute_z_through_rxy_matches_spec_example() {
        // [RZ(pi/2), RXY(pi/2, 0)] -> [RXY(pi/2, -pi/2), RZ(pi/2)].
        let seq = NativeSequence::new(
            vec![
                Gate::Rz { q: 0, theta: FRAC_PI_2 },
                Gate::Rxy { q: 0, theta: FRAC_PI_2, phi: 0.0 },
            ],
            None,
        );
        let out = commute_z_forward(&seq, false);
        assert_eq!(out.ops.len(), 2);
        match (&out.ops[0], &out.ops[1]) {
            (Gate::Rxy { phi, .. }, Gate::Rz { theta, .. }) => {
                assert!((phi + FRAC_PI_2).abs() < 1e-15);
                assert!((theta - FRAC_PI_2).abs() < 1e-15);
            }
            other => panic!("unexpected ops {other:?}"),
        }
        let a = seq.unitary(1).unwrap();
        let b = out.unitary(1).unwrap();
        assert!(phase_dist(&a, &b) < 1e-10);
    }

    #[test]
    fn commute_z_random_sequences_preserve_unitary() {
        use rand::prelude::*;
        for seed in 0..30 {
            let mut rng = crate::rng::rng_for(seed, "commute-z", 0);
            let mut ops = Vec::new();
            for _ in 0..10 {
                match rng.random_range(0..3) {
                    0 => ops.push(Gate::Rz {
                        q: rng.random_range(0..2),
                        theta: rng.random::<f64>() * 6.0 - 3.0,
                    }),
                    1 => ops.push(Gate::Rxy {
                        q: rng.random_range(0..2),
                        theta: FRAC_PI_2,
                        phi: rng.random::<f64>() * 6.0 - 3.0,
                    }),
                    _ => ops.push(Gate::Zz { q: 0, q2: 1 }),
                }
            }
            let seq = NativeSequence::new(ops, None);
            let kept = commute_z_forward(&seq, false);
            assert!(phase_dist(&seq.unitary(2).unwrap(), &kept.unitary(2).unwrap()) < 1e-10);
            let dropped = commute_z_forward(&seq, true);
            assert!(
                phase_dist(
                    &seq.unitary(2).unwrap(),
                    &dropped.unitary_with_frames(2).unwrap()
                ) < 1e-10
            );
            // All RZ ops are gone from the dropped form.
            assert_eq!(dropped.rz_count(), 0);
        }
    }

    #[test]
    fn merge_adjacent_u4_combines_across_orientation() {
        let a = haar_su4(11);
        let b = haar_su4(12);
        let mut circ = Circuit::new(2);
        circ.u4(0, 1, a.clone());
        circ.u4(1, 0, b.clone()); // flipped orientation
        let merged = merge_adjacent_u4(&circ);
        assert_eq!(merged.ops.len(), 1);
        if let Gate::U4 { q: 0, q2: 1, matrix } = &merged.ops[0] {
            // b reindexed to (0,1) order, applied after a.
            let b_canon = embed_2q(&b, 1, 0, 2);
            let expect = b_canon.dot(&a);
            assert!(max_abs_diff(matrix, &expect) < 1e-12);
        } else {
            panic!("expected one canonical U4");
        }
    }

    #[test]
    fn merge_adjacent_u4_blocked_by_intervening_op() {
        let mut circ = Circuit::new(2);
        circ.u4(0, 1, haar_su4(21));
        circ.rxy(0, FRAC_PI_2, 0.0);
        circ.u4(0, 1, haar_su4(22));
        let merged = merge_adjacent_u4(&circ);
        assert_eq!(merged.ops.len(), 3);
    }

    #[test]
    fn merge_adjacent_u4_skips_other_pairs() {
        // Ops on a disjoint pair do not block merging.
        let mut circ = Circuit::new(4);
        circ.u4(0, 1, haar_su4(31));
        circ.u4(2, 3, haar_su4(32));
        circ.u4(0, 1, haar_su4(33));
        let merged = merge_adjacent_u4(&circ);
        assert_eq!(merged.ops.len(), 2);
    }

    #[test]
    fn synthesize_circuit_lowers_everything_to_native() {
        let mut circ = Circuit::new(2);
        circ.u2(0, haar_unitary(2, 41));
        circ.u4(0, 1, haar_su4(42));
        circ.rxy(1, 0.7, 0.2); // non-native angle
        circ.rz(0, 0.123);
        let out = synthesize_circuit(&circ, &SynthOptions::default()).unwrap();
        validate_circuit(&out).unwrap();
        assert!(out.ops.iter().all(|g| g.is_native()));
        let u_in = circuit_unitary(&circ).unwrap();
        let u_out = circuit_unitary(&out).unwrap();
        assert!(phase_dist(&u_in, &u_out) < 1e-8);
    }

    #[test]
    fn synthesize_circuit_passthrough_is_exact_for_native_input() {
        let mut circ = Circuit::new(2);
        circ.rxy(0, FRAC_PI_2, 0.3)
            .zz(0, 1)
            .rz(1, 0.25)
            .measure(0, "m0")
            .cond("m0", 1, Gate::Rxy { q: 1, theta: PI, phi: 0.0 });
        let out = synthesize_circuit(&circ, &SynthOptions::default()).unwrap();
        assert_eq!(circ, out);
        // Re-synthesis is a fixed point.
        let again = synthesize_circuit(&out, &SynthOptions::default()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn synthesize_circuit_quantize_flag_snaps_rz() {
        let mut circ = Circuit::new(2);
        circ.rz(0, 0.1234567);
        circ.u2(1, haar_unitary(2, 55));
        let opts = SynthOptions { quantize: true, ..Default::default() };
        let out = synthesize_circuit(&circ, &opts).unwrap();
        let seq = NativeSequence::new(out.ops.clone(), None);
        assert!(seq.is_z_quantized());
    }

    #[test]
    fn synthesize_circuit_conditioned_u2_stays_conditioned() {
        let mut circ = Circuit::new(2);
        circ.measure(0, "m");
        circ.cond("m", 1, Gate::U2 { q: 1, matrix: haar_unitary(2, 66) });
        let out = synthesize_circuit(&circ, &SynthOptions::default()).unwrap();
        validate_circuit(&out).unwrap();
        assert!(out.ops.len() >= 2);
        for g in &out.ops[1..] {
            assert!(
                matches!(g, Gate::Cond { .. }),
                "synthesized pieces must carry the condition, got {g:?}"
            );
        }
    }

    #[test]
    fn synthesize_circuit_with_merge_reduces_zz_count() {
        let mut circ = Circuit::new(2);
        circ.u4(0, 1, haar_su4(71));
        circ.u4(0, 1, haar_su4(72));
        let plain = synthesize_circuit(&circ, &SynthOptions::default()).unwrap();
        let merged = synthesize_circuit(
            &circ,
            &SynthOptions { merge_su4: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(plain.zz_count(), 6);
        assert_eq!(merged.zz_count(), 3);
        let u_in = circuit_unitary(&circ).unwrap();
        assert!(phase_dist(&circuit_unitary(&merged).unwrap(), &u_in) < 1e-8);
    }

    #[test]
    fn native_sequence_unitary_embeds_qubit_one() {
        let seq = NativeSequence::new(vec![Gate::Rxy { q: 1, theta: FRAC_PI_2, phi: 0.1 }], None);
        let v = seq.unitary(2).unwrap();
        let expect = kron(&rxy(FRAC_PI_2, 0.1), &eye(2));
        assert!(max_abs_diff(&v, &expect) < 1e-15);
    }
}
