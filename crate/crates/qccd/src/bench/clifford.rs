//! Uniform sampling of the one- and two-qubit Clifford groups with
//! native-gate realizations.
//!
//! The single-qubit group (24 elements modulo global phase) is tabulated
//! once by breadth-first closure over the generators {H, S}. The
//! two-qubit group (11520 elements modulo phase) is never tabulated;
//! instead every element is addressed by an index through the canonical
//! coset decomposition
//!
//! ```text
//!   C = (A1 (x) A2) * E * (Sa (x) Sb)
//! ```
//!
//! where `A1, A2` range over the 24 single-qubit Cliffords, `Sa, Sb`
//! range over the three powers {I, V, V^2} of the axis-cycling element
//! `V` (which permutes X -> Y -> Z -> X under conjugation), and `E` is
//! one of the four entangling-class representatives:
//!
//! | class | representative | axis pairs | elements | native ZZ cost |
//! |-------|----------------|-----------:|---------:|---------------:|
//! | 0     | identity       |          1 |      576 |              0 |
//! | 1     | CZ             |          9 |     5184 |              1 |
//! | 2     | iSWAP          |          9 |     5184 |              2 |
//! | 3     | SWAP           |          1 |      576 |              3 |
//!
//! The coset counting gives 576·(1 + 9 + 9 + 1) = 11520 and the
//! enumeration is exhaustive and collision-free (asserted in tests), so a
//! uniform index draw is a provably uniform group sample. Averaged over
//! the group the native entangler cost is exactly 1.5 ZZ per element.
//!
//! The index layout (`a1 + 24·a2 + 576·k`) and the breadth-first order of
//! the single-qubit table are load-bearing for reproducibility: they fix
//! which element a given `(seed, index)` denotes across runs.

use crate::circuit::Gate;
use crate::math::{c, kron, CMat, C64};
use crate::rng::rng_for;
use crate::synth::{synth_su2, NativeSequence};
use crate::{Error, Result};
use ndarray::array;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::OnceLock;

/// Order of the single-qubit Clifford group modulo phase.
pub const C1_SIZE: usize = 24;
/// Order of the two-qubit Clifford group modulo phase.
pub const C2_SIZE: usize = 11520;
/// Elements per entangling class: local, CZ-class, iSWAP-class, SWAP-class.
pub const C2_CLASS_SIZES: [usize; 4] = [576, 5184, 5184, 576];
/// Native ZZ-entangler cost of each class template.
pub const C2_CLASS_ZZ: [usize; 4] = [0, 1, 2, 3];
/// Mean ZZ entanglers per uniformly random two-qubit Clifford:
/// (0·576 + 1·5184 + 2·5184 + 3·576) / 11520 = 3/2 exactly.
pub const ZZ_PER_CLIFFORD: f64 = 1.5;

fn hadamard() -> CMat {
    let s = FRAC_1_SQRT_2;
    array![[c(s), c(s)], [c(s), c(-s)]]
}

fn s_gate() -> CMat {
    array![[c(1.0), c(0.0)], [c(0.0), C64::new(0.0, 1.0)]]
}

/// The axis-cycling Clifford `V = (1/2)[[1+i, 1-i], [1+i, -1+i]]`:
/// `V X V* = Y`, `V Y V* = Z`, `V Z V* = X`, and `V^3 ~ I`.
fn axis_cycle() -> CMat {
    array![
        [C64::new(0.5, 0.5), C64::new(0.5, -0.5)],
        [C64::new(0.5, 0.5), C64::new(-0.5, 0.5)]
    ]
}

/// Phase-canonical integer fingerprint of a matrix: divide out the phase
/// of the first maximal-magnitude entry, then round onto a 1e-6 lattice.
/// Stable for Clifford matrices because every nonzero entry magnitude is
/// one of {1/2, 1/sqrt(2), 1}, far from both zero and the lattice
/// midpoints relative to accumulated rounding error.
fn canonical_key(m: &CMat) -> Vec<(i64, i64)> {
    let max_norm = m.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let anchor = m
        .iter()
        .find(|v| v.norm() >= max_norm - 1e-6)
        .copied()
        .expect("matrix has at least one entry");
    let phase = anchor / anchor.norm();
    m.iter()
        .map(|v| {
            let w = v / phase;
            ((w.re * 1e6).round() as i64, (w.im * 1e6).round() as i64)
        })
        .collect()
}

/// The 24 single-qubit Clifford matrices, in breadth-first closure order
/// over {H, S} starting from the identity (index 0 is the identity).
pub fn c1_table() -> &'static [CMat] {
    static TABLE: OnceLock<Vec<CMat>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let gens = [hadamard(), s_gate()];
        let mut out: Vec<CMat> = vec![array![[c(1.0), c(0.0)], [c(0.0), c(1.0)]]];
        let mut seen = std::collections::HashSet::new();
        seen.insert(canonical_key(&out[0]));
        let mut next = 0;
        while next < out.len() {
            let cur = out[next].clone();
            next += 1;
            for g in &gens {
                let prod = g.dot(&cur);
                if seen.insert(canonical_key(&prod)) {
                    out.push(prod);
                }
            }
        }
        assert_eq!(out.len(), C1_SIZE, "single-qubit Clifford closure size");
        out
    })
}

// ---------------------------------------------------------------------------
// Entangling-class representatives and their native templates
// ---------------------------------------------------------------------------

fn cz_matrix() -> CMat {
    let o = c(1.0);
    let z = c(0.0);
    array![
        [o, z, z, z],
        [z, o, z, z],
        [z, z, o, z],
        [z, z, z, -o]
    ]
}

fn iswap_matrix() -> CMat {
    let o = c(1.0);
    let z = c(0.0);
    let i = C64::new(0.0, 1.0);
    array![
        [o, z, z, z],
        [z, z, i, z],
        [z, i, z, z],
        [z, z, z, o]
    ]
}

fn swap_matrix() -> CMat {
    let o = c(1.0);
    let z = c(0.0);
    array![
        [o, z, z, z],
        [z, z, o, z],
        [z, o, z, z],
        [z, z, z, o]
    ]
}

fn u2(q: usize, matrix: CMat) -> Gate {
    Gate::U2 { q, matrix }
}

/// CZ up to global phase: `(Rz(-pi/2) (x) Rz(-pi/2)) * U_zz`. One ZZ.
fn push_cz(ops: &mut Vec<Gate>) {
    ops.push(Gate::Zz { q: 0, q2: 1 });
    ops.push(Gate::Rz { q: 0, theta: -FRAC_PI_2 });
    ops.push(Gate::Rz { q: 1, theta: -FRAC_PI_2 });
}

/// The inverse entangler `U_zz*` up to global phase:
/// `(Rz(pi) (x) Rz(pi)) * U_zz = i * U_zz*`. One ZZ.
fn push_uzz_dag(ops: &mut Vec<Gate>) {
    ops.push(Gate::Zz { q: 0, q2: 1 });
    ops.push(Gate::Rz { q: 0, theta: PI });
    ops.push(Gate::Rz { q: 1, theta: PI });
}

/// iSWAP up to global phase as `exp(i pi/4 XX) * exp(i pi/4 YY)`, each
/// factor a conjugated `U_zz*`: the XX factor by Hadamards, the YY factor
/// by `W = Rxy(pi/2, pi) = exp(i pi/4 X)` (which maps Z to Y). Two ZZ.
fn push_iswap(ops: &mut Vec<Gate>) {
    // exp(i pi/4 YY) = (W (x) W) U_zz* (W* (x) W*), applied first.
    ops.push(Gate::Rxy { q: 0, theta: FRAC_PI_2, phi: 0.0 }); // W*
    ops.push(Gate::Rxy { q: 1, theta: FRAC_PI_2, phi: 0.0 });
    push_uzz_dag(ops);
    ops.push(Gate::Rxy { q: 0, theta: FRAC_PI_2, phi: PI }); // W
    ops.push(Gate::Rxy { q: 1, theta: FRAC_PI_2, phi: PI });
    // exp(i pi/4 XX) = (H (x) H) U_zz* (H (x) H).
    ops.push(u2(0, hadamard()));
    ops.push(u2(1, hadamard()));
    push_uzz_dag(ops);
    ops.push(u2(0, hadamard()));
    ops.push(u2(1, hadamard()));
}

/// CNOT with control `cq` and target `tq` as H-conjugated CZ. One ZZ.
fn push_cnot(ops: &mut Vec<Gate>, tq: usize) {
    ops.push(u2(tq, hadamard()));
    push_cz(ops);
    ops.push(u2(tq, hadamard()));
}

/// SWAP as three alternating CNOTs. Three ZZ.
fn push_swap(ops: &mut Vec<Gate>) {
    push_cnot(ops, 1);
    push_cnot(ops, 0);
    push_cnot(ops, 1);
}

/// Replace every opaque `U2` in a template with its native pulse
/// sequence; other ops pass through unchanged.
fn lower_u2s(template: Vec<Gate>) -> Result<Vec<Gate>> {
    let mut out = Vec::with_capacity(template.len() * 2);
    for op in template {
        match op {
            Gate::U2 { q, matrix } => {
                let seq = synth_su2(&matrix)?;
                out.extend(seq.ops_on(q, q));
            }
            other => out.push(other),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

/// A Clifford group element with its native realization.
#[derive(Debug, Clone)]
pub struct CliffordSample {
    /// Index into the group enumeration: `0..24` (n=1) or `0..11520` (n=2).
    pub index: usize,
    /// The element's matrix; the native ops realize it up to global phase.
    /// For n=2, local qubit 0 is the low-order bit of the matrix index.
    pub unitary: CMat,
    /// Native ops on local qubit 0 (n=1) or local qubits 0 and 1 (n=2),
    /// in time order.
    pub ops: Vec<Gate>,
    /// ZZ entanglers in `ops`: 0 for n=1; the class cost 0/1/2/3 for n=2.
    pub zz: usize,
}

impl CliffordSample {
    /// Ops remapped onto concrete qubits (`q1` is ignored for n=1 samples).
    pub fn ops_on(&self, q0: usize, q1: usize) -> Vec<Gate> {
        NativeSequence {
            ops: self.ops.clone(),
            target_unitary: None,
            residual_frames: Vec::new(),
        }
        .ops_on(q0, q1)
    }
}

/// The group element denoted by `index` under the fixed enumeration.
///
/// n=1: `index` into the breadth-first table. n=2: `index = a1 + 24·a2 +
/// 576·k` with `a1, a2` the local Cliffords and `k` in `0..20` selecting
/// the entangling class and axis pair (`k=0`: local; `k-1` in `0..9`:
/// CZ with axes `(t%3, t/3)`; `k-10` in `0..9`: iSWAP likewise; `k=19`:
/// SWAP).
pub fn clifford_from_index(n: usize, index: usize) -> Result<CliffordSample> {
    match n {
        1 => {
            if index >= C1_SIZE {
                return Err(Error::Bench(format!(
                    "single-qubit Clifford index {index} out of range 0..{C1_SIZE}"
                )));
            }
            let unitary = c1_table()[index].clone();
            let ops = lower_u2s(vec![u2(0, unitary.clone())])?;
            Ok(CliffordSample { index, unitary, ops, zz: 0 })
        }
        2 => {
            if index >= C2_SIZE {
                return Err(Error::Bench(format!(
                    "two-qubit Clifford index {index} out of range 0..{C2_SIZE}"
                )));
            }
            let table = c1_table();
            let a1 = index % 24;
            let a2 = (index / 24) % 24;
            let k = index / 576;
            let v = axis_cycle();
            let axes = [
                array![[c(1.0), c(0.0)], [c(0.0), c(1.0)]],
                v.clone(),
                v.dot(&v),
            ];
            // (class representative, axis indices, template builder)
            let (e_mat, sa, sb): (CMat, usize, usize) = match k {
                0 => (CMat::eye(4), 0, 0),
                1..=9 => {
                    let t = k - 1;
                    (cz_matrix(), t % 3, t / 3)
                }
                10..=18 => {
                    let t = k - 10;
                    (iswap_matrix(), t % 3, t / 3)
                }
                19 => (swap_matrix(), 0, 0),
                _ => unreachable!("k < 20 by construction"),
            };
            // Matrix: qubit 0 is the low bit, so kron's first (high) factor
            // carries the qubit-1 locals.
            let unitary = kron(&table[a2], &table[a1])
                .dot(&e_mat)
                .dot(&kron(&axes[sb], &axes[sa]));

            let mut template = Vec::new();
            if sa != 0 {
                template.push(u2(0, axes[sa].clone()));
            }
            if sb != 0 {
                template.push(u2(1, axes[sb].clone()));
            }
            match k {
                0 => {}
                1..=9 => push_cz(&mut template),
                10..=18 => push_iswap(&mut template),
                _ => push_swap(&mut template),
            }
            if a1 != 0 {
                template.push(u2(0, table[a1].clone()));
            }
            if a2 != 0 {
                template.push(u2(1, table[a2].clone()));
            }
            let ops = lower_u2s(template)?;
            let zz = ops.iter().filter(|g| matches!(g, Gate::Zz { .. })).count();
            Ok(CliffordSample { index, unitary, ops, zz })
        }
        _ => Err(Error::Bench(format!(
            "Clifford sampling supports n in {{1, 2}}, got {n}"
        ))),
    }
}

/// Draw a uniformly random n-qubit Clifford (n in {1, 2}), returning its
/// matrix and native realization. Uniformity follows from the index map
/// being a bijection onto the group (asserted exhaustively in tests).
pub fn sample_clifford(n: usize, seed: u64) -> Result<CliffordSample> {
    let size = match n {
        1 => C1_SIZE,
        2 => C2_SIZE,
        _ => {
            return Err(Error::Bench(format!(
                "Clifford sampling supports n in {{1, 2}}, got {n}"
            )))
        }
    };
    let mut rng = rng_for(seed, "clifford", n as u64);
    clifford_from_index(n, rng.random_range(0..size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{dagger, embed_1q, max_abs_diff, pauli_x, pauli_y, pauli_z, phase_dist};
    use std::collections::HashSet;

    fn ops_unitary(ops: &[Gate], n: usize) -> CMat {
        NativeSequence {
            ops: ops.to_vec(),
            target_unitary: None,
            residual_frames: Vec::new(),
        }
        .unitary(n)
        .expect("unitary ops")
    }

    #[test]
    fn one_qubit_table_is_a_group_of_24() {
        let table = c1_table();
        assert_eq!(table.len(), 24);
        let keys: HashSet<_> = table.iter().map(canonical_key).collect();
        assert_eq!(keys.len(), 24, "all elements distinct modulo phase");
        // Closed under multiplication and inversion (hence a group).
        for a in table {
            assert!(keys.contains(&canonical_key(&dagger(a))));
            for b in table {
                assert!(keys.contains(&canonical_key(&a.dot(b))));
            }
        }
        // Index 0 is the identity (the breadth-first root).
        assert!(phase_dist(&table[0], &CMat::eye(2)) < 1e-12);
    }

    #[test]
    fn axis_cycle_element_rotates_pauli_axes() {
        let v = axis_cycle();
        let vd = dagger(&v);
        assert!(max_abs_diff(&v.dot(&pauli_x()).dot(&vd), &pauli_y()) < 1e-12);
        assert!(max_abs_diff(&v.dot(&pauli_y()).dot(&vd), &pauli_z()) < 1e-12);
        assert!(max_abs_diff(&v.dot(&pauli_z()).dot(&vd), &pauli_x()) < 1e-12);
        let v3 = v.dot(&v).dot(&v);
        assert!(phase_dist(&v3, &CMat::eye(2)) < 1e-12, "V^3 ~ I");
        // V is in the single-qubit group.
        let keys: HashSet<_> = c1_table().iter().map(canonical_key).collect();
        assert!(keys.contains(&canonical_key(&v)));
    }

    #[test]
    fn one_qubit_elements_realize_their_matrices() {
        for idx in 0..C1_SIZE {
            let s = clifford_from_index(1, idx).unwrap();
            assert_eq!(s.zz, 0);
            assert!(s.ops.iter().all(|g| g.is_native()), "native ops only");
            assert!(
                phase_dist(&ops_unitary(&s.ops, 1), &s.unitary) < 1e-9,
                "index {idx}"
            );
        }
    }

    /// Exhaustive sweep of the coset enumeration: 11520 distinct elements,
    /// every native template realizes its matrix up to phase, entangler
    /// cost matches the class, and all ops are machine-native.
    #[test]
    fn two_qubit_enumeration_is_exhaustive_and_realized() {
        let mut keys = HashSet::with_capacity(C2_SIZE);
        let mut class_zz_seen = [usize::MAX; 4];
        for idx in 0..C2_SIZE {
            let s = clifford_from_index(2, idx).unwrap();
            assert!(keys.insert(canonical_key(&s.unitary)), "collision at {idx}");
            let class = idx / 576;
            let class_bucket = match class {
                0 => 0,
                1..=9 => 1,
                10..=18 => 2,
                _ => 3,
            };
            assert_eq!(s.zz, C2_CLASS_ZZ[class_bucket], "zz cost at {idx}");
            class_zz_seen[class_bucket] = s.zz;
            assert!(s.ops.iter().all(|g| g.is_native()), "native ops at {idx}");
            // Realization check on a deterministic stride (synthesis +
            // 4x4 products for all 11520 would still pass, just slowly).
            if idx % 23 == 0 {
                assert!(
                    phase_dist(&ops_unitary(&s.ops, 2), &s.unitary) < 1e-9,
                    "realization at {idx}"
                );
            }
        }
        assert_eq!(keys.len(), C2_SIZE);
        assert_eq!(class_zz_seen, [0, 1, 2, 3]);
    }

    /// Conjugating single-qubit Paulis by a product of two samples lands
    /// back in the Pauli group (the defining symplectic property).
    #[test]
    fn sample_products_map_paulis_to_paulis() {
        let paulis_1q = [pauli_x(), pauli_y(), pauli_z()];
        let mut two_q_paulis: Vec<CMat> = Vec::new();
        let eye2 = CMat::eye(2);
        let mut singles: Vec<CMat> = vec![eye2.clone()];
        singles.extend(paulis_1q.iter().cloned());
        for a in &singles {
            for b in &singles {
                two_q_paulis.push(kron(a, b));
            }
        }
        let is_signed_pauli = |m: &CMat| {
            two_q_paulis
                .iter()
                .any(|p| max_abs_diff(m, p) < 1e-9 || max_abs_diff(&-m.clone(), p) < 1e-9)
        };
        for trial in 0..30 {
            let s1 = sample_clifford(2, 1000 + trial).unwrap();
            let s2 = sample_clifford(2, 2000 + trial).unwrap();
            let u = s1.unitary.dot(&s2.unitary);
            let ud = dagger(&u);
            for (p, q) in [(pauli_x(), 0), (pauli_z(), 0), (pauli_x(), 1), (pauli_z(), 1)] {
                let conj = u.dot(&embed_1q(&p, q, 2)).dot(&ud);
                assert!(is_signed_pauli(&conj), "trial {trial}");
            }
        }
    }

    /// Frequency test for the 1-qubit sampler: 10^5 draws, every element
    /// within 3 sigma of the uniform multinomial expectation (fixed seeds
    /// make this deterministic).
    #[test]
    fn one_qubit_sampling_is_uniform() {
        let n_draws = 100_000usize;
        let mut counts = [0usize; C1_SIZE];
        for i in 0..n_draws {
            counts[sample_clifford(1, i as u64).unwrap().index] += 1;
        }
        let p = 1.0 / C1_SIZE as f64;
        let mean = n_draws as f64 * p;
        let sigma = (n_draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &cnt) in counts.iter().enumerate() {
            assert!(
                (cnt as f64 - mean).abs() <= 3.0 * sigma,
                "element {i}: count {cnt}, expected {mean:.1} +- {sigma:.1}"
            );
        }
    }

    /// The 2-qubit sampler hits the entangling classes with their coset
    /// weights, and its empirical mean ZZ cost sits in [1.4, 1.6] (the
    /// constant used to scale reported RB error to per-entangler error).
    #[test]
    fn two_qubit_sampling_matches_coset_weights() {
        let n_draws = 20_000usize;
        let mut class_counts = [0usize; 4];
        let mut zz_total = 0usize;
        for i in 0..n_draws {
            let s = sample_clifford(2, i as u64).unwrap();
            let bucket = match s.index / 576 {
                0 => 0,
                1..=9 => 1,
                10..=18 => 2,
                _ => 3,
            };
            class_counts[bucket] += 1;
            zz_total += s.zz;
        }
        for (bucket, &cnt) in class_counts.iter().enumerate() {
            let p = C2_CLASS_SIZES[bucket] as f64 / C2_SIZE as f64;
            let mean = n_draws as f64 * p;
            let sigma = (n_draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (cnt as f64 - mean).abs() <= 3.0 * sigma,
                "class {bucket}: count {cnt}, expected {mean:.1} +- {sigma:.1}"
            );
        }
        let mean_zz = zz_total as f64 / n_draws as f64;
        assert!(
            (1.4..=1.6).contains(&mean_zz),
            "mean ZZ per Clifford {mean_zz}"
        );
    }

    #[test]
    fn two_qubit_samples_realize_their_matrices() {
        for trial in 0..40 {
            let s = sample_clifford(2, 500 + trial).unwrap();
            assert!(
                phase_dist(&ops_unitary(&s.ops, 2), &s.unitary) < 1e-9,
                "trial {trial} (index {})",
                s.index
            );
        }
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        assert!(clifford_from_index(1, 24).is_err());
        assert!(clifford_from_index(2, C2_SIZE).is_err());
        assert!(clifford_from_index(3, 0).is_err());
        assert!(sample_clifford(0, 1).is_err());
    }
}
