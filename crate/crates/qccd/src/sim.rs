//! Noisy simulation: exact density-matrix execution and seeded
//! trajectory sampling of circuits and compiled schedules.
//!
//! Two engines share one lowered op stream:
//!
//! * [`run_exact`] / [`run_exact_schedule`] evolve a density matrix and
//!   return the exact outcome distribution. Mid-circuit measurements
//!   branch the execution (true outcome × recorded bit, since a readout
//!   error records the wrong bit while the state projects on the right
//!   one); branches share their quantum state copy-on-write until a
//!   conditioned gate actually makes them diverge, so the cost stays
//!   proportional to the number of *physically distinct* histories.
//! * [`run_shots`] / [`run_shots_schedule`] sample seeded trajectories:
//!   pure statevectors with stochastic channel draws. Each shot derives
//!   its own seed from (root seed, attempt index), so results are
//!   byte-identical across runs and thread counts. Circuits without
//!   mid-circuit measurement, feedforward, or reset take a fast path —
//!   one exact run plus multinomial sampling — which is statistically
//!   identical and much cheaper for benchmark ensembles.
//!
//! The noise model attaches to the stream as follows:
//!
//! * depolarizing after every entangler (rate from `p_tq_depol`) and
//!   after every RXY pulse (`p_sq_depol`), with the channel probability
//!   derived from the average-infidelity convention
//!   [`depolarizing_param`] so the RB loop closes;
//! * software RZ and raw `U2`/`U4` matrices carry no gate noise (the
//!   former never leaves the control system; the latter only appear in
//!   ideal-reference simulations);
//! * state preparation and measurement error as a single classical
//!   bit-flip of probability `p_spam` at terminal readout (applied once
//!   per prepare-measure cycle, which is what the quoted SPAM number
//!   measures; a bit flip before a Z measurement and a misread of its
//!   outcome are the same channel to every observer);
//! * mid-circuit readout misrecords with probability `p_meas_lc` and
//!   dephases every idle qubit by the crosstalk strength (coherence
//!   retention `1 − p_meas_crosstalk_idle`, the fraction a Ramsey
//!   experiment would report losing);
//! * schedules additionally apply idle dephasing with retention
//!   `exp(−t·dd_memory_multiplier/T2)` per qubit per idle interval,
//!   where idle time is everything outside the qubit's own gate,
//!   measurement, and init events (transport and cooling count as
//!   idle — the ion is in memory while it moves).
//!
//! Dimensions are capped at eight qubits: exactness is the point here,
//! and every target workload fits in six.

use crate::circuit::{validate_circuit, Circuit, Gate};
use crate::error::{Error, Result};
use crate::machine::{depolarizing_param, NoiseModel};
use crate::math::{rxy, rz, u_zz, CMat, C64};
use crate::rng::{derive_seed, rng_for};
use crate::schedule::{EventKind, TransportSchedule};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::rc::Rc;

/// Exact simulation works in the full Hilbert space; eight qubits is
/// the supported ceiling (the machine itself holds at most six).
pub const MAX_SIM_QUBITS: usize = 8;

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SIM_QUBITS {
        return Err(Error::Sim(format!(
            "simulation supports 1..={MAX_SIM_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

/// A pure state on `n` qubits as a flat amplitude vector. Qubit `q` is
/// bit `q` of the basis index (low bit = qubit 0), matching the
/// embedding convention used by the synthesis oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl StateVector {
    /// |0...0>.
    pub fn zero_state(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Apply a 2x2 unitary to qubit `q`.
    pub fn apply_1q(&mut self, u: &CMat, q: usize) {
        debug_assert_eq!(u.dim(), (2, 2));
        debug_assert!(q < self.n);
        let mask = 1usize << q;
        let (u00, u01) = (u[(0, 0)], u[(0, 1)]);
        let (u10, u11) = (u[(1, 0)], u[(1, 1)]);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = u00 * a + u01 * b;
                self.amps[j] = u10 * a + u11 * b;
            }
        }
    }

    /// Apply a 4x4 unitary whose index bit 0 is wired to `q_low` and
    /// bit 1 to `q_high` (the `U4 { q, q2 }` convention with `q` low).
    pub fn apply_2q(&mut self, u: &CMat, q_low: usize, q_high: usize) {
        debug_assert_eq!(u.dim(), (4, 4));
        debug_assert!(q_low < self.n && q_high < self.n && q_low != q_high);
        let ml = 1usize << q_low;
        let mh = 1usize << q_high;
        for i in 0..self.amps.len() {
            if i & ml == 0 && i & mh == 0 {
                let idx = [i, i | ml, i | mh, i | ml | mh];
                let v = [
                    self.amps[idx[0]],
                    self.amps[idx[1]],
                    self.amps[idx[2]],
                    self.amps[idx[3]],
                ];
                for (r, &target) in idx.iter().enumerate() {
                    self.amps[target] =
                        u[(r, 0)] * v[0] + u[(r, 1)] * v[1] + u[(r, 2)] * v[2] + u[(r, 3)] * v[3];
                }
            }
        }
    }

    /// Apply a Pauli (0 = I, 1 = X, 2 = Y, 3 = Z) to qubit `q` without
    /// building the matrix.
    pub fn apply_pauli(&mut self, which: u8, q: usize) {
        let mask = 1usize << q;
        match which {
            0 => {}
            1 => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            2 => {
                let im = C64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let j = i | mask;
                        let a = self.amps[i];
                        let b = self.amps[j];
                        self.amps[i] = -im * b;
                        self.amps[j] = im * a;
                    }
                }
            }
            3 => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            _ => unreachable!("Pauli index is 0..4"),
        }
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: usize) -> f64 {
        let mask = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Project qubit `q` onto `bit` and renormalize. The outcome must
    /// have nonzero probability.
    pub fn project(&mut self, q: usize, bit: u8) {
        let mask = 1usize << q;
        let keep = if bit == 1 { mask } else { 0 };
        let mut norm = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == keep {
                norm += a.norm_sqr();
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        debug_assert!(norm > 0.0, "projection onto a zero-probability outcome");
        let scale = 1.0 / norm.sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
    }

    /// Basis-state probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Evolve a measurement-free circuit (unitary ops only, unconditioned)
/// from |0...0> — the ideal reference for heavy-output bookkeeping.
pub fn ideal_statevector(c: &Circuit) -> Result<StateVector> {
    validate_circuit(c)?;
    check_dimension(c.n_qubits)?;
    let mut sv = StateVector::zero_state(c.n_qubits)?;
    for g in &c.ops {
        match g {
            Gate::Rz { q, theta } => sv.apply_1q(&rz(*theta), *q),
            Gate::Rxy { q, theta, phi } => sv.apply_1q(&rxy(*theta, *phi), *q),
            Gate::Zz { q, q2 } => sv.apply_2q(&u_zz(), *q, *q2),
            Gate::U2 { q, matrix } => sv.apply_1q(matrix, *q),
            Gate::U4 { q, q2, matrix } => sv.apply_2q(matrix, *q, *q2),
            other => {
                return Err(Error::Sim(format!(
                    "ideal_statevector requires a unitary circuit, found {other:?}"
                )))
            }
        }
    }
    Ok(sv)
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// A density matrix on `n` qubits, stored as the flat vector of a
/// doubled register: element (r, c) lives at index `r << n | c`, so row
/// bit `q` is global bit `q + n` and column bit `q` is global bit `q`.
/// Unitaries and Kraus operators then reuse the statevector kernels:
/// U·rho·U-dagger is `u` on the row bits and `conj(u)` on the column
/// bits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub n: usize,
    sv: StateVector,
}

impl DensityMatrix {
    /// |0..0><0..0|.
    pub fn zero_state(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let sv = StateVector::zero_state(2 * n)?;
        Ok(DensityMatrix { n, sv })
    }

    pub fn trace(&self) -> f64 {
        let dim = 1usize << self.n;
        (0..dim).map(|r| self.sv.amps[r << self.n | r].re).sum()
    }

    /// Diagonal in the computational basis (outcome probabilities).
    pub fn diag_probs(&self) -> Vec<f64> {
        let dim = 1usize << self.n;
        (0..dim).map(|r| self.sv.amps[r << self.n | r].re).collect()
    }

    pub fn apply_unitary_1q(&mut self, u: &CMat, q: usize) {
        self.sv.apply_1q(u, q + self.n);
        let uc = u.mapv(|x| x.conj());
        self.sv.apply_1q(&uc, q);
    }

    pub fn apply_unitary_2q(&mut self, u: &CMat, q_low: usize, q_high: usize) {
        self.sv.apply_2q(u, q_low + self.n, q_high + self.n);
        let uc = u.mapv(|x| x.conj());
        self.sv.apply_2q(&uc, q_low, q_high);
    }

    fn conjugate_pauli(&mut self, which: u8, q: usize) {
        self.sv.apply_pauli(which, q + self.n);
        // The column side takes the elementwise conjugate: X and Z are
        // real, but conj(Y) = -Y, so a Y picks up a global minus sign.
        self.sv.apply_pauli(which, q);
        if which == 2 {
            for a in &mut self.sv.amps {
                *a = -*a;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for a in &mut self.sv.amps {
            *a *= s;
        }
    }

    fn add_scaled(&mut self, other: &DensityMatrix, s: f64) {
        for (a, b) in self.sv.amps.iter_mut().zip(&other.sv.amps) {
            *a += b * s;
        }
    }

    /// Depolarizing channel on one qubit with channel probability `p`:
    /// with probability p the qubit is replaced by the maximally mixed
    /// state (equivalently, a uniformly random Pauli including I).
    pub fn depolarize_1q(&mut self, q: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let base = self.clone();
        self.scale(1.0 - 0.75 * p);
        for which in 1..4u8 {
            let mut t = base.clone();
            t.conjugate_pauli(which, q);
            self.add_scaled(&t, 0.25 * p);
        }
    }

    /// Two-qubit depolarizing channel with channel probability `p`
    /// (uniform over all sixteen Pauli pairs when it fires).
    pub fn depolarize_2q(&mut self, qa: usize, qb: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let base = self.clone();
        self.scale(1.0 - p + p / 16.0);
        for pa in 0..4u8 {
            for pb in 0..4u8 {
                if pa == 0 && pb == 0 {
                    continue;
                }
                let mut t = base.clone();
                t.conjugate_pauli(pa, qa);
                t.conjugate_pauli(pb, qb);
                self.add_scaled(&t, p / 16.0);
            }
        }
    }

    /// Pure dephasing of qubit `q`: coherences (elements whose row and
    /// column bits for `q` differ) shrink by `retain`.
    pub fn dephase(&mut self, q: usize, retain: f64) {
        if retain >= 1.0 {
            return;
        }
        let row = 1usize << (q + self.n);
        let col = 1usize << q;
        for (i, a) in self.sv.amps.iter_mut().enumerate() {
            if (i & row != 0) != (i & col != 0) {
                *a *= retain;
            }
        }
    }

    /// Probability that qubit `q` reads `bit`.
    pub fn prob(&self, q: usize, bit: u8) -> f64 {
        let dim = 1usize << self.n;
        let mask = 1usize << q;
        let want = if bit == 1 { mask } else { 0 };
        (0..dim)
            .filter(|r| r & mask == want)
            .map(|r| self.sv.amps[r << self.n | r].re)
            .sum()
    }

    /// Project qubit `q` onto `bit` without renormalizing; returns the
    /// outcome probability (the removed trace).
    pub fn project_unnormalized(&mut self, q: usize, bit: u8) -> f64 {
        let row = 1usize << (q + self.n);
        let col = 1usize << q;
        let keep_row = if bit == 1 { row } else { 0 };
        let keep_col = if bit == 1 { col } else { 0 };
        for (i, a) in self.sv.amps.iter_mut().enumerate() {
            if i & row != keep_row || i & col != keep_col {
                *a = C64::new(0.0, 0.0);
            }
        }
        self.trace()
    }

    /// Renormalize to unit trace.
    pub fn renormalize(&mut self) {
        let t = self.trace();
        debug_assert!(t > 0.0);
        self.scale(1.0 / t);
    }

    /// Reset channel: measure `q` and re-pump to |0> (project each
    /// outcome, flip the 1-branch back down, and recombine). Trace
    /// preserving and deterministic — no branching needed.
    pub fn reset(&mut self, q: usize) {
        let mut one = self.clone();
        one.project_unnormalized(q, 1);
        one.conjugate_pauli(1, q);
        self.project_unnormalized(q, 0);
        self.add_scaled(&one, 1.0);
    }

    /// Dense matrix form (tests and oracles).
    pub fn to_dense(&self) -> CMat {
        let dim = 1usize << self.n;
        let mut out = CMat::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                out[(r, c)] = self.sv.amps[r << self.n | c];
            }
        }
        out
    }

    /// Build from a dense matrix (tests and oracles).
    pub fn from_dense(m: &CMat) -> Result<Self> {
        let (rows, cols) = m.dim();
        if rows != cols || !rows.is_power_of_two() {
            return Err(Error::Sim("density matrix must be square 2^n x 2^n".into()));
        }
        let n = rows.trailing_zeros() as usize;
        check_dimension(n)?;
        let mut dm = DensityMatrix::zero_state(n)?;
        for r in 0..rows {
            for c in 0..cols {
                dm.sv.amps[r << n | c] = m[(r, c)];
            }
        }
        Ok(dm)
    }
}

// ---------------------------------------------------------------------------
// Lowered op stream
// ---------------------------------------------------------------------------

/// One executable step, shared by both engines. Unitaries carry their
/// post-gate depolarizing probability (already in channel convention)
/// and an optional classical condition.
#[derive(Debug, Clone)]
enum SimOp {
    Unitary1 {
        q: usize,
        u: CMat,
        depol: f64,
        cond: Option<(String, u8)>,
    },
    Unitary2 {
        q_low: usize,
        q_high: usize,
        u: CMat,
        depol: f64,
        cond: Option<(String, u8)>,
    },
    /// Idle memory dephasing (schedule input only).
    Dephase { q: usize, retain: f64 },
    MidMeasure {
        q: usize,
        key: String,
        flip: f64,
        /// Idle qubits that take the crosstalk dephasing.
        crosstalk: Vec<usize>,
        retain_ct: f64,
    },
    Reset { q: usize },
    /// Terminal readout; these sit at the very end of the stream.
    Terminal { q: usize, key: String, flip: f64 },
}

fn unitary_op(g: &Gate, noise: &NoiseModel, cond: Option<(String, u8)>) -> SimOp {
    match g {
        Gate::Rz { q, theta } => SimOp::Unitary1 {
            q: *q,
            u: rz(*theta),
            depol: 0.0,
            cond,
        },
        Gate::Rxy { q, theta, phi } => SimOp::Unitary1 {
            q: *q,
            u: rxy(*theta, *phi),
            depol: depolarizing_param(noise.p_sq_depol, 2),
            cond,
        },
        Gate::Zz { q, q2 } => SimOp::Unitary2 {
            q_low: *q,
            q_high: *q2,
            u: u_zz(),
            depol: depolarizing_param(noise.p_tq_depol, 4),
            cond,
        },
        Gate::U2 { q, matrix } => SimOp::Unitary1 {
            q: *q,
            u: matrix.clone(),
            depol: 0.0,
            cond,
        },
        Gate::U4 { q, q2, matrix } => SimOp::Unitary2 {
            q_low: *q,
            q_high: *q2,
            u: matrix.clone(),
            depol: 0.0,
            cond,
        },
        _ => unreachable!("callers dispatch non-unitary ops separately"),
    }
}

/// Lower a circuit: ops in program order, the trailing run of
/// measurements classified terminal, everything else in place.
fn lower_circuit(c: &Circuit, noise: &NoiseModel) -> Result<Vec<SimOp>> {
    validate_circuit(c)?;
    noise.validate().map_err(|e| Error::Sim(e.to_string()))?;
    check_dimension(c.n_qubits)?;
    let mut tail = c.ops.len();
    while tail > 0 && matches!(c.ops[tail - 1], Gate::Measure { .. }) {
        tail -= 1;
    }
    let mut ops = Vec::with_capacity(c.ops.len());
    for (i, g) in c.ops.iter().enumerate() {
        match g {
            Gate::Measure { q, key } if i >= tail => ops.push(SimOp::Terminal {
                q: *q,
                key: key.clone(),
                flip: noise.p_spam,
            }),
            Gate::Measure { q, key } => ops.push(SimOp::MidMeasure {
                q: *q,
                key: key.clone(),
                flip: noise.p_meas_lc,
                crosstalk: (0..c.n_qubits).filter(|&x| x != *q).collect(),
                retain_ct: 1.0 - noise.p_meas_crosstalk_idle,
            }),
            Gate::Reset { q } => ops.push(SimOp::Reset { q: *q }),
            Gate::Cond { on, value, apply } => {
                ops.push(unitary_op(apply, noise, Some((on.clone(), *value))));
            }
            unitary => ops.push(unitary_op(unitary, noise, None)),
        }
    }
    Ok(ops)
}

/// Lower a compiled schedule: gate, measurement, and init events in
/// start-time order, each preceded by the idle dephasing its qubits
/// accumulated since their last own event; terminal readouts collect at
/// the end of the stream (legal — nothing else touches their qubits
/// afterwards). Transport and cooling contribute idle time, not ops.
fn lower_schedule(s: &TransportSchedule, noise: &NoiseModel) -> Result<Vec<SimOp>> {
    noise.validate().map_err(|e| Error::Sim(e.to_string()))?;
    check_dimension(s.n_qubits)?;
    let rate = noise.dd_memory_multiplier / noise.t2_spin_echo_s;
    let mut last_busy = vec![0.0f64; s.n_qubits];
    let mut body = Vec::new();
    let mut terminal = Vec::new();
    for (i, ev) in s.events.iter().enumerate() {
        let quantum = matches!(
            ev.kind,
            EventKind::SqGate { .. }
                | EventKind::TqGate { .. }
                | EventKind::Measure { .. }
                | EventKind::Init { .. }
        );
        if !quantum {
            continue;
        }
        let terminal_meas = matches!(&ev.kind, EventKind::Measure { terminal: true, .. });
        let sink = if terminal_meas { &mut terminal } else { &mut body };
        for &q in &ev.qubits {
            let gap_us = ev.start_us - last_busy[q];
            last_busy[q] = ev.end_us();
            if gap_us > 0.0 && rate > 0.0 {
                let retain = (-(gap_us * 1e-6) * rate).exp();
                sink.push(SimOp::Dephase { q, retain });
            }
        }
        match &ev.kind {
            EventKind::SqGate { gate } | EventKind::TqGate { gate } => match gate {
                Gate::Cond { on, value, apply } => {
                    body.push(unitary_op(apply, noise, Some((on.clone(), *value))));
                }
                g => body.push(unitary_op(g, noise, None)),
            },
            EventKind::Measure { q, key, terminal: true } => terminal.push(SimOp::Terminal {
                q: *q,
                key: key.clone(),
                flip: noise.p_spam,
            }),
            EventKind::Measure { q, key, terminal: false } => {
                // Crosstalk hits qubits idle during the detection
                // window: everyone except the target and any qubit with
                // its own overlapping event.
                let busy_overlap = |x: usize| {
                    s.events.iter().enumerate().any(|(j, other)| {
                        j != i
                            && other.qubits.contains(&x)
                            && other.start_us < ev.end_us() - 1e-9
                            && ev.start_us < other.end_us() - 1e-9
                    })
                };
                let crosstalk = (0..s.n_qubits)
                    .filter(|&x| x != *q && !busy_overlap(x))
                    .collect();
                body.push(SimOp::MidMeasure {
                    q: *q,
                    key: key.clone(),
                    flip: noise.p_meas_lc,
                    crosstalk,
                    retain_ct: 1.0 - noise.p_meas_crosstalk_idle,
                });
            }
            EventKind::Init { q } => body.push(SimOp::Reset { q: *q }),
            _ => unreachable!("non-quantum events filtered above"),
        }
    }
    body.extend(terminal);
    Ok(body)
}

fn collect_keys(ops: &[SimOp]) -> Result<Vec<String>> {
    let mut keys = Vec::new();
    for op in ops {
        match op {
            SimOp::MidMeasure { key, .. } | SimOp::Terminal { key, .. } => {
                keys.push(key.clone());
            }
            _ => {}
        }
    }
    if keys.is_empty() {
        return Err(Error::Sim("nothing is measured; no outcome distribution".into()));
    }
    keys.sort();
    keys.dedup();
    Ok(keys)
}

// ---------------------------------------------------------------------------
// Outcome distributions
// ---------------------------------------------------------------------------

/// An exact outcome distribution. `keys` lists the measurement keys in
/// sorted order; each map entry is a bitstring whose character `i` is
/// the recorded outcome of `keys[i]`, with probability as value.
/// Entries below 1e-15 are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub keys: Vec<String>,
    pub probs: BTreeMap<String, f64>,
}

impl OutcomeDistribution {
    /// Probability of a bitstring (zero if absent).
    pub fn prob(&self, bits: &str) -> f64 {
        self.probs.get(bits).copied().unwrap_or(0.0)
    }

    /// Total-variation distance to another distribution over the same
    /// keys: half the L1 difference.
    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        assert_eq!(self.keys, other.keys, "distributions use different keys");
        let mut all: Vec<&String> = self.probs.keys().chain(other.probs.keys()).collect();
        all.sort();
        all.dedup();
        0.5 * all
            .into_iter()
            .map(|b| (self.prob(b) - other.prob(b)).abs())
            .sum::<f64>()
    }
}

/// JSON form of a distribution (sorted keys, deterministic bytes).
pub fn distribution_to_json(d: &OutcomeDistribution) -> String {
    serde_json::to_string_pretty(&json!({
        "keys": d.keys,
        "probs": d.probs,
    }))
    .expect("JSON serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Exact engine (density matrix with copy-on-write branching)
// ---------------------------------------------------------------------------

struct Branch {
    weight: f64,
    records: BTreeMap<String, u8>,
    state: Rc<DensityMatrix>,
}

/// Apply `f` once per distinct state shared by `branches[sel]`, and
/// repoint every selected branch at the transformed copy. Branches
/// outside the selection keep the original state untouched.
fn apply_selected(branches: &mut [Branch], sel: &[usize], f: &dyn Fn(&mut DensityMatrix)) {
    let mut done: Vec<(*const DensityMatrix, Rc<DensityMatrix>)> = Vec::new();
    for &b in sel {
        let ptr = Rc::as_ptr(&branches[b].state);
        if let Some((_, fresh)) = done.iter().find(|(p, _)| *p == ptr) {
            branches[b].state = fresh.clone();
        } else {
            let mut dm = (*branches[b].state).clone();
            f(&mut dm);
            let fresh = Rc::new(dm);
            done.push((ptr, fresh.clone()));
            branches[b].state = fresh;
        }
    }
}

fn cond_holds(records: &BTreeMap<String, u8>, cond: &Option<(String, u8)>) -> Result<bool> {
    match cond {
        None => Ok(true),
        Some((key, value)) => match records.get(key) {
            Some(bit) => Ok(bit == value),
            None => Err(Error::Sim(format!(
                "op conditioned on key \"{key}\" before it was measured"
            ))),
        },
    }
}

const BRANCH_EPS: f64 = 1e-15;

fn exact_engine(ops: &[SimOp], n: usize) -> Result<OutcomeDistribution> {
    let keys = collect_keys(ops)?;
    let mut branches = vec![Branch {
        weight: 1.0,
        records: BTreeMap::new(),
        state: Rc::new(DensityMatrix::zero_state(n)?),
    }];
    let mut terminal_ops: Vec<(usize, String, f64)> = Vec::new();

    for op in ops {
        match op {
            SimOp::Unitary1 { q, u, depol, cond } => {
                let mut sel = Vec::new();
                for (i, b) in branches.iter().enumerate() {
                    if cond_holds(&b.records, cond)? {
                        sel.push(i);
                    }
                }
                let (q, u, depol) = (*q, u.clone(), *depol);
                apply_selected(&mut branches, &sel, &move |dm| {
                    dm.apply_unitary_1q(&u, q);
                    dm.depolarize_1q(q, depol);
                });
            }
            SimOp::Unitary2 { q_low, q_high, u, depol, cond } => {
                let mut sel = Vec::new();
                for (i, b) in branches.iter().enumerate() {
                    if cond_holds(&b.records, cond)? {
                        sel.push(i);
                    }
                }
                let (ql, qh, u, depol) = (*q_low, *q_high, u.clone(), *depol);
                apply_selected(&mut branches, &sel, &move |dm| {
                    dm.apply_unitary_2q(&u, ql, qh);
                    dm.depolarize_2q(ql, qh, depol);
                });
            }
            SimOp::Dephase { q, retain } => {
                let all: Vec<usize> = (0..branches.len()).collect();
                let (q, retain) = (*q, *retain);
                apply_selected(&mut branches, &all, &move |dm| dm.dephase(q, retain));
            }
            SimOp::MidMeasure { q, key, flip, crosstalk, retain_ct } => {
                let mut next = Vec::new();
                for b in branches {
                    let p_one = b.state.prob(*q, 1);
                    for true_bit in 0..2u8 {
                        let p_true = if true_bit == 1 { p_one } else { 1.0 - p_one };
                        if p_true < BRANCH_EPS {
                            continue;
                        }
                        let mut dm = (*b.state).clone();
                        dm.project_unnormalized(*q, true_bit);
                        dm.renormalize();
                        for &x in crosstalk {
                            dm.dephase(x, *retain_ct);
                        }
                        let state = Rc::new(dm);
                        for recorded in 0..2u8 {
                            let p_rec = if recorded == true_bit {
                                1.0 - flip
                            } else {
                                *flip
                            };
                            if p_rec < BRANCH_EPS {
                                continue;
                            }
                            let mut records = b.records.clone();
                            records.insert(key.clone(), recorded);
                            next.push(Branch {
                                weight: b.weight * p_true * p_rec,
                                records,
                                state: state.clone(),
                            });
                        }
                    }
                }
                branches = next;
            }
            SimOp::Reset { q } => {
                let all: Vec<usize> = (0..branches.len()).collect();
                let q = *q;
                apply_selected(&mut branches, &all, &move |dm| dm.reset(q));
            }
            SimOp::Terminal { q, key, flip } => {
                terminal_ops.push((*q, key.clone(), *flip));
            }
        }
    }

    // Fold each branch's terminal block: marginalize the diagonal onto
    // the measured qubits, push it through the per-qubit readout
    // confusion, and accumulate weighted bitstring probabilities.
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for b in &branches {
        total += b.weight;
        let k = terminal_ops.len();
        let mut joint = vec![0.0f64; 1 << k];
        if k == 0 {
            joint[0] = 1.0;
        } else {
            let diag = b.state.diag_probs();
            for (r, &p) in diag.iter().enumerate() {
                let mut idx = 0usize;
                for (pos, (q, _, _)) in terminal_ops.iter().enumerate() {
                    idx |= ((r >> q) & 1) << pos;
                }
                joint[idx] += p;
            }
            for (pos, (_, _, flip)) in terminal_ops.iter().enumerate() {
                if *flip == 0.0 {
                    continue;
                }
                let mask = 1usize << pos;
                for i in 0..joint.len() {
                    if i & mask == 0 {
                        let j = i | mask;
                        let p0 = joint[i];
                        let p1 = joint[j];
                        joint[i] = (1.0 - flip) * p0 + flip * p1;
                        joint[j] = flip * p0 + (1.0 - flip) * p1;
                    }
                }
            }
        }
        for (combo, &p) in joint.iter().enumerate() {
            if p * b.weight < BRANCH_EPS {
                continue;
            }
            let mut bits: BTreeMap<&str, u8> = b
                .records
                .iter()
                .map(|(key, &v)| (key.as_str(), v))
                .collect();
            for (pos, (_, key, _)) in terminal_ops.iter().enumerate() {
                bits.insert(key, ((combo >> pos) & 1) as u8);
            }
            let bitstring: String = keys
                .iter()
                .map(|key| if bits[key.as_str()] == 1 { '1' } else { '0' })
                .collect();
            *probs.entry(bitstring).or_insert(0.0) += b.weight * p;
        }
    }
    debug_assert!((total - 1.0).abs() < 1e-9, "branch weights sum to {total}");
    // Renormalize away the dust lost to pruned branches.
    let norm: f64 = probs.values().sum();
    if norm > 0.0 {
        for v in probs.values_mut() {
            *v /= norm;
        }
    }
    probs.retain(|_, v| *v > BRANCH_EPS);
    Ok(OutcomeDistribution { keys, probs })
}

/// Exact outcome distribution of a circuit under the noise model.
/// Gate noise and measurement errors apply as documented at module
/// level; with no schedule there is no timing, so idle dephasing does
/// not arise.
pub fn run_exact(c: &Circuit, noise: &NoiseModel) -> Result<OutcomeDistribution> {
    let ops = lower_circuit(c, noise)?;
    exact_engine(&ops, c.n_qubits)
}

/// Exact outcome distribution of a compiled schedule, including idle
/// dephasing from the event timing.
pub fn run_exact_schedule(
    s: &TransportSchedule,
    noise: &NoiseModel,
) -> Result<OutcomeDistribution> {
    let ops = lower_schedule(s, noise)?;
    exact_engine(&ops, s.n_qubits)
}

// ---------------------------------------------------------------------------
// Shot sampling
// ---------------------------------------------------------------------------

/// One accepted shot: recorded bits per key, the wall-clock time the
/// schedule says it took (zero for bare circuits), and the derived seed
/// it ran under. Scrubbed attempts are counted, not listed — a scrub
/// discards the shot's data, so a scrubbed record would carry nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub outcomes: BTreeMap<String, u8>,
    pub scrubbed: bool,
    pub wall_time_us: f64,
    pub seed: u64,
}

/// The result of a shot run: exactly the requested number of unscrubbed
/// records, plus how many attempts that took and how many were
/// scrubbed (`attempts = records + n_scrubbed`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShotBatch {
    pub records: Vec<ShotRecord>,
    pub attempts: usize,
    pub n_scrubbed: usize,
}

/// Sampling knobs. `force_trajectories` disables the exact-sampling
/// fast path so every shot runs as a full stochastic trajectory (used
/// by the channel-consistency checks; the default picks automatically).
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub force_trajectories: bool,
}

/// JSON form of a shot batch (deterministic bytes).
pub fn shots_to_json(batch: &ShotBatch) -> String {
    let records: Vec<_> = batch
        .records
        .iter()
        .map(|r| {
            json!({
                "outcomes": r.outcomes,
                "scrubbed": r.scrubbed,
                "wall_time_us": r.wall_time_us,
                "seed": r.seed,
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({
        "attempts": batch.attempts,
        "n_scrubbed": batch.n_scrubbed,
        "records": records,
    }))
    .expect("JSON serialization cannot fail")
}

/// Sample shots from a circuit. Identical inputs and seed give
/// byte-identical batches, independent of thread count.
pub fn run_shots(
    c: &Circuit,
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotBatch> {
    run_shots_opts(c, noise, n_shots, seed, SimOptions::default())
}

/// [`run_shots`] with explicit sampling options.
pub fn run_shots_opts(
    c: &Circuit,
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<ShotBatch> {
    let ops = lower_circuit(c, noise)?;
    shots_engine(&ops, c.n_qubits, 0.0, noise, n_shots, seed, opts)
}

/// Sample shots from a compiled schedule (idle dephasing included;
/// records carry the schedule's wall time).
pub fn run_shots_schedule(
    s: &TransportSchedule,
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotBatch> {
    run_shots_schedule_opts(s, noise, n_shots, seed, SimOptions::default())
}

/// [`run_shots_schedule`] with explicit sampling options.
pub fn run_shots_schedule_opts(
    s: &TransportSchedule,
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<ShotBatch> {
    let ops = lower_schedule(s, noise)?;
    shots_engine(&ops, s.n_qubits, s.wall_time_us(), noise, n_shots, seed, opts)
}

/// A stream is branch-free when no op depends on a classical record or
/// collapses state mid-run; then one exact distribution plus
/// multinomial sampling reproduces trajectory statistics exactly.
fn branch_free(ops: &[SimOp]) -> bool {
    ops.iter().all(|op| match op {
        SimOp::MidMeasure { .. } | SimOp::Reset { .. } => false,
        SimOp::Unitary1 { cond, .. } | SimOp::Unitary2 { cond, .. } => cond.is_none(),
        SimOp::Dephase { .. } | SimOp::Terminal { .. } => true,
    })
}

fn shots_engine(
    ops: &[SimOp],
    n: usize,
    wall_time_us: f64,
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<ShotBatch> {
    collect_keys(ops)?;
    if noise.p_scrub_per_shot >= 1.0 {
        return Err(Error::Sim("p_scrub_per_shot = 1 never yields a record".into()));
    }
    if !opts.force_trajectories && branch_free(ops) {
        let dist = exact_engine(ops, n)?;
        return Ok(sample_from_distribution(
            &dist,
            wall_time_us,
            noise.p_scrub_per_shot,
            n_shots,
            seed,
        ));
    }

    let p_scrub = noise.p_scrub_per_shot;
    let mut records: Vec<ShotRecord> = Vec::with_capacity(n_shots);
    let mut attempts = 0usize;
    let mut n_scrubbed = 0usize;
    let mut next_attempt = 0u64;
    while records.len() < n_shots {
        let need = n_shots - records.len();
        let batch = if p_scrub > 0.0 {
            ((need as f64 / (1.0 - p_scrub)) * 1.2).ceil() as u64 + 8
        } else {
            need as u64
        };
        let results: Vec<Option<ShotRecord>> = (next_attempt..next_attempt + batch)
            .into_par_iter()
            .map(|attempt| one_trajectory(ops, n, wall_time_us, p_scrub, seed, attempt))
            .collect::<Result<Vec<_>>>()?;
        next_attempt += batch;
        // Consume strictly in attempt order so the outcome is identical
        // to a sequential run; surplus attempts are discarded unseen.
        for r in results {
            if records.len() == n_shots {
                break;
            }
            attempts += 1;
            match r {
                Some(rec) => records.push(rec),
                None => n_scrubbed += 1,
            }
        }
    }
    Ok(ShotBatch { records, attempts, n_scrubbed })
}

/// Fast path: draw bitstrings from the exact distribution. The
/// per-attempt RNG draws scrub first, then the outcome, mirroring the
/// trajectory path's structure.
fn sample_from_distribution(
    dist: &OutcomeDistribution,
    wall_time_us: f64,
    p_scrub: f64,
    n_shots: usize,
    seed: u64,
) -> ShotBatch {
    let entries: Vec<(&String, f64)> = dist.probs.iter().map(|(k, &v)| (k, v)).collect();
    let mut cumulative = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for (_, p) in &entries {
        acc += p;
        cumulative.push(acc);
    }
    let mut records = Vec::with_capacity(n_shots);
    let mut attempts = 0usize;
    let mut n_scrubbed = 0usize;
    let mut attempt = 0u64;
    while records.len() < n_shots {
        let shot_seed = derive_seed(seed, "shot", attempt);
        let mut rng = rng_for(seed, "shot", attempt);
        attempt += 1;
        attempts += 1;
        if p_scrub > 0.0 && rng.random::<f64>() < p_scrub {
            n_scrubbed += 1;
            continue;
        }
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c < u).min(entries.len() - 1);
        let bits = entries[idx].0;
        let outcomes: BTreeMap<String, u8> = dist
            .keys
            .iter()
            .zip(bits.chars())
            .map(|(k, ch)| (k.clone(), if ch == '1' { 1 } else { 0 }))
            .collect();
        records.push(ShotRecord {
            outcomes,
            scrubbed: false,
            wall_time_us,
            seed: shot_seed,
        });
    }
    ShotBatch { records, attempts, n_scrubbed }
}

/// Run one stochastic trajectory; `None` means the attempt scrubbed.
fn one_trajectory(
    ops: &[SimOp],
    n: usize,
    wall_time_us: f64,
    p_scrub: f64,
    seed: u64,
    attempt: u64,
) -> Result<Option<ShotRecord>> {
    let shot_seed = derive_seed(seed, "shot", attempt);
    let mut rng = rng_for(seed, "shot", attempt);
    if p_scrub > 0.0 && rng.random::<f64>() < p_scrub {
        return Ok(None);
    }
    let mut sv = StateVector::zero_state(n)?;
    let mut records: BTreeMap<String, u8> = BTreeMap::new();
    for op in ops {
        match op {
            SimOp::Unitary1 { q, u, depol, cond } => {
                if cond_holds(&records, cond)? {
                    sv.apply_1q(u, *q);
                    if *depol > 0.0 && rng.random::<f64>() < *depol {
                        sv.apply_pauli(rng.random_range(0..4u8), *q);
                    }
                }
            }
            SimOp::Unitary2 { q_low, q_high, u, depol, cond } => {
                if cond_holds(&records, cond)? {
                    sv.apply_2q(u, *q_low, *q_high);
                    if *depol > 0.0 && rng.random::<f64>() < *depol {
                        let pair = rng.random_range(0..16u8);
                        sv.apply_pauli(pair & 3, *q_low);
                        sv.apply_pauli(pair >> 2, *q_high);
                    }
                }
            }
            SimOp::Dephase { q, retain } => {
                // Unraveling of the dephasing channel: a Z kick with
                // probability (1 - retain)/2 reproduces the coherence
                // factor in expectation.
                let p_z = 0.5 * (1.0 - retain);
                if p_z > 0.0 && rng.random::<f64>() < p_z {
                    sv.apply_pauli(3, *q);
                }
            }
            SimOp::MidMeasure { q, key, flip, crosstalk, retain_ct } => {
                let bit = measure_qubit(&mut sv, *q, &mut rng);
                let recorded = if *flip > 0.0 && rng.random::<f64>() < *flip {
                    bit ^ 1
                } else {
                    bit
                };
                records.insert(key.clone(), recorded);
                let p_z = 0.5 * (1.0 - retain_ct);
                for &x in crosstalk {
                    if p_z > 0.0 && rng.random::<f64>() < p_z {
                        sv.apply_pauli(3, x);
                    }
                }
            }
            SimOp::Reset { q } => {
                let bit = measure_qubit(&mut sv, *q, &mut rng);
                if bit == 1 {
                    sv.apply_pauli(1, *q);
                }
            }
            SimOp::Terminal { q, key, flip } => {
                let bit = measure_qubit(&mut sv, *q, &mut rng);
                let recorded = if *flip > 0.0 && rng.random::<f64>() < *flip {
                    bit ^ 1
                } else {
                    bit
                };
                records.insert(key.clone(), recorded);
            }
        }
    }
    Ok(Some(ShotRecord {
        outcomes: records,
        scrubbed: false,
        wall_time_us,
        seed: shot_seed,
    }))
}

fn measure_qubit(sv: &mut StateVector, q: usize, rng: &mut ChaCha8Rng) -> u8 {
    let p_one = sv.prob_one(q);
    let bit = if rng.random::<f64>() < p_one { 1 } else { 0 };
    sv.project(q, bit);
    bit
}

/// Projective Z-basis measurement of one qubit mid-circuit: the state
/// collapses on the true outcome, the recorded bit flips with the
/// low-crosstalk readout error, and every other qubit takes the
/// crosstalk dephasing kick. Returns the recorded bit.
pub fn mid_measure(
    sv: &mut StateVector,
    q: usize,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<u8> {
    if q >= sv.n {
        return Err(Error::Sim(format!("qubit {q} out of range for n={}", sv.n)));
    }
    let bit = measure_qubit(sv, q, rng);
    let recorded = if noise.p_meas_lc > 0.0 && rng.random::<f64>() < noise.p_meas_lc {
        bit ^ 1
    } else {
        bit
    };
    let p_z = 0.5 * noise.p_meas_crosstalk_idle;
    for x in (0..sv.n).filter(|&x| x != q) {
        if p_z > 0.0 && rng.random::<f64>() < p_z {
            sv.apply_pauli(3, x);
        }
    }
    Ok(recorded)
}

/// Build the empirical distribution of a batch over the given keys
/// (the same bitstring convention as [`OutcomeDistribution`]).
pub fn empirical_distribution(batch: &ShotBatch, keys: &[String]) -> OutcomeDistribution {
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    let weight = 1.0 / batch.records.len().max(1) as f64;
    for r in &batch.records {
        let bits: String = keys
            .iter()
            .map(|k| if r.outcomes.get(k) == Some(&1) { '1' } else { '0' })
            .collect();
        *probs.entry(bits).or_insert(0.0) += weight;
    }
    OutcomeDistribution { keys: keys.to_vec(), probs }
}
