//! Randomized benchmarking: sequence generation, decay fitting with
//! bootstrap uncertainties, and the run harness.
//!
//! A sequence of `l` uniform Cliffords is closed by its exact group
//! inverse (resynthesized natively) and a uniformly random Pauli on each
//! qubit. The Pauli randomizes the ideal outcome over the computational
//! basis, which pins the decay asymptote at B = 1/2 for the parity
//! survival used here; analysis de-randomizes each shot against the
//! expected bit pattern recorded in the circuit metadata.
//!
//! Survival is fitted to `p(l) = A alpha^l + B` with B fixed, and
//! `sigma_alpha` comes from a nonparametric bootstrap over sequences.
//!
//! # The alpha <-> r convention
//!
//! With a depolarizing parameter `r` (average infidelity) attached to
//! every ZZ entangler, a uniformly random two-qubit Clifford applies its
//! class's ZZ cost `k` in {0, 1, 2, 3}, each contributing a factor
//! `(1 - p)` with `p = depolarizing_param(r, 4)` to every nontrivial
//! Pauli expectation. Because depolarizing channels are unitarily
//! covariant, the expected survival is exactly
//!
//! ```text
//!   E p(l) = 1/2 + A * alpha^l,   alpha = E[(1 - p)^k]
//! ```
//!
//! with the class distribution (576, 5184, 5184, 576)/11520 over
//! k = (0, 1, 2, 3). [`alpha_from_tq_rate`] and [`tq_rate_from_alpha`]
//! implement this map and its inverse; the closed-loop tests pin the
//! convention against the simulator.

use crate::circuit::Circuit;
use crate::machine::{depolarizing_param, NoiseModel};
use crate::math::{dagger, CMat};
use crate::rng::{derive_seed, rng_for};
use crate::sim::run_shots;
use crate::synth::{synth_su2, synth_su4};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use super::clifford::{clifford_from_index, C1_SIZE, C2_CLASS_SIZES, C2_CLASS_ZZ, C2_SIZE};
use super::ZZ_PER_CLIFFORD;

/// Metadata key: expected measurement bits (one char per qubit, `'0'` or
/// `'1'`), i.e. the ideal noise-free outcome after the final Pauli.
pub const META_EXPECTED: &str = "rb_expected";
/// Metadata key: total native ZZ count of the sequence, inversion included.
pub const META_ZZ: &str = "rb_zz";
/// Metadata keys: per-pair ZZ counts for the simultaneous variant.
pub const META_ZZ_P1: &str = "rb_zz_p1";
pub const META_ZZ_P2: &str = "rb_zz_p2";
/// Metadata key: number of injected correlated-dephasing kicks (kicked
/// simultaneous variant only).
pub const META_KICKS: &str = "rb_kicks";

// ---------------------------------------------------------------------------
// Decay fitting
// ---------------------------------------------------------------------------

/// An exponential-decay fit `p(l) = A alpha^l + B` with B held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub alpha: f64,
    /// The fixed asymptote the fit was run with.
    pub b: f64,
    /// Bootstrap standard error of `alpha` (0 when every resample is
    /// identical, e.g. single-sequence data).
    pub sigma_alpha: f64,
}

/// Point fit of `means(l) = a * alpha^l + b` (b fixed) by log-linear
/// initialization plus Nelder-Mead polish. Exact data fits exactly: the
/// initializer already lands on the optimum.
pub(crate) fn fit_point(lengths: &[f64], means: &[f64], b: f64) -> (f64, f64) {
    let ys: Vec<f64> = means.iter().map(|m| m - b).collect();
    let (mut a0, mut alpha0) = (0.5f64, 0.9f64);
    let pos: Vec<(f64, f64)> = lengths
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| y > 1e-12)
        .map(|(&l, &y)| (l, y.ln()))
        .collect();
    if pos.len() >= 2 {
        let n = pos.len() as f64;
        let ml = pos.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pos.iter().map(|p| (p.0 - ml) * (p.1 - my)).sum();
        let den: f64 = pos.iter().map(|p| (p.0 - ml) * (p.0 - ml)).sum();
        if den > 0.0 {
            let slope = num / den;
            alpha0 = slope.exp().clamp(1e-3, 1.2);
            a0 = (my - slope * ml).exp().clamp(1e-6, 2.0);
        }
    }
    let obj = |x: &[f64]| -> f64 {
        let (a, alpha) = (x[0], x[1]);
        if !alpha.is_finite() || !a.is_finite() || alpha <= 0.0 || alpha > 1.5 {
            return 1e12;
        }
        lengths
            .iter()
            .zip(&ys)
            .map(|(&l, &y)| {
                let r = y - a * alpha.powf(l);
                r * r
            })
            .sum()
    };
    let res = crate::math::nelder_mead(obj, &[a0, alpha0], 0.05, 4000, 1e-18);
    (res.x[0], res.x[1])
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Fit RB survival data to `p(l) = A alpha^l + 1/2` (asymptote fixed by
/// the final-Pauli randomization). `survivals[i]` holds the per-sequence
/// survival fractions at `lengths[i]`; `sigma_alpha` comes from a
/// nonparametric bootstrap resampling sequences within each length
/// (`n_boot >= 200`).
pub fn fit_decay(lengths: &[usize], survivals: &[Vec<f64>], n_boot: usize) -> Result<DecayFit> {
    fit_decay_with_asymptote(lengths, survivals, 0.5, n_boot)
}

/// [`fit_decay`] with an explicit fixed asymptote (0 for Pauli-observable
/// decays, 1/2 for survival probabilities).
pub fn fit_decay_with_asymptote(
    lengths: &[usize],
    survivals: &[Vec<f64>],
    b: f64,
    n_boot: usize,
) -> Result<DecayFit> {
    if lengths.len() < 3 {
        return Err(Error::Bench(format!(
            "decay fit needs at least 3 distinct lengths, got {}",
            lengths.len()
        )));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != lengths.len() {
        return Err(Error::Bench("decay fit lengths must be distinct".into()));
    }
    if survivals.len() != lengths.len() {
        return Err(Error::Bench(format!(
            "got {} survival rows for {} lengths",
            survivals.len(),
            lengths.len()
        )));
    }
    if n_boot < 200 {
        return Err(Error::Bench(format!(
            "bootstrap needs n_boot >= 200, got {n_boot}"
        )));
    }
    let mut first: Option<f64> = None;
    for (i, row) in survivals.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::Bench(format!("no survival data at length index {i}")));
        }
        for &v in row {
            if !v.is_finite() {
                return Err(Error::Bench("non-finite survival value".into()));
            }
            match first {
                None => first = Some(v),
                Some(f) => {
                    if (v - f).abs() > 1e-12 {
                        first = Some(f64::NAN); // marks "not all equal"
                    }
                }
            }
        }
    }
    if let Some(f) = first {
        if f.is_finite() {
            return Err(Error::Bench(
                "degenerate decay data: all survivals equal, alpha is unidentifiable".into(),
            ));
        }
    }

    let lf: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let means: Vec<f64> = survivals
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let (a, alpha) = fit_point(&lf, &means, b);

    // Nonparametric bootstrap over sequences, independently per length
    // (sequences are drawn independently at each length). The resample
    // stream is fixed so identical inputs give identical uncertainties.
    let mut rng = rng_for(0xDECA_F17, "decay-bootstrap", n_boot as u64);
    let mut alphas = Vec::with_capacity(n_boot);
    let mut boot_means = vec![0.0f64; lengths.len()];
    for _ in 0..n_boot {
        for (i, row) in survivals.iter().enumerate() {
            let mut acc = 0.0;
            for _ in 0..row.len() {
                acc += row[rng.random_range(0..row.len())];
            }
            boot_means[i] = acc / row.len() as f64;
        }
        alphas.push(fit_point(&lf, &boot_means, b).1);
    }
    Ok(DecayFit {
        a,
        alpha,
        b,
        sigma_alpha: sample_std(&alphas),
    })
}

// ---------------------------------------------------------------------------
// The alpha <-> r convention
// ---------------------------------------------------------------------------

/// Expected RB decay rate under a per-ZZ depolarizing parameter `r`
/// (average infidelity, as in [`NoiseModel::p_tq_depol`]):
/// `alpha = sum_k w_k (1-p)^k` over the entangling-class ZZ costs with
/// `p = depolarizing_param(r, 4)`.
pub fn alpha_from_tq_rate(r: f64) -> f64 {
    let p = depolarizing_param(r, 4);
    let q = 1.0 - p;
    C2_CLASS_SIZES
        .iter()
        .zip(&C2_CLASS_ZZ)
        .map(|(&w, &k)| w as f64 * q.powi(k as i32))
        .sum::<f64>()
        / C2_SIZE as f64
}

/// Inverse of [`alpha_from_tq_rate`] by bisection. Defined for alpha in
/// (alpha_min, 1] where alpha_min = 0.05 corresponds to a fully
/// depolarizing entangler.
pub fn tq_rate_from_alpha(alpha: f64) -> Result<f64> {
    const R_MAX: f64 = 0.75; // p = 1: fully depolarizing ZZ
    let alpha_min = alpha_from_tq_rate(R_MAX);
    if !(alpha > alpha_min && alpha <= 1.0 + 1e-12) {
        return Err(Error::Bench(format!(
            "alpha {alpha} outside invertible range ({alpha_min}, 1]"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, R_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alpha_from_tq_rate(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Paper-style reported error per entangler: the Clifford average-gate
/// infidelity `(3/4)(1 - alpha)` scaled by the mean 1.5 ZZ per Clifford.
/// Agrees with [`tq_rate_from_alpha`] to first order in the error rate.
pub fn rb_error_per_zz(alpha: f64) -> f64 {
    0.75 * (1.0 - alpha) / ZZ_PER_CLIFFORD
}

// ---------------------------------------------------------------------------
// Sequence generation
// ---------------------------------------------------------------------------

fn push_final_pauli(circ: &mut Circuit, q: usize, which: u8) -> char {
    match which {
        0 => '0', // identity
        1 => {
            circ.rxy(q, PI, 0.0); // X
            '1'
        }
        2 => {
            circ.rxy(q, PI, FRAC_PI_2); // Y
            '1'
        }
        _ => {
            circ.rz(q, PI); // Z
            '0'
        }
    }
}

/// Generate one RB circuit on `n` in {1, 2} qubits: `length` uniform
/// Cliffords, the exact inverse of their product (native synthesis), a
/// uniform random Pauli per qubit, and terminal measurements `m0..`.
/// Metadata records the expected bits ([`META_EXPECTED`]) and the total
/// ZZ count including the inversion ([`META_ZZ`]).
pub fn gen_rb(n: usize, length: usize, seed: u64) -> Result<Circuit> {
    gen_rb_impl(n, length, seed, None)
}

/// [`gen_rb`] with a per-layer dephasing kick: after each Clifford, with
/// probability `kick_prob`, insert `Rz(pi)` on qubit 0 (a Z error that is
/// not part of the inverted sequence). Used by the crosstalk suite to
/// model the marginal of a correlated dephasing process.
pub(crate) fn gen_rb_kicked(n: usize, length: usize, seed: u64, kick_prob: f64) -> Result<Circuit> {
    gen_rb_impl(n, length, seed, Some(kick_prob))
}

fn gen_rb_impl(n: usize, length: usize, seed: u64, kick: Option<f64>) -> Result<Circuit> {
    let size = match n {
        1 => C1_SIZE,
        2 => C2_SIZE,
        _ => {
            return Err(Error::Bench(format!(
                "RB supports n in {{1, 2}} qubits per sequence, got {n}"
            )))
        }
    };
    if length == 0 {
        return Err(Error::Validate("RB sequence length must be >= 1".into()));
    }
    let mut rng = rng_for(seed, "rb-seq", n as u64);
    let mut circ = Circuit::new(n);
    let mut composed = CMat::eye(1 << n);
    let mut zz = 0usize;
    let mut kicks = 0usize;
    for _ in 0..length {
        let s = clifford_from_index(n, rng.random_range(0..size))?;
        circ.ops.extend(s.ops.iter().cloned());
        composed = s.unitary.dot(&composed);
        zz += s.zz;
        if let Some(q) = kick {
            if rng.random::<f64>() < q {
                circ.rz(0, PI);
                kicks += 1;
            }
        }
    }
    let inv = dagger(&composed);
    match n {
        1 => circ.ops.extend(synth_su2(&inv)?.ops),
        _ => {
            let seq = synth_su4(&inv)?;
            zz += seq.zz_count();
            circ.ops.extend(seq.ops);
        }
    }
    let mut expected = String::with_capacity(n);
    for q in 0..n {
        let which: u8 = rng.random_range(0..4);
        expected.push(push_final_pauli(&mut circ, q, which));
    }
    for q in 0..n {
        circ.measure(q, &format!("m{q}"));
    }
    circ.metadata.insert(META_EXPECTED.into(), expected);
    circ.metadata.insert(META_ZZ.into(), zz.to_string());
    if kick.is_some() {
        circ.metadata.insert(META_KICKS.into(), kicks.to_string());
    }
    Ok(circ)
}

/// Generate a simultaneous RB circuit: independent two-qubit sequences on
/// pairs (0,1) and (2,3) of a 4-qubit register, each closed by its own
/// inversion and final Paulis. Metadata records expected bits for all
/// four qubits and per-pair ZZ counts.
pub fn gen_rb_simultaneous(length: usize, seed: u64) -> Result<Circuit> {
    gen_rb_simultaneous_impl(length, seed, None)
}

/// [`gen_rb_simultaneous`] with injected correlated dephasing: after each
/// layer, with probability `kick_prob`, insert `Rz(pi)` on qubit 0 *and*
/// qubit 2 simultaneously — a correlated Z(x)Z error across the pairs
/// that single-pair statistics cannot see but the cross-observable
/// deltas can.
pub fn gen_rb_simultaneous_kicked(length: usize, seed: u64, kick_prob: f64) -> Result<Circuit> {
    gen_rb_simultaneous_impl(length, seed, Some(kick_prob))
}

fn gen_rb_simultaneous_impl(length: usize, seed: u64, kick: Option<f64>) -> Result<Circuit> {
    if length == 0 {
        return Err(Error::Validate("RB sequence length must be >= 1".into()));
    }
    let pairs = [(0usize, 1usize), (2usize, 3usize)];
    let mut rng = rng_for(seed, "rb-sim", 0);
    let mut circ = Circuit::new(4);
    let mut composed = [CMat::eye(4), CMat::eye(4)];
    let mut zz = [0usize; 2];
    let mut kicks = 0usize;
    for _ in 0..length {
        for (z, &(qa, qb)) in pairs.iter().enumerate() {
            let s = clifford_from_index(2, rng.random_range(0..C2_SIZE))?;
            circ.ops.extend(s.ops_on(qa, qb));
            composed[z] = s.unitary.dot(&composed[z]);
            zz[z] += s.zz;
        }
        if let Some(q) = kick {
            if rng.random::<f64>() < q {
                circ.rz(0, PI);
                circ.rz(2, PI);
                kicks += 1;
            }
        }
    }
    for (z, &(qa, qb)) in pairs.iter().enumerate() {
        let seq = synth_su4(&dagger(&composed[z]))?;
        zz[z] += seq.zz_count();
        circ.ops.extend(seq.ops_on(qa, qb));
    }
    let mut expected = String::with_capacity(4);
    for q in 0..4 {
        let which: u8 = rng.random_range(0..4);
        expected.push(push_final_pauli(&mut circ, q, which));
    }
    for q in 0..4 {
        circ.measure(q, &format!("m{q}"));
    }
    circ.metadata.insert(META_EXPECTED.into(), expected);
    circ.metadata.insert(META_ZZ_P1.into(), zz[0].to_string());
    circ.metadata.insert(META_ZZ_P2.into(), zz[1].to_string());
    circ.metadata
        .insert(META_ZZ.into(), (zz[0] + zz[1]).to_string());
    if kick.is_some() {
        circ.metadata.insert(META_KICKS.into(), kicks.to_string());
    }
    Ok(circ)
}

/// Parse the expected-bit pattern an RB generator stored in metadata.
pub(crate) fn expected_bits(c: &Circuit) -> Result<Vec<u8>> {
    let s = c
        .metadata
        .get(META_EXPECTED)
        .ok_or_else(|| Error::Bench("circuit lacks RB expected-bit metadata".into()))?;
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            _ => Err(Error::Bench(format!("bad expected-bit char '{ch}'"))),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Run harness
// ---------------------------------------------------------------------------

/// Result of an RB run: per-length survival data, the fixed-asymptote
/// decay fit, and (for the simultaneous variant) per-observable decays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbResult {
    /// Qubits per sequence (1 or 2; 4 for the simultaneous variant).
    pub n: usize,
    pub lengths: Vec<usize>,
    /// Mean survival per length.
    pub survival_mean: Vec<f64>,
    /// Per-length, per-sequence survival fractions.
    pub survivals: Vec<Vec<f64>>,
    /// Per-length, per-sequence total ZZ counts (inversion included).
    pub zz_counts: Vec<Vec<usize>>,
    /// Fit of the parity survival, asymptote fixed at 1/2.
    pub fit: DecayFit,
    /// Aligned Pauli-observable decay fits (asymptote 0), populated by
    /// the simultaneous variant. Keys pair the two-pair labels, e.g.
    /// "ZI|II" (Z on qubit 0 only) or "ZZ|ZZ" (full product).
    pub observables: BTreeMap<String, DecayFit>,
    /// Per-observable, per-length, per-sequence aligned means backing
    /// `observables` (kept for joint bootstraps downstream).
    pub observable_means: BTreeMap<String, Vec<Vec<f64>>>,
}

impl RbResult {
    /// Survival probabilities are frequencies in [0, 1].
    pub fn validate(&self) -> Result<()> {
        for row in &self.survivals {
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Bench(format!("survival {p} outside [0, 1]")));
                }
            }
        }
        if !(self.fit.alpha > 0.0 && self.fit.alpha <= 1.0 + 1e-9) {
            return Err(Error::Bench(format!(
                "fitted alpha {} outside (0, 1]",
                self.fit.alpha
            )));
        }
        Ok(())
    }
}

fn parity(bits: impl Iterator<Item = u8>) -> u8 {
    bits.fold(0, |acc, b| acc ^ (b & 1))
}

/// Run individual RB on `n` in {1, 2} qubits: `n_sequences` fresh random
/// sequences at every length, `n_shots` each, parity-survival analysis,
/// and a B = 1/2 decay fit with bootstrap uncertainty. All randomness
/// derives from `seed`.
pub fn run_rb(
    n: usize,
    lengths: &[usize],
    n_sequences: usize,
    n_shots: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<RbResult> {
    run_rb_impl(n, lengths, n_sequences, n_shots, noise, seed, None)
}

/// [`run_rb`] with the per-layer marginal dephasing kick (crosstalk suite).
pub(crate) fn run_rb_impl(
    n: usize,
    lengths: &[usize],
    n_sequences: usize,
    n_shots: usize,
    noise: &NoiseModel,
    seed: u64,
    kick: Option<f64>,
) -> Result<RbResult> {
    if n_sequences == 0 || n_shots == 0 {
        return Err(Error::Validate(
            "RB needs at least one sequence and one shot".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..lengths.len())
        .flat_map(|li| (0..n_sequences).map(move |s| (li, s)))
        .collect();
    let rows: Result<Vec<(f64, usize)>> = jobs
        .par_iter()
        .map(|&(li, s)| {
            let job = (li * n_sequences + s) as u64;
            let c = match kick {
                None => gen_rb(n, lengths[li], derive_seed(seed, "rb-gen", job))?,
                Some(q) => gen_rb_kicked(n, lengths[li], derive_seed(seed, "rb-gen", job), q)?,
            };
            let expected = expected_bits(&c)?;
            let zz: usize = c.metadata[META_ZZ]
                .parse()
                .map_err(|_| Error::Bench("bad ZZ metadata".into()))?;
            let batch = run_shots(&c, noise, n_shots, derive_seed(seed, "rb-shots", job))?;
            let want = parity(expected.iter().copied());
            let hits = batch
                .records
                .iter()
                .filter(|rec| {
                    parity((0..n).map(|q| rec.outcomes[&format!("m{q}")])) == want
                })
                .count();
            Ok((hits as f64 / batch.records.len() as f64, zz))
        })
        .collect();
    let rows = rows?;
    let mut survivals = vec![Vec::with_capacity(n_sequences); lengths.len()];
    let mut zz_counts = vec![Vec::with_capacity(n_sequences); lengths.len()];
    for (&(li, _), &(p, zz)) in jobs.iter().zip(&rows) {
        survivals[li].push(p);
        zz_counts[li].push(zz);
    }
    let fit = fit_decay(lengths, &survivals, 300)?;
    let survival_mean = survivals
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let out = RbResult {
        n,
        lengths: lengths.to_vec(),
        survival_mean,
        survivals,
        zz_counts,
        fit,
        observables: BTreeMap::new(),
        observable_means: BTreeMap::new(),
    };
    out.validate()?;
    Ok(out)
}
