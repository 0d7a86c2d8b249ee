//! Quantum-volume test circuits, sampling, and the heavy-output
//! analysis.
//!
//! A width-`N` test circuit is `N` rounds of a uniformly random qubit
//! permutation followed by Haar-random SU(4) blocks on the ⌊N/2⌋
//! adjacent pairs of the permuted order. Circuits are scored against the
//! heavy-output criterion: the heavy set of a circuit holds the outcomes
//! whose ideal probability lies strictly above the median of all `2^N`
//! ideal probabilities, and the test passes when the measured heavy
//! fraction clears 2/3 with two-sigma margin,
//!
//! ```text
//!   sigma = sqrt(h (1 - h) / (n_circuits * n_shots)),   pass <=> h - 2 sigma > 2/3
//! ```
//!
//! (pooled-binomial form). Width-4 and width-6 runs compile to transport
//! schedules on the matching machine mode and simulate with the full
//! noise model; other widths run as bare circuits. Width 6 merges
//! adjacent same-pair SU(4) blocks before synthesis — the accelerated
//! variant that compiles ~18 blocks down to ~15 (45 entanglers).

use crate::circuit::Circuit;
use crate::machine::{MachineConfig, MachineMode, NoiseModel};
use crate::rng::{derive_seed, rng_for};
use crate::schedule::{assign_ions, compile_schedule, SchedulePolicy};
use crate::sim::{
    empirical_distribution, run_exact, run_shots, run_shots_schedule, OutcomeDistribution,
};
use crate::synth::{haar_su4, synthesize_circuit, SynthOptions};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// Largest width the exact reference simulation supports in reasonable
/// time; wider requests are refused rather than silently degraded.
pub const MAX_QV_WIDTH: usize = 6;

/// Generate one quantum-volume test circuit (unitary part only, no
/// measurements): `n` rounds of shuffle-then-SU(4). Deterministic per
/// `(n, seed)`.
pub fn gen_qv_circuit(n: usize, seed: u64) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::Validate(format!(
            "quantum volume needs n >= 2 qubits, got {n}"
        )));
    }
    let mut rng = rng_for(seed, "qv-gen", n as u64);
    let mut c = Circuit::new(n);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..n {
        order.shuffle(&mut rng);
        for b in 0..n / 2 {
            let u = haar_su4(rng.random::<u64>());
            c.u4(order[2 * b], order[2 * b + 1], u);
        }
    }
    Ok(c)
}

/// Outcomes of `dist` with probability strictly above the median of all
/// `2^n` probabilities (missing outcomes count as zero). With exactly
/// uniform probabilities the strict rule makes the heavy set empty.
pub fn heavy_set(dist: &OutcomeDistribution, n: usize) -> Vec<String> {
    let total = 1usize << n;
    let all: Vec<(String, f64)> = (0..total)
        .map(|i| {
            let bits: String = (0..n)
                .map(|q| char::from(b'0' + ((i >> q) & 1) as u8))
                .collect();
            let p = dist.prob(&bits);
            (bits, p)
        })
        .collect();
    let mut sorted: Vec<f64> = all.iter().map(|&(_, p)| p).collect();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[total / 2 - 1] + sorted[total / 2]);
    all.into_iter()
        .filter(|&(_, p)| p > median)
        .map(|(b, _)| b)
        .collect()
}

/// Abramowitz & Stegun 7.1.26 rational approximation (|error| < 1.5e-7).
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = ((((1.061_405_429 * t - 1.453_152_027) * t + 1.421_413_741) * t - 0.284_496_736)
        * t
        + 0.254_829_592)
        * t;
    sign * (1.0 - poly * (-x * x).exp())
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

/// Heavy-output reduction of measured versus ideal distributions.
#[derive(Debug, Clone)]
pub struct QvAnalysis {
    /// Measured heavy fraction per circuit.
    pub heavy_fraction: Vec<f64>,
    /// Ideal probability mass of each circuit's heavy set.
    pub ideal_heavy_prob: Vec<f64>,
    /// Pooled heavy fraction over all shots.
    pub h_mean: f64,
    /// Pooled-binomial standard error of `h_mean`.
    pub sigma: f64,
    /// `h_mean - 2 sigma > 2/3`.
    pub pass: bool,
    /// One-sided normal tail of the `h_mean` estimate beyond 2/3.
    pub confidence: f64,
}

/// Score measured output distributions against their ideal counterparts.
/// `measured[i]` must be the empirical distribution of `n_shots` shots
/// of the circuit whose noiseless distribution is `ideal[i]`.
pub fn qv_analyze(
    n: usize,
    ideal: &[OutcomeDistribution],
    measured: &[OutcomeDistribution],
    n_shots: usize,
) -> Result<QvAnalysis> {
    if ideal.len() != measured.len() {
        return Err(Error::Bench(format!(
            "circuit count mismatch: {} ideal distributions vs {} measured",
            ideal.len(),
            measured.len()
        )));
    }
    if ideal.is_empty() || n_shots == 0 {
        return Err(Error::Validate(
            "heavy-output analysis needs at least one circuit and one shot".into(),
        ));
    }
    let mut heavy_fraction = Vec::with_capacity(ideal.len());
    let mut ideal_heavy_prob = Vec::with_capacity(ideal.len());
    for (id, meas) in ideal.iter().zip(measured) {
        if id.keys != meas.keys {
            return Err(Error::Bench(format!(
                "ideal and measured distributions disagree on readout keys: {:?} vs {:?}",
                id.keys, meas.keys
            )));
        }
        let heavy = heavy_set(id, n);
        heavy_fraction.push(heavy.iter().map(|b| meas.prob(b)).sum());
        ideal_heavy_prob.push(heavy.iter().map(|b| id.prob(b)).sum());
    }
    let h_mean = heavy_fraction.iter().sum::<f64>() / heavy_fraction.len() as f64;
    let pooled = (ideal.len() * n_shots) as f64;
    let sigma = (h_mean * (1.0 - h_mean) / pooled).sqrt();
    let pass = h_mean - 2.0 * sigma > 2.0 / 3.0;
    let confidence = if sigma > 0.0 {
        normal_cdf((h_mean - 2.0 / 3.0) / sigma)
    } else if h_mean > 2.0 / 3.0 {
        1.0
    } else {
        0.0
    };
    Ok(QvAnalysis {
        heavy_fraction,
        ideal_heavy_prob,
        h_mean,
        sigma,
        pass,
        confidence,
    })
}

/// Configuration of a quantum-volume run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QvConfig {
    pub n: usize,
    pub n_circuits: usize,
    pub n_shots: usize,
    /// Merge adjacent same-pair SU(4) blocks before synthesis.
    pub merge: bool,
}

impl QvConfig {
    /// Published test parameters for a width: 100 circuits x 500 shots
    /// (no merge) at width 4; the accelerated 400 x 100 merged variant
    /// at width 6; the width-4 counts otherwise.
    pub fn for_width(n: usize) -> Self {
        match n {
            6 => QvConfig {
                n,
                n_circuits: 400,
                n_shots: 100,
                merge: true,
            },
            _ => QvConfig {
                n,
                n_circuits: 100,
                n_shots: 500,
                merge: false,
            },
        }
    }
}

/// Per-circuit record of a quantum-volume run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QvCircuitRecord {
    pub index: usize,
    /// Generator seed of this circuit (derived from the run seed).
    pub circuit_seed: u64,
    /// Entangler count after synthesis (and merging, if enabled).
    pub zz_count: usize,
    pub ideal_heavy_prob: f64,
    pub heavy_fraction: f64,
}

/// Quantum-volume run outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QvResult {
    pub n: usize,
    pub n_circuits: usize,
    pub n_shots: usize,
    pub merge: bool,
    pub records: Vec<QvCircuitRecord>,
    pub h_mean: f64,
    pub sigma: f64,
    pub pass: bool,
    pub confidence: f64,
    /// Mean ideal heavy-set mass (the asymptote the measured fraction
    /// would reach without noise).
    pub ideal_heavy_mean: f64,
}

impl QvResult {
    /// Recompute every summary field from the per-circuit records.
    pub fn validate(&self) -> Result<()> {
        if self.records.len() != self.n_circuits {
            return Err(Error::Bench(format!(
                "{} records for {} circuits",
                self.records.len(),
                self.n_circuits
            )));
        }
        // Heavy statistics are sums of probabilities and may overshoot
        // the unit interval by accumulated rounding.
        let in_range = |x: f64| (-1e-9..=1.0 + 1e-9).contains(&x);
        for r in &self.records {
            if !in_range(r.heavy_fraction) || !in_range(r.ideal_heavy_prob) {
                return Err(Error::Bench(format!(
                    "circuit {} has out-of-range heavy statistics",
                    r.index
                )));
            }
        }
        let h = self.records.iter().map(|r| r.heavy_fraction).sum::<f64>()
            / self.records.len() as f64;
        let sigma = (h * (1.0 - h) / (self.n_circuits * self.n_shots) as f64).sqrt();
        if (h - self.h_mean).abs() > 1e-12 || (sigma - self.sigma).abs() > 1e-12 {
            return Err(Error::Bench("heavy-output summary does not recompute".into()));
        }
        if self.pass != (self.h_mean - 2.0 * self.sigma > 2.0 / 3.0) {
            return Err(Error::Bench("pass decision does not recompute".into()));
        }
        Ok(())
    }
}

/// Run the quantum-volume test: generate circuits, take their exact
/// noiseless distributions, lower to native gates, execute (as transport
/// schedules on the width-4/6 machine modes, bare otherwise) under the
/// machine's noise model, and reduce. `machine.mode` is ignored — the
/// mode follows `cfg.n`; layout, timing, transport, and noise are taken
/// from `machine`. All randomness derives from `seed`.
pub fn run_qv(cfg: &QvConfig, machine: &MachineConfig, seed: u64) -> Result<QvResult> {
    if cfg.n > MAX_QV_WIDTH {
        return Err(Error::Validate(format!(
            "n = {} exceeds simulator capacity (exact reference distributions stop at {MAX_QV_WIDTH} qubits)",
            cfg.n
        )));
    }
    if cfg.n_circuits == 0 || cfg.n_shots == 0 {
        return Err(Error::Validate(
            "quantum volume needs at least one circuit and one shot".into(),
        ));
    }
    let opts = SynthOptions {
        quantize: false,
        merge_su4: cfg.merge,
    };
    let mode = match cfg.n {
        4 => Some(MachineMode::N4),
        6 => Some(MachineMode::N6),
        _ => None,
    };
    type Row = (u64, usize, OutcomeDistribution, OutcomeDistribution);
    let rows: Result<Vec<Row>> = (0..cfg.n_circuits)
        .into_par_iter()
        .map(|i| {
            let circuit_seed = derive_seed(seed, "qv-circuit", i as u64);
            let mut c = gen_qv_circuit(cfg.n, circuit_seed)?;
            for q in 0..cfg.n {
                c.measure(q, &format!("m{q}"));
            }
            let ideal = run_exact(&c, &NoiseModel::noiseless())?;
            let lowered = synthesize_circuit(&c, &opts)?;
            let shot_seed = derive_seed(seed, "qv-shots", i as u64);
            let batch = match mode {
                Some(mode) => {
                    let config = MachineConfig {
                        mode,
                        layout: machine.layout.clone(),
                        transport: machine.transport.clone(),
                        timing: machine.timing.clone(),
                        noise: machine.noise.clone(),
                    };
                    let policy = SchedulePolicy {
                        assignment: Some(assign_ions(&lowered, mode)?),
                        ..SchedulePolicy::default()
                    };
                    let schedule = compile_schedule(&lowered, &config, &policy)?;
                    run_shots_schedule(&schedule, &machine.noise, cfg.n_shots, shot_seed)?
                }
                None => run_shots(&lowered, &machine.noise, cfg.n_shots, shot_seed)?,
            };
            let emp = empirical_distribution(&batch, &c.measure_keys());
            Ok((circuit_seed, lowered.zz_count(), ideal, emp))
        })
        .collect();
    let rows = rows?;
    let ideals: Vec<OutcomeDistribution> = rows.iter().map(|r| r.2.clone()).collect();
    let measured: Vec<OutcomeDistribution> = rows.iter().map(|r| r.3.clone()).collect();
    let analysis = qv_analyze(cfg.n, &ideals, &measured, cfg.n_shots)?;
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, (circuit_seed, zz, _, _))| QvCircuitRecord {
            index: i,
            circuit_seed: *circuit_seed,
            zz_count: *zz,
            ideal_heavy_prob: analysis.ideal_heavy_prob[i],
            heavy_fraction: analysis.heavy_fraction[i],
        })
        .collect();
    let ideal_heavy_mean =
        analysis.ideal_heavy_prob.iter().sum::<f64>() / analysis.ideal_heavy_prob.len() as f64;
    let out = QvResult {
        n: cfg.n,
        n_circuits: cfg.n_circuits,
        n_shots: cfg.n_shots,
        merge: cfg.merge,
        records,
        h_mean: analysis.h_mean,
        sigma: analysis.sigma,
        pass: analysis.pass,
        confidence: analysis.confidence,
        ideal_heavy_mean,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{serialize_circuit, Gate};
    use std::collections::BTreeMap;

    #[test]
    fn generator_is_deterministic_and_structured() {
        let a = gen_qv_circuit(4, 11).unwrap();
        let b = gen_qv_circuit(4, 11).unwrap();
        assert_eq!(serialize_circuit(&a), serialize_circuit(&b));
        let c = gen_qv_circuit(4, 12).unwrap();
        assert_ne!(serialize_circuit(&a), serialize_circuit(&c));
        // 4 rounds x 2 blocks, nothing else.
        assert_eq!(a.ops.len(), 8);
        assert!(a.ops.iter().all(|op| matches!(op, Gate::U4 { .. })));
        assert!(a.measure_keys().is_empty());
        // Odd widths idle one qubit per round.
        let odd = gen_qv_circuit(5, 3).unwrap();
        assert_eq!(odd.ops.len(), 10);
        // Width 2 is one block per round on the only pair.
        let two = gen_qv_circuit(2, 3).unwrap();
        assert_eq!(two.ops.len(), 2);
        assert!(gen_qv_circuit(1, 0).is_err());
    }

    #[test]
    fn width_4_synthesis_uses_exactly_24_entanglers() {
        let opts = SynthOptions {
            quantize: false,
            merge_su4: false,
        };
        for seed in 0..6u64 {
            let mut c = gen_qv_circuit(4, seed).unwrap();
            for q in 0..4 {
                c.measure(q, &format!("m{q}"));
            }
            let lowered = synthesize_circuit(&c, &opts).unwrap();
            assert_eq!(lowered.zz_count(), 24, "seed {seed}");
        }
    }

    #[test]
    fn width_6_merge_compresses_toward_15_blocks() {
        // 6 rounds x 3 blocks = 18 SU(4)s; consecutive rounds repeat a
        // pair with probability 0.2 per block, so merging leaves ~15
        // blocks = ~45 entanglers (spec of the accelerated test: 45 +/- 6).
        let opts = SynthOptions {
            quantize: false,
            merge_su4: true,
        };
        let mut total = 0usize;
        let n_circ = 30;
        for seed in 0..n_circ {
            let c = gen_qv_circuit(6, seed as u64).unwrap();
            let lowered = synthesize_circuit(&c, &opts).unwrap();
            let zz = lowered.zz_count();
            assert!(zz % 3 == 0 && zz <= 54, "zz {zz}");
            total += zz;
        }
        let mean = total as f64 / n_circ as f64;
        assert!((mean - 45.0).abs() < 6.0, "mean zz {mean}");
    }

    #[test]
    fn heavy_set_uses_the_strict_median_rule() {
        // Hand-built 2-qubit distribution: probabilities 0.4, 0.3, 0.2,
        // 0.1 -> median 0.25 -> heavy = {outcomes with 0.4, 0.3}.
        let mut probs = BTreeMap::new();
        probs.insert("00".to_string(), 0.4);
        probs.insert("10".to_string(), 0.3);
        probs.insert("01".to_string(), 0.2);
        probs.insert("11".to_string(), 0.1);
        let d = OutcomeDistribution {
            keys: vec!["m0".into(), "m1".into()],
            probs,
        };
        let mut heavy = heavy_set(&d, 2);
        heavy.sort();
        assert_eq!(heavy, vec!["00".to_string(), "10".to_string()]);
        // Exactly uniform probabilities leave the heavy set empty under
        // the strict rule.
        let mut probs = BTreeMap::new();
        for b in ["00", "01", "10", "11"] {
            probs.insert(b.to_string(), 0.25);
        }
        let d = OutcomeDistribution {
            keys: vec!["m0".into(), "m1".into()],
            probs,
        };
        assert!(heavy_set(&d, 2).is_empty());
    }

    #[test]
    fn analysis_recomputes_by_hand_and_rejects_mismatches() {
        let dist = |ps: [f64; 4]| {
            let mut probs = BTreeMap::new();
            for (i, b) in ["00", "10", "01", "11"].iter().enumerate() {
                probs.insert(b.to_string(), ps[i]);
            }
            OutcomeDistribution {
                keys: vec!["m0".into(), "m1".into()],
                probs,
            }
        };
        let ideal = vec![dist([0.4, 0.3, 0.2, 0.1])];
        // Measured puts 0.5 + 0.25 = 0.75 on the heavy set {00, 10}.
        let measured = vec![dist([0.5, 0.25, 0.15, 0.1])];
        let a = qv_analyze(2, &ideal, &measured, 400).unwrap();
        assert!((a.h_mean - 0.75).abs() < 1e-12);
        assert!((a.ideal_heavy_prob[0] - 0.7).abs() < 1e-12);
        let sigma = (0.75f64 * 0.25 / 400.0).sqrt();
        assert!((a.sigma - sigma).abs() < 1e-12);
        assert_eq!(a.pass, 0.75 - 2.0 * sigma > 2.0 / 3.0);
        assert!(a.pass);
        // Mismatched circuit counts are an error.
        assert!(qv_analyze(2, &ideal, &[], 400).is_err());
        let other_keys = OutcomeDistribution {
            keys: vec!["x".into()],
            probs: BTreeMap::new(),
        };
        assert!(qv_analyze(2, &ideal, &[other_keys], 400).is_err());
    }

    #[test]
    fn erf_approximation_matches_reference_values() {
        assert!(erf(0.0).abs() < 2e-7);
        assert!((erf(1.0) - 0.842_700_792_9).abs() < 2e-7);
        assert!((erf(0.5) - 0.520_499_877_8).abs() < 2e-7);
        assert!((erf(2.0) - 0.995_322_265_0).abs() < 2e-7);
        assert!((erf(-1.0) + erf(1.0)).abs() < 1e-15);
        assert!((normal_cdf(0.0) - 0.5).abs() < 2e-7);
        assert!((normal_cdf(1.959_964) - 0.975).abs() < 1e-5);
        assert!((normal_cdf(-1.959_964) - 0.025).abs() < 1e-5);
    }

    #[test]
    fn noiseless_width_4_heavy_output_sits_at_the_ideal_asymptote() {
        let cfg = QvConfig {
            n: 4,
            n_circuits: 100,
            n_shots: 500,
            merge: false,
        };
        let machine = MachineConfig {
            noise: NoiseModel::noiseless(),
            ..MachineConfig::default()
        };
        let res = run_qv(&cfg, &machine, 29).unwrap();
        res.validate().unwrap();
        assert!(
            res.h_mean > 0.80 && res.h_mean < 0.90,
            "h_mean {}",
            res.h_mean
        );
        assert!((res.h_mean - res.ideal_heavy_mean).abs() < 0.02);
        assert!(res.pass);
        assert!(res.confidence > 0.999);
        assert!(res.records.iter().all(|r| r.zz_count == 24));
    }

    #[test]
    fn heavily_depolarized_outputs_fail_the_test() {
        let cfg = QvConfig {
            n: 4,
            n_circuits: 12,
            n_shots: 200,
            merge: false,
        };
        let mut noise = NoiseModel::noiseless();
        noise.p_tq_depol = 0.3;
        let machine = MachineConfig {
            noise,
            ..MachineConfig::default()
        };
        let res = run_qv(&cfg, &machine, 5).unwrap();
        assert!(res.h_mean < 0.62, "h_mean {}", res.h_mean);
        assert!(!res.pass);
        assert!(res.confidence < 0.1);
    }

    #[test]
    fn runs_are_reproducible_and_capacity_checked() {
        let cfg = QvConfig {
            n: 3,
            n_circuits: 6,
            n_shots: 100,
            merge: false,
        };
        let machine = MachineConfig::default();
        let a = run_qv(&cfg, &machine, 17).unwrap();
        let b = run_qv(&cfg, &machine, 17).unwrap();
        assert_eq!(a.h_mean, b.h_mean);
        assert_eq!(a.sigma, b.sigma);
        assert_eq!(a.pass, b.pass);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.heavy_fraction, rb.heavy_fraction);
            assert_eq!(ra.zz_count, rb.zz_count);
        }
        let c = run_qv(&cfg, &machine, 18).unwrap();
        assert!(a
            .records
            .iter()
            .zip(&c.records)
            .any(|(x, y)| x.heavy_fraction != y.heavy_fraction));
        // Width beyond the exact-simulation capacity is refused.
        let err = run_qv(&QvConfig::for_width(9), &machine, 0).unwrap_err();
        assert!(err.to_string().contains("capacity"), "{err}");
        assert_eq!(QvConfig::for_width(6).n_circuits, 400);
        assert!(QvConfig::for_width(6).merge);
        assert_eq!(QvConfig::for_width(4).n_shots, 500);
    }
}
