//! Addressability and correlation statistics from simultaneous RB.
//!
//! Three experiments on the two gate pairs (qubits 0,1 and 2,3): RB on
//! pair 1 alone, RB on pair 2 alone, and simultaneous RB on both. From
//! the simultaneous run, fifteen Z-type Pauli observables are tracked
//! (aligned against each sequence's expected bits): three per pair whose
//! decays `beta_{z,i}` reflect errors local to that pair, and nine cross
//! products whose decays `mu_{i,j}` factor as `beta_{1,i} * beta_{2,j}`
//! exactly when the pairs err independently. The summary statistics are
//!
//! ```text
//!   gamma_z   = |alpha_z - alpha_z^both|          (addressability)
//!   delta_i,j = |beta_1,i * beta_2,j - mu_i,j|    (correlation)
//! ```
//!
//! Uncertainties come from a joint nonparametric bootstrap that
//! resamples sequences once per replicate and carries the *signed*
//! differences through every derived statistic, so a reported
//! `sigma_gamma`/`sigma_delta` is the spread of the quantity inside the
//! absolute value. Note `alpha_z^both` is fitted from the pair's parity
//! survival, which is an affine transform of its ZZ observable, so
//! `beta_{z,3} = alpha_z^both` holds identically here; the independence
//! check `beta_{z,i} = alpha_z^both` is substantive for the single-qubit
//! observables.

use crate::machine::NoiseModel;
use crate::rng::{derive_seed, rng_for};
use crate::sim::run_shots;
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::rb::{
    expected_bits, fit_decay, fit_decay_with_asymptote, fit_point, gen_rb_simultaneous,
    gen_rb_simultaneous_kicked, run_rb_impl, RbResult, META_ZZ,
};

/// One pair's observable labels: Z on its first qubit, Z on its second,
/// and the pair product.
const PAIR_LABELS: [&str; 3] = ["ZI", "IZ", "ZZ"];

/// The 15 nontrivial Z-type observables on the two pairs: index 0..3 are
/// pair 1 alone, 3..6 pair 2 alone, 6..15 the 3x3 cross products (row-major
/// in (i, j)).
fn observable_catalog() -> Vec<(String, Vec<usize>)> {
    let support = |label: &str, base: usize| -> Vec<usize> {
        match label {
            "ZI" => vec![base],
            "IZ" => vec![base + 1],
            _ => vec![base, base + 1],
        }
    };
    let mut cat = Vec::with_capacity(15);
    for l in PAIR_LABELS {
        cat.push((format!("{l}|II"), support(l, 0)));
    }
    for l in PAIR_LABELS {
        cat.push((format!("II|{l}"), support(l, 2)));
    }
    for l1 in PAIR_LABELS {
        for l2 in PAIR_LABELS {
            let mut s = support(l1, 0);
            s.extend(support(l2, 2));
            cat.push((format!("{l1}|{l2}"), s));
        }
    }
    cat
}

/// Addressability statistic `gamma_z = |alpha_z - alpha_z^both|`.
pub fn gamma_stat(alpha: f64, alpha_both: f64) -> f64 {
    (alpha - alpha_both).abs()
}

/// Correlation statistic `delta_{i,j} = |beta_{1,i} beta_{2,j} - mu_{i,j}|`.
pub fn delta_stat(beta_1i: f64, beta_2j: f64, mu_ij: f64) -> f64 {
    (beta_1i * beta_2j - mu_ij).abs()
}

/// Run simultaneous RB on both pairs of a 4-qubit register. The returned
/// [`RbResult`] has `n = 4`, a joint-parity survival fit, and all 15
/// aligned observable decays in `observables`/`observable_means`.
/// `kick` injects the correlated Z(x)Z dephasing at the given per-layer
/// probability.
pub fn run_rb_simultaneous(
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
    let catalog = observable_catalog();
    let jobs: Vec<(usize, usize)> = (0..lengths.len())
        .flat_map(|li| (0..n_sequences).map(move |s| (li, s)))
        .collect();
    type Row = (f64, Vec<f64>, usize); // joint survival, 15 obs means, zz
    let rows: Result<Vec<Row>> = jobs
        .par_iter()
        .map(|&(li, s)| {
            let job = (li * n_sequences + s) as u64;
            let gseed = derive_seed(seed, "rb-sim-gen", job);
            let c = match kick {
                None => gen_rb_simultaneous(lengths[li], gseed)?,
                Some(q) => gen_rb_simultaneous_kicked(lengths[li], gseed, q)?,
            };
            let expected = expected_bits(&c)?;
            let zz: usize = c.metadata[META_ZZ]
                .parse()
                .map_err(|_| Error::Bench("bad ZZ metadata".into()))?;
            let batch = run_shots(&c, noise, n_shots, derive_seed(seed, "rb-sim-shots", job))?;
            let mut obs_acc = vec![0.0f64; catalog.len()];
            let mut joint_hits = 0usize;
            for rec in &batch.records {
                let aligned: Vec<i32> = (0..4)
                    .map(|q| {
                        let bit = rec.outcomes[&format!("m{q}")];
                        if bit == expected[q] {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect();
                if aligned.iter().product::<i32>() == 1 {
                    joint_hits += 1;
                }
                for (o, (_, support)) in catalog.iter().enumerate() {
                    obs_acc[o] += support.iter().map(|&q| aligned[q]).product::<i32>() as f64;
                }
            }
            let n = batch.records.len() as f64;
            for v in &mut obs_acc {
                *v /= n;
            }
            Ok((joint_hits as f64 / n, obs_acc, zz))
        })
        .collect();
    let rows = rows?;

    let mut survivals = vec![Vec::with_capacity(n_sequences); lengths.len()];
    let mut zz_counts = vec![Vec::with_capacity(n_sequences); lengths.len()];
    let mut obs_means: BTreeMap<String, Vec<Vec<f64>>> = catalog
        .iter()
        .map(|(k, _)| (k.clone(), vec![Vec::with_capacity(n_sequences); lengths.len()]))
        .collect();
    for (&(li, _), (surv, obs, zz)) in jobs.iter().zip(&rows) {
        survivals[li].push(*surv);
        zz_counts[li].push(*zz);
        for (o, (k, _)) in catalog.iter().enumerate() {
            obs_means.get_mut(k).unwrap()[li].push(obs[o]);
        }
    }
    let fit = fit_decay(lengths, &survivals, 300)?;
    let observables: BTreeMap<String, super::DecayFit> = catalog
        .iter()
        .map(|(k, _)| {
            fit_decay_with_asymptote(lengths, &obs_means[k], 0.0, 300).map(|f| (k.clone(), f))
        })
        .collect::<Result<_>>()?;
    let survival_mean = survivals
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    Ok(RbResult {
        n: 4,
        lengths: lengths.to_vec(),
        survival_mean,
        survivals,
        zz_counts,
        fit,
        observables,
        observable_means: obs_means,
    })
}

/// Crosstalk summary statistics with bootstrap uncertainties.
///
/// Pair indexing is 0-based (`alpha[0]` is the paper's `alpha_1`);
/// observable index i in 0..3 means Z on the pair's first qubit, Z on
/// its second, or the pair product ZZ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrosstalkResult {
    pub lengths: Vec<usize>,
    /// Individual-experiment decay per pair.
    pub alpha: [f64; 2],
    pub sigma_alpha: [f64; 2],
    /// Same pair's decay during simultaneous operation.
    pub alpha_both: [f64; 2],
    pub sigma_alpha_both: [f64; 2],
    /// `gamma_z = |alpha_z - alpha_z^both|`; sigma is the bootstrap
    /// spread of the signed difference.
    pub gamma: [f64; 2],
    pub sigma_gamma: [f64; 2],
    /// Single-pair observable decays during simultaneous operation.
    pub beta: [[f64; 3]; 2],
    pub sigma_beta: [[f64; 3]; 2],
    /// Signed independence checks `beta_{z,i} - alpha_z^both` with their
    /// bootstrap spreads ("if standard RB assumptions hold" these are 0).
    pub beta_minus_alpha_both: [[f64; 3]; 2],
    pub sigma_beta_minus_alpha_both: [[f64; 3]; 2],
    /// Cross-observable decays.
    pub mu: [[f64; 3]; 3],
    pub sigma_mu: [[f64; 3]; 3],
    /// `delta_{i,j} = |beta_{1,i} beta_{2,j} - mu_{i,j}|`; sigma is the
    /// bootstrap spread of the signed product difference.
    pub delta: [[f64; 3]; 3],
    pub sigma_delta: [[f64; 3]; 3],
}

impl CrosstalkResult {
    /// Recompute `gamma` and `delta` from their stored inputs and check
    /// the stored values match exactly (the defining formulas are the
    /// only way these fields are ever produced).
    pub fn verify(&self) -> Result<()> {
        for z in 0..2 {
            let g = gamma_stat(self.alpha[z], self.alpha_both[z]);
            if g != self.gamma[z] {
                return Err(Error::Bench(format!(
                    "gamma[{z}] = {} does not equal |alpha - alpha_both| = {g}",
                    self.gamma[z]
                )));
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let d = delta_stat(self.beta[0][i], self.beta[1][j], self.mu[i][j]);
                if d != self.delta[i][j] {
                    return Err(Error::Bench(format!(
                        "delta[{i}][{j}] = {} does not equal |beta1 beta2 - mu| = {d}",
                        self.delta[i][j]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn boot_means(rows: &[Vec<f64>], idxs: &[Vec<usize>], out: &mut Vec<f64>) {
    out.clear();
    for (row, idx) in rows.iter().zip(idxs) {
        out.push(idx.iter().map(|&i| row[i]).sum::<f64>() / idx.len() as f64);
    }
}

/// Reduce the three experiments to the crosstalk statistics. `ind1` and
/// `ind2` are individual 2-qubit RB results for the pairs; `simultaneous`
/// must carry all 15 observable decays ([`run_rb_simultaneous`]).
/// Uncertainties use a joint bootstrap with `n_boot >= 200` replicates.
pub fn crosstalk_stats(
    ind1: &RbResult,
    ind2: &RbResult,
    simultaneous: &RbResult,
    n_boot: usize,
) -> Result<CrosstalkResult> {
    let lengths = &simultaneous.lengths;
    if ind1.lengths != *lengths || ind2.lengths != *lengths {
        return Err(Error::Bench(
            "crosstalk experiments must share their length schedule".into(),
        ));
    }
    if n_boot < 200 {
        return Err(Error::Bench(format!(
            "bootstrap needs n_boot >= 200, got {n_boot}"
        )));
    }
    let catalog = observable_catalog();
    for (k, _) in &catalog {
        if !simultaneous.observable_means.contains_key(k) {
            return Err(Error::Bench(format!(
                "simultaneous result is missing observable '{k}'"
            )));
        }
    }
    let lf: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let obs_alpha = |key: &str| simultaneous.observables[key].alpha;

    let alpha = [ind1.fit.alpha, ind2.fit.alpha];
    // Pair survival is an affine transform of the pair's ZZ observable,
    // so its decay is that observable's fit.
    let alpha_both = [obs_alpha("ZZ|II"), obs_alpha("II|ZZ")];
    let mut beta = [[0.0; 3]; 2];
    let mut mu = [[0.0; 3]; 3];
    for i in 0..3 {
        beta[0][i] = obs_alpha(&format!("{}|II", PAIR_LABELS[i]));
        beta[1][i] = obs_alpha(&format!("II|{}", PAIR_LABELS[i]));
        for j in 0..3 {
            mu[i][j] = obs_alpha(&format!("{}|{}", PAIR_LABELS[i], PAIR_LABELS[j]));
        }
    }
    let gamma = [
        gamma_stat(alpha[0], alpha_both[0]),
        gamma_stat(alpha[1], alpha_both[1]),
    ];
    let mut delta = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            delta[i][j] = delta_stat(beta[0][i], beta[1][j], mu[i][j]);
        }
    }
    let beta_minus = {
        let mut m = [[0.0; 3]; 2];
        for z in 0..2 {
            for i in 0..3 {
                m[z][i] = beta[z][i] - alpha_both[z];
            }
        }
        m
    };

    // Joint bootstrap: one resample of the individual runs' sequences and
    // one shared resample of the simultaneous sequences per replicate.
    let mut rng = rng_for(0xC055_1A1C, "crosstalk-bootstrap", n_boot as u64);
    let n_lengths = lengths.len();
    let mut b_alpha = [Vec::with_capacity(n_boot), Vec::with_capacity(n_boot)];
    let mut b_alpha_both = [Vec::with_capacity(n_boot), Vec::with_capacity(n_boot)];
    let mut b_gamma_signed: [Vec<f64>; 2] = [Vec::with_capacity(n_boot), Vec::with_capacity(n_boot)];
    let mut b_beta: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); 6];
    let mut b_beta_minus: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); 6];
    let mut b_mu: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); 9];
    let mut b_delta_signed: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); 9];
    let mut means = Vec::with_capacity(n_lengths);
    for _ in 0..n_boot {
        let mut rep_alpha = [0.0f64; 2];
        for (z, ind) in [ind1, ind2].into_iter().enumerate() {
            let idxs: Vec<Vec<usize>> = ind
                .survivals
                .iter()
                .map(|row| (0..row.len()).map(|_| rng.random_range(0..row.len())).collect())
                .collect();
            boot_means(&ind.survivals, &idxs, &mut means);
            rep_alpha[z] = fit_point(&lf, &means, 0.5).1;
            b_alpha[z].push(rep_alpha[z]);
        }
        // One index set shared by every simultaneous observable.
        let idxs: Vec<Vec<usize>> = simultaneous
            .survivals
            .iter()
            .map(|row| (0..row.len()).map(|_| rng.random_range(0..row.len())).collect())
            .collect();
        let mut rep_obs: BTreeMap<&str, f64> = BTreeMap::new();
        for (k, _) in &catalog {
            boot_means(&simultaneous.observable_means[k], &idxs, &mut means);
            rep_obs.insert(k.as_str(), fit_point(&lf, &means, 0.0).1);
        }
        let rep_both = [rep_obs["ZZ|II"], rep_obs["II|ZZ"]];
        for z in 0..2 {
            b_alpha_both[z].push(rep_both[z]);
            b_gamma_signed[z].push(rep_alpha[z] - rep_both[z]);
        }
        let mut rep_beta = [[0.0f64; 3]; 2];
        for i in 0..3 {
            rep_beta[0][i] = rep_obs[format!("{}|II", PAIR_LABELS[i]).as_str()];
            rep_beta[1][i] = rep_obs[format!("II|{}", PAIR_LABELS[i]).as_str()];
            for z in 0..2 {
                b_beta[z * 3 + i].push(rep_beta[z][i]);
                b_beta_minus[z * 3 + i].push(rep_beta[z][i] - rep_both[z]);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let m = rep_obs[format!("{}|{}", PAIR_LABELS[i], PAIR_LABELS[j]).as_str()];
                b_mu[i * 3 + j].push(m);
                b_delta_signed[i * 3 + j].push(rep_beta[0][i] * rep_beta[1][j] - m);
            }
        }
    }

    let mut out = CrosstalkResult {
        lengths: lengths.clone(),
        alpha,
        sigma_alpha: [std_dev(&b_alpha[0]), std_dev(&b_alpha[1])],
        alpha_both,
        sigma_alpha_both: [std_dev(&b_alpha_both[0]), std_dev(&b_alpha_both[1])],
        gamma,
        sigma_gamma: [std_dev(&b_gamma_signed[0]), std_dev(&b_gamma_signed[1])],
        beta,
        sigma_beta: [[0.0; 3]; 2],
        beta_minus_alpha_both: beta_minus,
        sigma_beta_minus_alpha_both: [[0.0; 3]; 2],
        mu,
        sigma_mu: [[0.0; 3]; 3],
        delta,
        sigma_delta: [[0.0; 3]; 3],
    };
    for z in 0..2 {
        for i in 0..3 {
            out.sigma_beta[z][i] = std_dev(&b_beta[z * 3 + i]);
            out.sigma_beta_minus_alpha_both[z][i] = std_dev(&b_beta_minus[z * 3 + i]);
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            out.sigma_mu[i][j] = std_dev(&b_mu[i * 3 + j]);
            out.sigma_delta[i][j] = std_dev(&b_delta_signed[i * 3 + j]);
        }
    }
    out.verify()?;
    Ok(out)
}

/// Configuration for the three-experiment crosstalk suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrosstalkConfig {
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    pub n_shots: usize,
    pub n_boot: usize,
    /// Per-layer probability of the injected correlated Z(x)Z dephasing
    /// kick (its single-pair marginal is applied to the individual
    /// experiments so that only genuine correlations move delta).
    pub kick_prob: Option<f64>,
}

impl Default for CrosstalkConfig {
    fn default() -> Self {
        CrosstalkConfig {
            lengths: vec![1, 2, 4, 8, 16, 32],
            n_sequences: 40,
            n_shots: 400,
            n_boot: 300,
            kick_prob: None,
        }
    }
}

/// The three experiments plus reduced statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrosstalkOutput {
    pub stats: CrosstalkResult,
    pub individual: [RbResult; 2],
    pub simultaneous: RbResult,
}

/// Run the full crosstalk suite: individual RB per pair, simultaneous RB,
/// and the gamma/delta reduction. All randomness derives from `seed`.
pub fn run_crosstalk(
    cfg: &CrosstalkConfig,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CrosstalkOutput> {
    let ind1 = run_rb_impl(
        2,
        &cfg.lengths,
        cfg.n_sequences,
        cfg.n_shots,
        noise,
        derive_seed(seed, "xtalk-ind", 1),
        cfg.kick_prob,
    )?;
    let ind2 = run_rb_impl(
        2,
        &cfg.lengths,
        cfg.n_sequences,
        cfg.n_shots,
        noise,
        derive_seed(seed, "xtalk-ind", 2),
        cfg.kick_prob,
    )?;
    let simultaneous = run_rb_simultaneous(
        &cfg.lengths,
        cfg.n_sequences,
        cfg.n_shots,
        noise,
        derive_seed(seed, "xtalk-sim", 0),
        cfg.kick_prob,
    )?;
    let stats = crosstalk_stats(&ind1, &ind2, &simultaneous, cfg.n_boot)?;
    Ok(CrosstalkOutput {
        stats,
        individual: [ind1, ind2],
        simultaneous,
    })
}
