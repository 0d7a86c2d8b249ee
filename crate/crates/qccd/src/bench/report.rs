//! Machine-readable benchmark reports.
//!
//! Every suite reduces to one JSON document with a fixed envelope:
//! `benchmark` (which suite ran), `config` (the fully resolved run
//! configuration, defaults included), `seed` (the root seed every random
//! stream derived from), `records` (per-circuit detail), `summary`
//! (headline statistics), and `pass` (the suite verdict, or null for
//! suites that only estimate). Resampled error bars are tagged with
//! [`BOOTSTRAP_LABEL`] in the summary so consumers know exactly which
//! resampling scheme produced them.
//!
//! [`decay_csv`] flattens decay curves into CSV for plotting, and
//! [`rb_decay_csv`] does so directly from an [`RbResult`].

use serde_json::{json, Value};

use super::crosstalk::CrosstalkOutput;
use super::qv::QvResult;
use super::rb::{rb_error_per_zz, RbResult};
use super::teleport::TeleportResult;
use crate::{Error, Result};

/// Method label attached to every resampled uncertainty in a report.
pub const BOOTSTRAP_LABEL: &str = "nonparametric bootstrap";

/// Shared report envelope. `pass` is `None` for suites without a
/// pass/fail criterion; it serializes as JSON null.
fn envelope(
    benchmark: &str,
    config: Value,
    seed: u64,
    records: Value,
    summary: Value,
    pass: Option<bool>,
) -> Value {
    json!({
        "benchmark": benchmark,
        "config": config,
        "seed": seed,
        "records": records,
        "summary": summary,
        "pass": pass,
    })
}

/// Report for a randomized-benchmarking run (individual or simultaneous).
///
/// Records hold one entry per sequence length with the per-sequence
/// survivals and entangler counts; the summary carries the decay fit and,
/// for two-qubit runs, the derived per-Clifford and per-entangler errors
/// together with the measured mean entangler count per Clifford.
pub fn rb_report(result: &RbResult, config: Value, seed: u64) -> Value {
    let records: Vec<Value> = result
        .lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            json!({
                "length": l,
                "survival_mean": result.survival_mean[i],
                "survivals": result.survivals[i],
                "zz_counts": result.zz_counts[i],
            })
        })
        .collect();

    let error_per_clifford = match result.n {
        1 => Some(0.5 * (1.0 - result.fit.alpha)),
        2 => Some(0.75 * (1.0 - result.fit.alpha)),
        _ => None,
    };
    let error_per_zz = (result.n == 2).then(|| rb_error_per_zz(result.fit.alpha));
    let mean_zz_per_clifford = (result.n == 2).then(|| {
        let mut zz = 0usize;
        let mut cliffords = 0usize;
        for (li, &l) in result.lengths.iter().enumerate() {
            for &c in &result.zz_counts[li] {
                zz += c;
                cliffords += l + 1; // inversion Clifford included
            }
        }
        zz as f64 / cliffords as f64
    });

    let mut summary = json!({
        "n": result.n,
        "fit": serde_json::to_value(&result.fit).expect("plain struct"),
        "sigma_method": BOOTSTRAP_LABEL,
        "error_per_clifford": error_per_clifford,
        "error_per_zz": error_per_zz,
        "mean_zz_per_clifford": mean_zz_per_clifford,
    });
    if !result.observables.is_empty() {
        summary["observables"] =
            serde_json::to_value(&result.observables).expect("string-keyed map");
    }

    envelope("rb", config, seed, Value::Array(records), summary, None)
}

/// Report for the three-experiment crosstalk suite.
///
/// Records hold the two individual and one simultaneous RB results in
/// full (per-sequence survivals and aligned observable means); the
/// summary is the reduced [`CrosstalkResult`] statistics with the
/// resampling method labeled.
pub fn crosstalk_report(output: &CrosstalkOutput, config: Value, seed: u64) -> Value {
    let records = json!({
        "individual": serde_json::to_value(&output.individual).expect("plain structs"),
        "simultaneous": serde_json::to_value(&output.simultaneous).expect("plain struct"),
    });
    let mut summary = serde_json::to_value(&output.stats).expect("plain struct");
    summary["sigma_method"] = json!(BOOTSTRAP_LABEL);
    envelope("crosstalk", config, seed, records, summary, None)
}

/// Report for the teleported-CNOT suite. Records hold the per-case
/// success rates; the summary carries the two basis fidelities and the
/// average-fidelity lower bound.
pub fn teleport_report(result: &TeleportResult, config: Value, seed: u64) -> Value {
    let records = serde_json::to_value(&result.success).expect("string-keyed map");
    let summary = json!({
        "n_shots": result.n_shots,
        "f1": result.f1,
        "f2": result.f2,
        "f_avg_lb": result.f_avg_lb,
    });
    envelope("teleport", config, seed, records, summary, None)
}

/// Report for a quantum-volume run. Records hold one entry per circuit;
/// the summary carries the pooled heavy-output statistics and the
/// envelope `pass` field mirrors the two-sigma decision.
pub fn qv_report(result: &QvResult, config: Value, seed: u64) -> Value {
    let records = serde_json::to_value(&result.records).expect("plain structs");
    let summary = json!({
        "n": result.n,
        "n_circuits": result.n_circuits,
        "n_shots": result.n_shots,
        "merge": result.merge,
        "h_mean": result.h_mean,
        "sigma": result.sigma,
        "threshold": 2.0 / 3.0,
        "confidence": result.confidence,
        "ideal_heavy_mean": result.ideal_heavy_mean,
    });
    envelope("qv", config, seed, records, summary, Some(result.pass))
}

/// Render named decay curves as CSV with a `length` column followed by
/// one column per series. Series must all match the length axis; names
/// must be nonempty and free of CSV metacharacters.
pub fn decay_csv(lengths: &[usize], series: &[(&str, &[f64])]) -> Result<String> {
    if lengths.is_empty() || series.is_empty() {
        return Err(Error::Validate("decay CSV needs lengths and series".into()));
    }
    for (name, values) in series {
        if name.is_empty() || name.contains([',', '"', '\n', '\r']) {
            return Err(Error::Validate(format!("bad CSV column name {name:?}")));
        }
        if values.len() != lengths.len() {
            return Err(Error::Validate(format!(
                "series '{name}' has {} points for {} lengths",
                values.len(),
                lengths.len()
            )));
        }
    }
    let mut out = String::from("length");
    for (name, _) in series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, &l) in lengths.iter().enumerate() {
        out.push_str(&l.to_string());
        for (_, values) in series {
            out.push(',');
            out.push_str(&values[i].to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV of an RB result's decay curves: measured survival, the fitted
/// curve evaluated at each length, and (for the simultaneous variant)
/// the mean of every aligned observable.
pub fn rb_decay_csv(result: &RbResult) -> Result<String> {
    let fitted: Vec<f64> = result
        .lengths
        .iter()
        .map(|&l| result.fit.a * result.fit.alpha.powi(l as i32) + result.fit.b)
        .collect();
    let obs_means: Vec<(&str, Vec<f64>)> = result
        .observable_means
        .iter()
        .map(|(key, rows)| {
            let means = rows
                .iter()
                .map(|seqs| seqs.iter().sum::<f64>() / seqs.len() as f64)
                .collect();
            (key.as_str(), means)
        })
        .collect();

    let mut series: Vec<(&str, &[f64])> = vec![
        ("survival", &result.survival_mean),
        ("survival_fit", &fitted),
    ];
    for (key, means) in &obs_means {
        series.push((key, means));
    }
    decay_csv(&result.lengths, &series)
}
