//! Benchmark suites over the simulator: randomized benchmarking,
//! simultaneous-RB crosstalk statistics, a teleported CNOT with its
//! Hofmann fidelity bound, and quantum volume.
//!
//! Each suite derives every random choice (circuits, shot sampling,
//! bootstrap resamples) from a single root seed via [`crate::rng`], so a
//! `(suite, config, seed)` triple reproduces its result bit-exactly.
//! Circuits are generated at the gate level, lowered to native ops by
//! [`crate::synth`], and run either as bare circuits or as compiled
//! transport schedules; analysis reduces shot records to a typed result
//! carrying bootstrap or binomial error bars.

mod clifford;
mod crosstalk;
mod qv;
mod rb;
mod report;
mod teleport;

pub use clifford::{
    c1_table, clifford_from_index, sample_clifford, CliffordSample, C1_SIZE, C2_CLASS_SIZES,
    C2_CLASS_ZZ, C2_SIZE, ZZ_PER_CLIFFORD,
};
pub use crosstalk::{
    crosstalk_stats, delta_stat, gamma_stat, run_crosstalk, run_rb_simultaneous, CrosstalkConfig,
    CrosstalkOutput, CrosstalkResult,
};
pub use qv::{
    gen_qv_circuit, heavy_set, qv_analyze, run_qv, QvAnalysis, QvCircuitRecord, QvConfig,
    QvResult, MAX_QV_WIDTH,
};
pub use report::{
    crosstalk_report, decay_csv, qv_report, rb_decay_csv, rb_report, teleport_report,
    BOOTSTRAP_LABEL,
};
pub use rb::{
    alpha_from_tq_rate, fit_decay, fit_decay_with_asymptote, gen_rb, gen_rb_simultaneous,
    gen_rb_simultaneous_kicked, rb_error_per_zz, run_rb, tq_rate_from_alpha, DecayFit, RbResult,
    META_EXPECTED, META_KICKS, META_ZZ, META_ZZ_P1, META_ZZ_P2,
};
pub use teleport::{
    hofmann_bound, teleport_cases, teleport_suite, TeleportBasis, TeleportCase, TeleportResult,
};
