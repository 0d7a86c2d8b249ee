//! Command-line harness over the `qccd` library: quantum volume,
//! randomized benchmarking (with the simultaneous crosstalk suite), the
//! teleported CNOT, and transport-schedule compilation, each emitting a
//! machine-readable JSON report.
//!
//! Conventions:
//!
//! * Exit codes: 0 = ran (and passed, where a pass criterion exists),
//!   1 = the benchmark's pass criterion failed, 2 = configuration or
//!   runtime error. CI can gate directly on the code.
//! * All randomness flows from `--seed`; an identical command line
//!   reproduces the report byte-for-byte except the `timestamp` field.
//! * Reports embed the fully resolved run configuration — including the
//!   machine model with every defaulted value — under `config`.
//! * `QCCD_THREADS` caps the worker pool (default: all cores).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qccd::bench::{
    crosstalk_report, qv_report, rb_decay_csv, rb_report, run_crosstalk, run_qv, run_rb,
    teleport_report, teleport_suite, CrosstalkConfig, QvConfig,
};
use qccd::circuit::parse_circuit;
use qccd::machine::{
    parse_machine_config, serialize_machine_config, MachineConfig, MachineMode, NoiseModel,
};
use qccd::schedule::{
    assign_ions, compile_schedule, schedule_to_json, time_budget, SchedulePolicy,
};
use qccd::synth::{synthesize_circuit, SynthOptions};

#[derive(Parser)]
#[command(
    name = "qccd",
    version,
    about = "Benchmark harness for a linear-trap QCCD machine",
    after_help = "Exit codes: 0 pass, 1 benchmark fail, 2 error. \
                  Set QCCD_THREADS to cap parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample quantum-volume circuits and test the heavy-output criterion
    Qv(QvArgs),
    /// Randomized benchmarking; --simultaneous adds crosstalk statistics
    Rb(RbArgs),
    /// Teleported-CNOT truth table with the Hofmann fidelity bound
    Teleport(TeleportArgs),
    /// Compile a circuit to a transport schedule with its time budget
    Schedule(ScheduleArgs),
    /// Print a fully resolved machine configuration
    Config(ConfigArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Noise overrides: 'default', 'noiseless', or k=v[,k=v...]
    #[arg(long, value_name = "SPEC")]
    noise: Option<String>,
    /// Machine configuration JSON file (unset fields take defaults)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QvArgs {
    /// Circuit width (qubits), at most 6
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Random circuits to sample (default depends on width)
    #[arg(long)]
    circuits: Option<usize>,
    /// Shots per circuit (default depends on width)
    #[arg(long)]
    shots: Option<usize>,
    /// Merge adjacent SU(4) blocks before synthesis (default: width 6 only)
    #[arg(long, value_name = "BOOL")]
    merge: Option<bool>,
    /// Root seed for circuits and shot sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RbArgs {
    /// Qubits per sequence (1 or 2)
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    /// Comma-separated sequence lengths
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    lengths: Vec<usize>,
    /// Random sequences per length
    #[arg(long, default_value_t = 50)]
    sequences: usize,
    /// Shots per sequence
    #[arg(long, default_value_t = 500)]
    shots: usize,
    /// Run two-qubit RB on both gate zones at once and reduce the
    /// fifteen aligned observables to crosstalk statistics
    #[arg(long)]
    simultaneous: bool,
    /// Bootstrap resamples behind the error bars (simultaneous suite)
    #[arg(long, default_value_t = 300)]
    bootstrap: usize,
    /// Inject a correlated phase kick with this probability per layer
    /// (simultaneous suite; detection check for the delta statistics)
    #[arg(long, value_name = "PROB")]
    kick: Option<f64>,
    /// Also write the decay curves as CSV here
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Root seed for sequences and shot sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TeleportArgs {
    /// Shots per truth-table case
    #[arg(long, default_value_t = 2000)]
    shots: usize,
    /// Root seed for shot sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Circuit JSON file to compile
    #[arg(long, value_name = "FILE")]
    circuit: PathBuf,
    /// Hardware mode (overrides the machine config's own)
    #[arg(long)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ConfigArgs {
    /// Hardware mode (overrides the machine config's own)
    #[arg(long)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum ModeArg {
    N4,
    N6,
}

impl From<ModeArg> for MachineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::N4 => MachineMode::N4,
            ModeArg::N6 => MachineMode::N6,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

enum Verdict {
    Pass,
    Fail,
}

fn run(cli: Cli) -> Result<Verdict> {
    init_threads()?;
    match cli.command {
        Command::Qv(args) => cmd_qv(args),
        Command::Rb(args) => cmd_rb(args),
        Command::Teleport(args) => cmd_teleport(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Config(args) => cmd_config(args),
    }
}

/// Cap the worker pool when QCCD_THREADS is set.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("QCCD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("QCCD_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("worker pool already initialized")?;
    Ok(())
}

/// Resolve the machine model: config file (or defaults), then the mode
/// override, then noise overrides, then a full validation pass.
fn resolve_machine(common: &CommonArgs, mode: Option<ModeArg>) -> Result<MachineConfig> {
    let mut machine = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading machine config {}", path.display()))?;
            parse_machine_config(&text)
                .with_context(|| format!("parsing machine config {}", path.display()))?
        }
        None => MachineConfig::default(),
    };
    if let Some(m) = mode {
        machine.mode = m.into();
    }
    if let Some(spec) = &common.noise {
        machine.noise = apply_noise_spec(&machine.noise, spec)?;
    }
    machine.validate()?;
    Ok(machine)
}

/// `--noise` grammar: the keywords 'default' (calibrated defaults) and
/// 'noiseless' (all rates zero), or key=value overrides on the base.
fn apply_noise_spec(base: &NoiseModel, spec: &str) -> Result<NoiseModel> {
    match spec.trim() {
        "default" => Ok(NoiseModel::default()),
        "noiseless" => Ok(NoiseModel::noiseless()),
        overrides => Ok(base.clone().with_overrides(overrides)?),
    }
}

/// Epoch seconds; the one report field allowed to vary between
/// identical runs.
fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("clock after the epoch")
        .as_secs()
}

/// Write the report (stamped) to `--out` or stdout. The human summary
/// line goes to stderr so stdout stays machine-readable.
fn emit(mut report: Value, out: &Option<PathBuf>, human: &str) -> Result<()> {
    report["timestamp"] = json!(timestamp());
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match out {
        Some(path) => {
            fs::write(path, text)
                .with_context(|| format!("writing report {}", path.display()))?;
            eprintln!("{human} -> {}", path.display());
        }
        None => {
            eprintln!("{human}");
            print!("{text}");
        }
    }
    Ok(())
}

fn write_csv(path: &Path, csv: &str) -> Result<()> {
    fs::write(path, csv).with_context(|| format!("writing CSV {}", path.display()))
}

fn path_json(path: &Option<PathBuf>) -> Value {
    match path {
        Some(p) => json!(p.display().to_string()),
        None => Value::Null,
    }
}

fn machine_json(machine: &MachineConfig) -> Value {
    serde_json::to_value(machine).expect("machine config serializes")
}

fn cmd_qv(args: QvArgs) -> Result<Verdict> {
    let machine = resolve_machine(&args.common, None)?;
    let mut cfg = QvConfig::for_width(args.n);
    if let Some(c) = args.circuits {
        cfg.n_circuits = c;
    }
    if let Some(s) = args.shots {
        cfg.n_shots = s;
    }
    if let Some(m) = args.merge {
        cfg.merge = m;
    }

    let run_config = json!({
        "command": "qv",
        "n": cfg.n,
        "circuits": cfg.n_circuits,
        "shots": cfg.n_shots,
        "merge": cfg.merge,
        "seed": args.seed,
        "noise": args.common.noise,
        "config_path": path_json(&args.common.config),
        "machine": machine_json(&machine),
    });

    let result = run_qv(&cfg, &machine, args.seed)?;
    let human = format!(
        "qv n={} circuits={} shots={}: h_mean={:.4} sigma={:.4} pass={}",
        cfg.n, cfg.n_circuits, cfg.n_shots, result.h_mean, result.sigma, result.pass
    );
    emit(qv_report(&result, run_config, args.seed), &args.common.out, &human)?;
    Ok(if result.pass { Verdict::Pass } else { Verdict::Fail })
}

fn cmd_rb(args: RbArgs) -> Result<Verdict> {
    let machine = resolve_machine(&args.common, None)?;
    if args.kick.is_some() && !args.simultaneous {
        bail!("--kick applies to the simultaneous suite only");
    }

    let run_config = json!({
        "command": "rb",
        "qubits": args.qubits,
        "lengths": args.lengths,
        "sequences": args.sequences,
        "shots": args.shots,
        "simultaneous": args.simultaneous,
        "bootstrap": if args.simultaneous { json!(args.bootstrap) } else { Value::Null },
        "kick": args.kick,
        "seed": args.seed,
        "noise": args.common.noise,
        "config_path": path_json(&args.common.config),
        "machine": machine_json(&machine),
    });

    if args.simultaneous {
        if args.qubits != 2 {
            bail!("--simultaneous runs two-qubit sequences; pass --qubits 2");
        }
        let cfg = CrosstalkConfig {
            lengths: args.lengths.clone(),
            n_sequences: args.sequences,
            n_shots: args.shots,
            n_boot: args.bootstrap,
            kick_prob: args.kick,
        };
        let output = run_crosstalk(&cfg, &machine.noise, args.seed)?;
        if let Some(path) = &args.csv {
            write_csv(path, &rb_decay_csv(&output.simultaneous)?)?;
        }
        let human = format!(
            "rb simultaneous: alpha=[{:.4}, {:.4}] max|gamma|={:.2e} max|delta|={:.2e}",
            output.stats.alpha[0],
            output.stats.alpha[1],
            output
                .stats
                .gamma
                .iter()
                .fold(0.0f64, |a, &g| a.max(g.abs())),
            output
                .stats
                .delta
                .iter()
                .flatten()
                .fold(0.0f64, |a, &d| a.max(d.abs())),
        );
        emit(
            crosstalk_report(&output, run_config, args.seed),
            &args.common.out,
            &human,
        )?;
    } else {
        let result = run_rb(
            args.qubits,
            &args.lengths,
            args.sequences,
            args.shots,
            &machine.noise,
            args.seed,
        )?;
        if let Some(path) = &args.csv {
            write_csv(path, &rb_decay_csv(&result)?)?;
        }
        let human = format!(
            "rb qubits={}: alpha={:.5} +- {:.5}",
            args.qubits, result.fit.alpha, result.fit.sigma_alpha
        );
        emit(rb_report(&result, run_config, args.seed), &args.common.out, &human)?;
    }
    Ok(Verdict::Pass)
}

fn cmd_teleport(args: TeleportArgs) -> Result<Verdict> {
    let machine = resolve_machine(&args.common, None)?;
    let run_config = json!({
        "command": "teleport",
        "shots": args.shots,
        "seed": args.seed,
        "noise": args.common.noise,
        "config_path": path_json(&args.common.config),
        "machine": machine_json(&machine),
    });

    let result = teleport_suite(&machine.noise, args.shots, args.seed)?;
    let human = format!(
        "teleport shots={}: f1={:.4} f2={:.4} f_avg_lb={:.4}",
        args.shots, result.f1, result.f2, result.f_avg_lb
    );
    emit(
        teleport_report(&result, run_config, args.seed),
        &args.common.out,
        &human,
    )?;
    Ok(Verdict::Pass)
}

fn cmd_schedule(args: ScheduleArgs) -> Result<Verdict> {
    let machine = resolve_machine(&args.common, args.mode)?;
    let text = fs::read_to_string(&args.circuit)
        .with_context(|| format!("reading circuit {}", args.circuit.display()))?;
    let circuit = parse_circuit(&text)
        .with_context(|| format!("parsing circuit {}", args.circuit.display()))?;

    // Lower to native gates (passes native circuits through), place
    // ions to shorten routes, then compile.
    let lowered = synthesize_circuit(
        &circuit,
        &SynthOptions {
            quantize: false,
            merge_su4: false,
        },
    )?;
    let policy = SchedulePolicy {
        assignment: Some(assign_ions(&lowered, machine.mode)?),
        ..SchedulePolicy::default()
    };
    let schedule = compile_schedule(&lowered, &machine, &policy)?;
    let budget = time_budget(&schedule);

    let exported: Value = serde_json::from_str(&schedule_to_json(&schedule, &machine.layout))
        .expect("schedule export is valid JSON");
    let run_config = json!({
        "command": "schedule",
        "circuit_path": args.circuit.display().to_string(),
        "mode": match machine.mode { MachineMode::N4 => "n4", MachineMode::N6 => "n6" },
        "noise": args.common.noise,
        "config_path": path_json(&args.common.config),
        "machine": machine_json(&machine),
    });
    let largest = budget
        .categories
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k.clone())
        .unwrap_or_default();
    let report = json!({
        "benchmark": "schedule",
        "config": run_config,
        "seed": Value::Null,
        "records": exported["events"],
        "summary": {
            "n_qubits": exported["n_qubits"],
            "mode": exported["mode"],
            "qubit_to_ion": exported["qubit_to_ion"],
            "final_permutation": exported["final_permutation"],
            "budget": serde_json::to_value(&budget).expect("budget serializes"),
            "largest_category": largest,
        },
        "pass": Value::Null,
    });
    let human = format!(
        "schedule {}: wall={:.2}us total={:.2}us largest={}",
        args.circuit.display(),
        budget.wall_us,
        budget.total_us,
        report["summary"]["largest_category"].as_str().unwrap_or("")
    );
    emit(report, &args.common.out, &human)?;
    Ok(Verdict::Pass)
}

fn cmd_config(args: ConfigArgs) -> Result<Verdict> {
    let machine = resolve_machine(&args.common, args.mode)?;
    let text = serialize_machine_config(&machine) + "\n";
    match &args.common.out {
        Some(path) => {
            fs::write(path, text)
                .with_context(|| format!("writing config {}", path.display()))?;
            eprintln!("config -> {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(Verdict::Pass)
}
