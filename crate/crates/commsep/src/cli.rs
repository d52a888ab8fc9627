//! Command-line front end: simulation, validation, reduction, and
//! rectangle-analysis workflows with reproducible seeding and
//! machine-readable output.
//!
//! Exit-code contract: 0 success, 1 claim failure, 2 usage error, 3 internal
//! invariant violation. Every report carries the master seed in its header,
//! so any run is reproducible from one line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::analysis::{self, Report};
use crate::problems::{sample_pin_with, DistributionSpec};
use crate::protocols::{
    extract_rectangles, is_delta_labeled, razborov_masses, rectangle_stats, PairShape,
    ProtocolTree, RazDistribution,
};
use crate::quantum::{self, QuantumOutcome};
use crate::reductions::{
    reduce_iip_padding, reduce_in2ii, sample_overlap_pair, PerfectPiipSolver, PerfectPinSolver,
    PiipSolver, PinSolver, PsTreeSolver, QuantumPinSolver, RefusePiipSolver, RefusePinSolver,
    Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLAIM_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "commsep",
    version,
    about = "Desk-scale laboratory for one-way quantum vs. classical protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the one-way quantum protocol on a sampled instance.
    Quantum(QuantumArgs),
    /// Run a validator suite and report pass/fail per claim.
    Validate(ValidateArgs),
    /// Run a reduction with Monte Carlo measurement.
    Reduce(ReduceArgs),
    /// Extract and analyze transcript rectangles of a protocol tree.
    Rectangles(RectanglesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Args)]
struct Common {
    /// Problem size n (a power of two, at least 4).
    #[arg(long, default_value_t = 8)]
    n: u32,
    /// Master seed for all randomness in the run.
    #[arg(long, env = "COMMSEP_SEED", default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trial count.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; both formats carry the same values.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct QuantumArgs {
    #[command(flatten)]
    common: Common,
    /// Exact state-vector distribution or sampled runs.
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// One of: cx, quantum, chernoff, in2ii, separation, all.
    #[arg(long, default_value = "all")]
    suite: String,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    /// One of: in2ii, ii2iip, iip-pad.
    #[arg(long)]
    which: String,
    /// One of: quantum, perfect, refuse, tree:<file>.
    #[arg(long, default_value = "quantum")]
    solver: String,
    /// Output size t for the padded-intersection reduction.
    #[arg(long, default_value_t = 2)]
    t: usize,
    /// Planted intersection size i0 for the padded-intersection reduction.
    #[arg(long, default_value_t = 2)]
    i0: u32,
    /// Failure budget gamma for the ii2iip reduction.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Heaviness threshold delta for the ii2iip reduction (default 1/k^2).
    #[arg(long)]
    delta: Option<f64>,
    /// Emit the full per-run reduction traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct RectanglesArgs {
    #[command(flatten)]
    common: Common,
    /// Builtin tree (trivial, constant-empty, verbatim, min-parity) or a
    /// path to a protocol-tree JSON file.
    #[arg(long, default_value = "trivial")]
    tree: String,
    /// Report delta-label verdicts at this threshold.
    #[arg(long)]
    delta: Option<f64>,
}

/// A failed run, with the exit code it maps to.
enum Failure {
    Usage(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Internal(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn internal(err: impl std::fmt::Display) -> Failure {
    Failure::Internal(err.to_string())
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Quantum(a) => cmd_quantum(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Rectangles(a) => cmd_rectangles(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn check_n(n: u32) -> Result<(), Failure> {
    if n < 4 || !n.is_power_of_two() {
        return Err(usage(format!("n must be a power of two >= 4, got {n}")));
    }
    Ok(())
}

/// Serialize a JSON value as flat `key,value` CSV rows (same values as the
/// JSON form, dotted paths for nesting).
fn flatten_csv(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), child, out);
                }
            }
            leaf => {
                let text = match leaf {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                let text = if text.contains(',') || text.contains('"') || text.contains('\n') {
                    format!("\"{}\"", text.replace('"', "\"\""))
                } else {
                    text
                };
                out.push_str(&format!("{prefix},{text}\n"));
            }
        }
    }
    let mut out = String::from("key,value\n");
    walk("", value, &mut out);
    out
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(internal),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_value(common: &Common, value: &Value) -> Result<(), Failure> {
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(value).map_err(internal)?,
        Format::Csv => flatten_csv(value),
    };
    emit(common, &text)
}

fn emit_report(common: &Common, report: &Report) -> Result<i32, Failure> {
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Csv => {
            // Prepend the seed header as a comment row so both formats carry
            // the reproduction line.
            format!("# seed,{}\n{}", report.meta.seed, report.to_csv())
        }
    };
    emit(common, &text)?;
    Ok(if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_CLAIM_FAILURE
    })
}

// ---------------------------------------------------------------------------
// quantum

fn cmd_quantum(a: &QuantumArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let inst = sample_pin_with(n, &mut rng).map_err(internal)?;
    let result = match a.mode {
        Mode::Exact => {
            if n > 64 {
                return Err(usage(format!("exact mode is limited to n <= 64, got {n}")));
            }
            quantum::run_exact(&inst).map_err(internal)?.to_json()
        }
        Mode::Sampled => {
            if a.common.trials == 0 {
                return Err(usage("sampled mode needs at least one trial"));
            }
            let blocks = (n / 4) as usize;
            let mut per_block = vec![0u64; blocks];
            let mut refused = 0u64;
            for _ in 0..a.common.trials {
                match quantum::run_sampled_with(&inst, &mut rng) {
                    QuantumOutcome::Answer { block, .. } => per_block[block - 1] += 1,
                    QuantumOutcome::Refuse => refused += 1,
                }
            }
            let trials = a.common.trials as f64;
            json!({
                "trials": a.common.trials,
                "answer_rate": (a.common.trials - refused) as f64 / trials,
                "refusal_rate": refused as f64 / trials,
                "block_rates": per_block
                    .iter()
                    .map(|&c| c as f64 / trials)
                    .collect::<Vec<_>>(),
            })
        }
    };
    let report = json!({
        "meta": {
            "seed": a.common.seed,
            "n": n,
            "mode": match a.mode { Mode::Exact => "exact", Mode::Sampled => "sampled" },
        },
        "result": result,
    });
    emit_value(&a.common, &report)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// validate

fn cmd_validate(a: &ValidateArgs) -> Result<i32, Failure> {
    check_n(a.common.n)?;
    let ids: Vec<String> = match a.suite.as_str() {
        "all" => ["cx", "quantum", "chernoff", "in2ii", "separation"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        one => vec![one.to_string()],
    };
    let report = analysis::run_experiment(&ids, a.common.n, a.common.trials, a.common.seed)
        .map_err(|e| match e {
            analysis::AnalysisError::UnknownClaim(id) => usage(format!("unknown suite: {id}")),
            analysis::AnalysisError::BadParameter(m) => usage(m),
            other => internal(other),
        })?;
    emit_report(&a.common, &report)
}

// ---------------------------------------------------------------------------
// reduce

fn pin_solver(name: &str) -> Result<Box<dyn PinSolver>, Failure> {
    match name {
        "quantum" => Ok(Box::new(QuantumPinSolver)),
        "perfect" => Ok(Box::new(PerfectPinSolver)),
        "refuse" => Ok(Box::new(RefusePinSolver)),
        other => Err(usage(format!(
            "the in2ii reduction takes --solver quantum|perfect|refuse, got {other}"
        ))),
    }
}

fn load_tree(spec: &str, n: u32) -> Result<ProtocolTree, Failure> {
    let shape = PairShape::ps(n).map_err(internal)?;
    match spec {
        "trivial" => Ok(ProtocolTree::trivial(shape)),
        "constant-empty" => Ok(ProtocolTree::constant_empty(shape)),
        "verbatim" => Ok(ProtocolTree::alice_verbatim(shape)),
        "min-parity" => Ok(ProtocolTree::min_parity(shape)),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read tree file {path}: {e}")))?;
            let tree: ProtocolTree = serde_json::from_str(&text)
                .map_err(|e| usage(format!("malformed tree file {path}: {e}")))?;
            tree.validate().map_err(|e| usage(e.to_string()))?;
            Ok(tree)
        }
    }
}

fn cmd_reduce(a: &ReduceArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    check_n(n)?;
    if a.common.trials == 0 {
        return Err(usage("at least one trial is required"));
    }
    match a.which.as_str() {
        "in2ii" => reduce_in2ii_cmd(a),
        "ii2iip" => reduce_ii2iip_cmd(a),
        "iip-pad" => reduce_iip_pad_cmd(a),
        other => Err(usage(format!(
            "unknown reduction: {other} (expected in2ii, ii2iip, or iip-pad)"
        ))),
    }
}

fn reduce_in2ii_cmd(a: &ReduceArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    if n < 8 {
        return Err(usage("the in2ii reduction needs n >= 8"));
    }
    let solver = pin_solver(&a.solver)?;
    if a.trace {
        let spec = DistributionSpec::conditioned(n, &[2]).map_err(internal)?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
        let mut runs = Vec::new();
        for _ in 0..a.common.trials {
            let inst = spec.sample_with(&mut rng).map_err(internal)?;
            let run = reduce_in2ii(&inst, solver.as_ref(), rng.random::<u64>())
                .map_err(internal)?;
            runs.push(json!({
                "answered": run.answer.is_some(),
                "trace": run.trace.to_json(),
            }));
        }
        let report = json!({
            "meta": { "seed": a.common.seed, "n": n, "solver": a.solver, "trials": a.common.trials },
            "runs": runs,
        });
        emit_value(&a.common, &report)?;
        return Ok(EXIT_OK);
    }
    let claims = analysis::validate_in2ii(n, a.common.trials, a.common.seed, solver.as_ref())
        .map_err(internal)?;
    let report = Report::new(claims, a.common.seed, 0);
    emit_report(&a.common, &report)
}

fn reduce_ii2iip_cmd(a: &ReduceArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    let tree_spec = a
        .solver
        .strip_prefix("tree:")
        .ok_or_else(|| usage("the ii2iip reduction takes --solver tree:<builtin-or-file>"))?;
    let tree = load_tree(tree_spec, n)?;
    let solver = PsTreeSolver::new(tree).map_err(|e| usage(e.to_string()))?;
    let delta = a
        .delta
        .map(|d| {
            BigRational::from_float(d)
                .ok_or_else(|| usage(format!("delta must be a finite positive value, got {d}")))
        })
        .transpose()?;
    if !(a.gamma > 0.0 && a.gamma <= 1.0) {
        return Err(usage(format!("gamma must lie in (0, 1], got {}", a.gamma)));
    }

    let spec = DistributionSpec::conditioned(n, &[2]).map_err(internal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut answered = 0u64;
    let mut wrong = 0u64;
    let mut traces = Vec::new();
    for _ in 0..a.common.trials {
        let inst = spec.sample_with(&mut rng).map_err(internal)?;
        let run = crate::reductions::reduce_ii2iip(
            &inst,
            &solver,
            a.gamma,
            delta.clone(),
            rng.random::<u64>(),
        )
        .map_err(internal)?;
        if let Some(pair) = run.answer {
            answered += 1;
            if pair.as_slice() != inst.intersection().as_slice() {
                wrong += 1;
            }
        }
        if a.trace {
            traces.push(run.trace.to_json());
        }
    }
    let mut report = json!({
        "meta": { "seed": a.common.seed, "n": n, "solver": a.solver, "trials": a.common.trials,
                  "gamma": a.gamma },
        "result": {
            "answer_rate": answered as f64 / a.common.trials as f64,
            "answered": answered,
            "wrong_answers": wrong,
        },
    });
    if a.trace {
        report["runs"] = Value::Array(traces);
    }
    emit_value(&a.common, &report)?;
    Ok(if wrong == 0 { EXIT_OK } else { EXIT_CLAIM_FAILURE })
}

fn reduce_iip_pad_cmd(a: &ReduceArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    let solver: Box<dyn PiipSolver> = match a.solver.as_str() {
        "perfect" | "quantum" => Box::new(PerfectPiipSolver),
        "refuse" => Box::new(RefusePiipSolver),
        other => {
            return Err(usage(format!(
                "the iip-pad reduction takes --solver perfect|refuse, got {other}"
            )))
        }
    };
    if a.i0 >= n / 2 {
        return Err(usage(format!("i0 must be below n/2, got {}", a.i0)));
    }
    let m = n * n - a.i0;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut zero = [0u64; 2];
    for class in 0..2u32 {
        for _ in 0..a.common.trials {
            let (xp, yp) =
                sample_overlap_pair(m, n / 2 - a.i0, n - a.i0, class, &mut rng).map_err(internal)?;
            let v = reduce_iip_padding(n, a.i0, a.t, &xp, &yp, solver.as_ref(), rng.random::<u64>())
                .map_err(internal)?;
            if v == Verdict::Zero {
                zero[class as usize] += 1;
            }
        }
    }
    let trials = a.common.trials as f64;
    let rate0 = zero[0] as f64 / trials;
    let rate1 = zero[1] as f64 / trials;
    let report = json!({
        "meta": { "seed": a.common.seed, "n": n, "solver": a.solver, "trials": a.common.trials,
                  "t": a.t, "i0": a.i0 },
        "result": {
            "zero_rate_x0": rate0,
            "zero_rate_x1": rate1,
            "ratio": if rate0 > 0.0 { Some(rate1 / rate0) } else { None },
            "expected_ratio": 1.0 - a.t as f64 / (a.i0 as f64 + 1.0),
        },
    });
    emit_value(&a.common, &report)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// rectangles

fn cmd_rectangles(a: &RectanglesArgs) -> Result<i32, Failure> {
    let n = a.common.n;
    check_n(n)?;
    let tree = load_tree(&a.tree, n)?;
    let partition = extract_rectangles(&tree).map_err(|e| match e {
        crate::protocols::ProtocolError::TooLargeForExhaustive(p) => {
            usage(format!("input space too large for exhaustive extraction ({p} pairs)"))
        }
        crate::protocols::ProtocolError::NotDeterministic => {
            usage("fix the tree's public coins before extraction")
        }
        other => internal(other),
    })?;
    let shape = partition.shape;
    let delta = a
        .delta
        .map(|d| {
            BigRational::from_float(d)
                .ok_or_else(|| usage(format!("delta must be a finite value, got {d}")))
        })
        .transpose()?;
    let raz = RazDistribution::Product {
        n: shape.ground,
        k1: shape.alice_k,
        k2: shape.bob_k,
    };

    let mut rows = Vec::new();
    let mut labeled = 0u64;
    for rect in &partition.rectangles {
        let stats = rectangle_stats(&shape, rect).map_err(internal)?;
        let masses = razborov_masses(&shape, rect, &raz).map_err(internal)?;
        let mut row = json!({
            "leaf": rect.leaf,
            "transcript": rect.transcript,
            "alice_side": stats.alice_side,
            "bob_side": stats.bob_side,
            "overlap_counts": stats.overlap_counts.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "razborov": {
                "x0": masses.x0.to_string(),
                "x1": masses.x1.to_string(),
                "ratio": masses.ratio.map(|r| r.to_string()),
            },
        });
        if let Some(d) = &delta {
            let lab = is_delta_labeled(&shape, rect, d).map_err(internal)?;
            labeled += lab as u64;
            row["delta_labeled"] = json!(lab);
        }
        rows.push(row);
    }
    let mut report = json!({
        "meta": { "seed": a.common.seed, "n": n, "tree": a.tree },
        "shape": shape,
        "rectangles": rows,
    });
    if let Some(d) = a.delta {
        report["delta_labels"] = json!({
            "delta": d,
            "labeled": labeled,
            "total": partition.rectangles.len(),
        });
    }
    emit_value(&a.common, &report)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_file(args: &[&str]) -> (i32, String) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out");
        let mut full: Vec<String> = vec!["commsep".into()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.push("--out".into());
        full.push(path.to_str().unwrap().into());
        let code = run_from(full);
        let text = fs::read_to_string(&path).unwrap_or_default();
        (code, text)
    }

    #[test]
    fn quantum_exact_reports_block_probabilities() {
        let (code, text) = run_to_file(&["quantum", "--n", "8", "--mode", "exact"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["meta"]["seed"], json!(0));
        let blocks = v["result"]["blocks"].as_object().unwrap();
        assert_eq!(blocks["0"], json!("1/2"));
        assert_eq!(blocks["1"], json!("1/4"));
    }

    #[test]
    fn quantum_rejects_zero_sampled_trials_and_bad_n() {
        let code = run_from(["commsep", "quantum", "--n", "4", "--mode", "sampled", "--trials", "0"]);
        assert_eq!(code, EXIT_USAGE);
        let code = run_from(["commsep", "quantum", "--n", "5"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn identical_invocations_are_identical_files() {
        let args = ["quantum", "--n", "4", "--mode", "sampled", "--trials", "200", "--seed", "7"];
        let (c1, t1) = run_to_file(&args);
        let (c2, t2) = run_to_file(&args);
        assert_eq!(c1, EXIT_OK);
        assert_eq!(c2, EXIT_OK);
        assert_eq!(t1, t2);
    }

    #[test]
    fn validate_quantum_suite_passes() {
        let (code, text) = run_to_file(&[
            "validate", "--suite", "quantum", "--n", "8", "--trials", "2000",
        ]);
        assert_eq!(code, EXIT_OK);
        let report: Report = serde_json::from_str(&text).unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn validate_unknown_suite_is_usage_error() {
        let code = run_from(["commsep", "validate", "--suite", "nope"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn validate_csv_carries_the_seed_header() {
        let (code, text) = run_to_file(&[
            "validate", "--suite", "cx", "--n", "8", "--format", "csv", "--seed", "11",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(text.starts_with("# seed,11\n"));
        assert!(text.contains("cX.X0"));
    }

    #[test]
    fn reduce_trace_emits_full_traces() {
        let (code, text) = run_to_file(&[
            "reduce", "--which", "in2ii", "--n", "8", "--solver", "perfect", "--trials", "1",
            "--trace",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        let runs = v["runs"].as_array().unwrap();
        assert_eq!(runs.len(), 1);
        let stages = runs[0]["trace"].as_array().unwrap();
        assert!(stages.iter().any(|s| s["stage"] == json!("sigma2")));
    }

    #[test]
    fn reduce_iip_pad_reports_the_gap() {
        let (code, text) = run_to_file(&[
            "reduce", "--which", "iip-pad", "--n", "8", "--solver", "perfect", "--trials", "500",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["result"]["zero_rate_x0"], json!(1.0));
        let expected = v["result"]["expected_ratio"].as_f64().unwrap();
        assert!((expected - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reduce_ii2iip_with_builtin_tree_is_zero_error() {
        let (code, text) = run_to_file(&[
            "reduce", "--which", "ii2iip", "--n", "4", "--solver", "tree:verbatim", "--trials",
            "50",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["result"]["wrong_answers"], json!(0));
    }

    #[test]
    fn rectangles_trivial_tree_is_one_full_rectangle() {
        let (code, text) = run_to_file(&[
            "rectangles", "--n", "4", "--tree", "trivial", "--delta", "0.25",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        let rects = v["rectangles"].as_array().unwrap();
        assert_eq!(rects.len(), 1);
        assert_eq!(rects[0]["alice_side"], json!(120));
        assert_eq!(rects[0]["bob_side"], json!(1820));
        assert_eq!(v["delta_labels"]["total"], json!(1));
    }

    #[test]
    fn rectangles_loads_a_tree_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.json");
        let tree = ProtocolTree::min_parity(PairShape::ps(4).unwrap());
        fs::write(&path, serde_json::to_string(&tree).unwrap()).unwrap();
        let (code, text) = run_to_file(&["rectangles", "--n", "4", "--tree", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["rectangles"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn csv_flattening_carries_the_same_values() {
        let v = json!({"meta": {"seed": 3}, "result": {"rates": [0.5, 0.25], "note": "a,b"}});
        let csv = flatten_csv(&v);
        assert!(csv.contains("meta.seed,3\n"));
        assert!(csv.contains("result.rates.0,0.5\n"));
        assert!(csv.contains("result.note,\"a,b\"\n"));
    }
}
