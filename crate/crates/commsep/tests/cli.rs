//! Black-box checks of the installed binary: exit codes, report schema, and
//! reproducibility under a fixed seed.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_commsep"))
}

#[test]
fn exact_quantum_run_reports_block_marginals() {
    let out = bin()
        .args(["quantum", "--n", "8", "--mode", "exact", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["meta"]["seed"], serde_json::json!(3));
    assert_eq!(v["result"]["blocks"]["0"], serde_json::json!("1/2"));
    assert_eq!(v["result"]["blocks"]["2"], serde_json::json!("1/4"));
    assert_eq!(v["result"]["answer_prob"], serde_json::json!("63/128"));
}

#[test]
fn usage_errors_exit_with_code_two() {
    let odd = bin().args(["quantum", "--n", "6"]).output().unwrap();
    assert_eq!(odd.status.code(), Some(2));
    let empty = bin()
        .args(["quantum", "--n", "4", "--mode", "sampled", "--trials", "0"])
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(2));
    let unknown = bin().args(["validate", "--suite", "bogus"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn seed_env_var_sets_the_default_seed() {
    let out = bin()
        .args(["quantum", "--n", "4", "--mode", "exact"])
        .env("COMMSEP_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["meta"]["seed"], serde_json::json!(99));
}

#[test]
fn validator_suite_reports_and_exits_clean() {
    let out = bin()
        .args(["validate", "--suite", "cx", "--n", "8"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["claims"].as_array().unwrap().len() >= 3);
}

#[test]
fn same_flags_and_seed_give_identical_output() {
    let args = [
        "reduce", "--which", "iip-pad", "--n", "8", "--solver", "perfect", "--trials", "300",
        "--seed", "17",
    ];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
