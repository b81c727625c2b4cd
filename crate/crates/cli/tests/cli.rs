use std::process::{Command, Output};

use serde_json::Value;

fn padyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn residues_at_the_defaults() {
    let out = padyn(&["residues", "--p", "5", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["order"], 4);
    assert_eq!(v["table"].as_array().unwrap().len(), 4);
    assert_eq!(v["v_map_injective"], false);
}

#[test]
fn non_prime_is_a_usage_error() {
    let out = padyn(&["residues", "--p", "4", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not prime"));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_levels_and_subcommands_are_usage_errors() {
    assert_eq!(padyn(&["residues", "--n", "40"]).status.code(), Some(2));
    assert_eq!(padyn(&["ellis", "--m", "9"]).status.code(), Some(2));
    assert_eq!(padyn(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(padyn(&["flows", "--group", "gl2"]).status.code(), Some(2));
    assert_eq!(
        padyn(&["iwasawa", "--matrix", "[1,2]"]).status.code(),
        Some(2)
    );
}

#[test]
fn flows_report_two_minimal_subflows_for_gm() {
    let out = padyn(&["flows", "--group", "gm", "--p", "5", "--n", "2", "--w", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let minimal = v["minimal_subflows"].as_array().unwrap();
    assert_eq!(minimal.len(), 2);
    assert!(minimal.iter().all(|m| m.as_array().unwrap().len() == 4));
}

#[test]
fn borel_table() {
    let v = json(&padyn(&["borel", "--p", "5", "--n", "3"]));
    assert_eq!(v["order"], 3);
    assert_eq!(v["idempotent_check"], true);
    assert_eq!(v["iso_to_residue_group"], true);
}

#[test]
fn iwasawa_worked_example() {
    let out = padyn(&[
        "iwasawa",
        "--p",
        "5",
        "--matrix",
        r#"[["1","0"],["1/5","1"]]"#,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reconstructs"], true);
    assert_eq!(v["t"], serde_json::json!([["5", "-1"], ["1", "0"]]));
}

#[test]
fn iwasawa_rejects_singular_input() {
    let out = padyn(&["iwasawa", "--matrix", r#"[["1","2"],["2","4"]]"#]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn minimal_flow_and_ellis() {
    let v = json(&padyn(&[
        "minimal-flow",
        "--p",
        "5",
        "--n",
        "2",
        "--m",
        "1",
    ]));
    assert_eq!(v["size"], 480);
    assert_eq!(v["strongly_connected"], true);
    assert_eq!(v["idempotent"], true);
    assert_eq!(v["ellis"]["order"], 4);

    let v = json(&padyn(&["ellis", "--n", "4", "--tower"]));
    assert_eq!(v["iso_checks"]["homomorphism"], true);
    assert_eq!(v["tower_commutes"], true);
    assert_eq!(v["tower"].as_array().unwrap().len(), 3);
}

#[test]
fn projective_line() {
    let v = json(&padyn(&["proj", "collapse"]));
    assert_eq!(v["collapses"], true);
    let v = json(&padyn(&[
        "proj", "minimal", "--p", "5", "--n", "2", "--w", "2", "--m", "1",
    ]));
    assert_eq!(v["states"], 120);
    assert_eq!(v["strongly_connected"], true);
    assert_eq!(v["proximal"], true);
}

#[test]
fn verify_is_byte_identical_across_runs() {
    let args = [
        "verify",
        "--criterion",
        "7",
        "--p",
        "5",
        "--n",
        "2",
        "--m",
        "1",
        "--w",
        "2",
    ];
    let a = padyn(&args);
    let b = padyn(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["passed"], true);
    assert_eq!(v["config"]["window"], 2);
    assert_eq!(v["suites"][0]["id"], 7);
    assert!(v["seed"].is_u64());
}

#[test]
fn seed_is_echoed() {
    let out = Command::new(env!("CARGO_BIN_EXE_padyn"))
        .args(["verify", "--criterion", "5"])
        .env("PADYN_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["seed"], 17);
}
