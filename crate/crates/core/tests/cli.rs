//! End-to-end checks of the command-line binary: exit-code contract,
//! JSON report shape, and determinism of the payloads.

use serde_json::Value;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crobstruct"))
}

fn surface(name: &str) -> String {
    format!("{}/../../surfaces/{}", env!("CARGO_MANIFEST_DIR"), name)
}

#[test]
fn trees_json_matches_schema() {
    let out = bin()
        .args(["trees", "--k", "2", "--output", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["payload"]["count"], 3);
    assert_eq!(v["payload"]["trees"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_q_quadric() {
    let out = bin()
        .args(["solve-q", "--surface", &surface("quadric.srf")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("(-2i)*z1*chi1"), "got: {text}");
}

#[test]
fn certify_family_not_embeddable() {
    let out = bin()
        .args([
            "certify",
            "--surface",
            &surface("m1.srf"),
            "--m",
            "1",
            "--alphas",
            "2,3",
            "--output",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["payload"]["verdict"], "NotEmbeddable");
    assert_eq!(v["payload"]["unconditional"], true);
    assert_eq!(v["payload"]["target_dimension"], 3);
}

#[test]
fn exit_codes() {
    // 2: parse error (unreadable file)
    let out = bin()
        .args(["solve-q", "--surface", "/nonexistent.srf"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // 2: malformed surface
    let dir = std::env::temp_dir().join("crobstruct_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.srf");
    std::fs::write(
        &bad,
        "surface x\nn 1\ncodim 1\nform real\ntrunc 4\nterm 1//2 z=[1] zb=[1] u=[]\n",
    )
    .unwrap();
    let out = bin()
        .args(["solve-q", "--surface", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // 3: precondition violation (empty alphas)
    let out = bin()
        .args([
            "relation",
            "--surface",
            &surface("quadric.srf"),
            "--alphas",
            "",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // 0 even for a "negative" mathematical verdict
    let out = bin()
        .args([
            "detcrit",
            "--surface",
            &surface("coupled4.srf"),
            "--alphas",
            "2,0,0,0;1,1,0,0",
            "--betas",
            "0,0,2,0;0,0,1,1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("A = 1"));
}

#[test]
fn codimension_two_solve_and_certify() {
    let out = bin().args(["solve-q", "--surface", &surface("pair2.srf")]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Q2 = (1)*tau2 + (-4i)*z1*chi1 + (-2i)*z1^2*chi1^2*tau1 + (-2)*z1^3*chi1^3"));
    let out = bin()
        .args([
            "certify",
            "--surface",
            &surface("pair2.srf"),
            "--m",
            "0",
            "--alphas",
            "2;3",
            "--output",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // one run per (order, component) pair, i0 recorded 1-based
    let runs = v["payload"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    assert!(runs.iter().any(|r| r["i0"] == 2));
}

#[test]
fn thread_cap_env_is_accepted() {
    let out = bin()
        .env("CROBSTRUCT_THREADS", "1")
        .args([
            "derivs",
            "--surface",
            &surface("quartic.srf"),
            "--kmax",
            "2",
            "--output",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["payload"]["exact"], true);
}

#[test]
fn reports_deterministic_modulo_timing() {
    let run = || -> Value {
        let out = bin()
            .args([
                "invariants",
                "--surface",
                &surface("quartic.srf"),
                "--kmax",
                "2",
                "--output",
                "json",
            ])
            .output()
            .unwrap();
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let mut a = run();
    let mut b = run();
    a.as_object_mut().unwrap().remove("timing_ms");
    b.as_object_mut().unwrap().remove("timing_ms");
    assert_eq!(a, b);
}
