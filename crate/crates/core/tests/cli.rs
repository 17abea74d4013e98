use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn qpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpl"))
        .args(args)
        .current_dir(root())
        .env_remove("QPL_TOL")
        .env_remove("QPL_FIX_TOL")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn weight(r: &Value, key: &str) -> f64 {
    r["output_state"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["key"] == key)
        .map_or(0.0, |b| b["trace"].as_f64().unwrap())
}

#[test]
fn coin_loop_terminates_almost_surely() {
    let out = qpl(&["run", "programs/coin.qpl"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["termination_weight"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let it = r["loops"][0]["iterations"].as_u64().unwrap();
    assert!((33..=36).contains(&it), "{it}");
    assert_eq!(r["converged"], true);
    assert!(r.get("wall_time_ms").is_none());
    for n in 0..=20 {
        let w = weight(&r, &n.to_string());
        assert!((w - 0.5f64.powi(n + 1)).abs() < 1e-6);
    }
}

#[test]
fn skip_returns_its_input() {
    let r = report(&qpl(&["run", "programs/skip.qpl", "--input", "0:0.3;1:0.7"]));
    assert_eq!(weight(&r, "0"), 0.3);
    assert_eq!(weight(&r, "1"), 0.7);
    assert_eq!(r["input_signature"], r["output_signature"]);
}

#[test]
fn malformed_program_exits_with_a_position() {
    let out = qpl(&["run", "programs/malformed.qpl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("malformed.qpl:4:1"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn user_errors_exit_with_two() {
    assert_eq!(qpl(&["run", "does/not/exist.qpl"]).status.code(), Some(2));
    // inputs required
    assert_eq!(qpl(&["run", "programs/teleport.qpl"]).status.code(), Some(2));
    assert_eq!(qpl(&["run", "programs/skip.qpl", "--input", "7:1"]).status.code(), Some(2));
    assert_eq!(qpl(&["run"]).status.code(), Some(2));
    assert_eq!(qpl(&["demo", "nope"]).status.code(), Some(2));
}

#[test]
fn both_pictures_record_the_duality_residual() {
    let out = qpl(&[
        "run",
        "programs/teleport.qpl",
        "--input",
        "0:[[0.6,0.2],[0.2,0.4]]",
        "--effect",
        "0:[[1,0],[0,0]]",
        "--picture",
        "both",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["duality_residual"].as_f64().unwrap() <= 1e-9);
    assert!((weight(&r, "0") - 1.0).abs() < 1e-12);
    let pre = &r["precondition"][0]["matrix"];
    assert!((pre[0][0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(pre[1][1][0].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn strict_mode_flags_non_convergence() {
    let lax = qpl(&["run", "programs/coin.qpl", "--max-iter", "5"]);
    assert_eq!(lax.status.code(), Some(0));
    assert_eq!(report(&lax)["converged"], false);
    let strict = qpl(&["run", "programs/coin.qpl", "--max-iter", "5", "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn environment_tolerance_is_used() {
    let out = Command::new(env!("CARGO_BIN_EXE_qpl"))
        .args(["run", "programs/coin.qpl"])
        .current_dir(root())
        .env("QPL_FIX_TOL", "1e-3")
        .output()
        .unwrap();
    let it = report(&out)["loops"][0]["iterations"].as_u64().unwrap();
    assert!(it < 15, "{it}");
}

#[test]
fn corpus_programs_check_green() {
    for p in ["teleport", "coin", "nat_add", "skip", "measure", "geometric_rec"] {
        let out = qpl(&["check", &format!("programs/{p}.qpl")]);
        let r = report(&out);
        assert_eq!(out.status.code(), Some(0), "{p}: {r}");
        assert_eq!(r["ok"], true);
        assert!(r["max_duality_residual"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn transpose_dump_fails_complete_positivity() {
    let out = qpl(&["check", "--arrow", "tests/fixtures/transpose.json"]);
    assert_eq!(out.status.code(), Some(4));
    let r = report(&out);
    assert_eq!(r["completely_positive"], false);
    assert!((r["min_choi_eigenvalue"].as_f64().unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn scaled_identity_dump_fails_trace_nonincreasing() {
    let out = qpl(&["check", "--arrow", "tests/fixtures/scaled_identity.json"]);
    assert_eq!(out.status.code(), Some(4));
    let r = report(&out);
    assert_eq!(r["completely_positive"], true);
    assert_eq!(r["trace_nonincreasing"], false);
}

#[test]
fn demos_match_their_closed_forms() {
    for name in ["teleport", "coin", "nat-add"] {
        let out = qpl(&["demo", name]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let r = report(&out);
        assert_eq!(r["comparison"]["passed"], true, "{name}: {}", r["comparison"]);
    }
    let r = report(&qpl(&["demo", "teleport"]));
    assert!(r["comparison"]["max_error"].as_f64().unwrap() < 1e-9);
    let r = report(&qpl(&["demo", "nat-add"]));
    assert_eq!(weight(&r, "5"), 1.0);
    let r = report(&qpl(&["demo", "coin"]));
    assert_eq!(r["comparison"]["table"].as_array().unwrap().len(), 21);
}

#[test]
fn reports_are_deterministic() {
    let a = qpl(&["check", "programs/teleport.qpl", "--seed", "9"]).stdout;
    let b = qpl(&["check", "programs/teleport.qpl", "--seed", "9"]).stdout;
    assert_eq!(a, b);
    let c = qpl(&["demo", "teleport", "--seed", "3"]).stdout;
    let d = qpl(&["demo", "teleport", "--seed", "3"]).stdout;
    assert_eq!(c, d);
}

#[test]
fn registered_gates_and_report_files() {
    let dir = std::env::temp_dir().join(format!("qpl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_file = dir.join("report.json");
    let out = qpl(&[
        "run",
        "tests/fixtures/sqrtx.qpl",
        "--gates",
        "tests/fixtures/gates.json",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((weight(&r, "1") - 1.0).abs() < 1e-12);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(saved, r);
    // without the registration the gate is unknown
    assert_eq!(qpl(&["run", "tests/fixtures/sqrtx.qpl"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unrolled_run_is_below_the_loop() {
    let r = report(&qpl(&["run", "programs/coin.qpl", "--unroll", "3"]));
    assert_eq!(r["converged"], false);
    let w = r["termination_weight"].as_f64().unwrap();
    // three passes: exits with n = 0, 1, 2 only
    assert!((w - 0.875).abs() < 1e-12, "{w}");
}
