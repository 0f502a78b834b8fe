//! End-to-end tests of the `dba` binary: exit codes, report formats, and the
//! conservation monitors.

use std::io::Write;
use std::process::{Command, Output};

use dba_core::corpus;

fn dba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dba"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn temp_lagrangian(name: &str, contents: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(format!("dba-cli-test-{name}.lag"));
    let mut f = std::fs::File::create(&path).expect("temp file");
    f.write_all(contents.as_bytes()).expect("write temp file");
    path
}

#[test]
fn analyze_prints_solved_multipliers() {
    let out = dba(&["analyze", "cubic-nls"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("lambda_1 = -phi*theta_xx - 2*phi_x*theta_x"), "{text}");
    assert!(text.contains("lambda_2 = 2*phi^2 - theta_x^2 + phi_xx/phi"), "{text}");
    assert!(text.contains("hessian rank: 0"), "{text}");
}

#[test]
fn analyze_emits_latex_labels() {
    let out = dba(&["analyze", "kdv", "--format", "latex"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\\tilde{c}_{1}"), "{text}");
    assert!(text.contains("\\pi_{\\phi}"), "{text}");
}

#[test]
fn json_report_round_trips_byte_identically() {
    let out = dba(&["analyze", "cubic-nls", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let parsed: serde_json::Value = serde_json::from_str(&text).expect("valid JSON");
    let reprinted = serde_json::to_string_pretty(&parsed).expect("serializes");
    assert_eq!(format!("{reprinted}\n"), text);
    assert!(parsed.get("multipliers").is_some());
}

#[test]
fn exit_codes_distinguish_failure_modes() {
    // exhausted sweep budget
    let out = dba(&["analyze", "kdv", "--max-iterations", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    // a consistency condition that demands a nonzero constant vanish
    let path = temp_lagrangian("inconsistent", "fields phi\nL = Dt(phi)*phi + phi\n");
    let out = dba(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("inconsistent dynamics"), "{}", stderr(&out));

    // quadratic velocity dependence
    let path = temp_lagrangian("regular", "fields phi\nL = 1/2*Dt(phi)^2\n");
    let out = dba(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("partially regular Lagrangians unsupported"),
        "{}",
        stderr(&out)
    );

    // syntax error with a position
    let path = temp_lagrangian("syntax", "fields phi\nL = Dt(phi *\n");
    let out = dba(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("column"), "{err}");

    // command-line usage errors are parse errors too, not to be confused
    // with the sweep-budget code
    let out = dba(&["evolve", "kdv", "--dt", "-1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out = dba(&["evolve", "kdv", "--dt=-1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("must be positive"), "{}", stderr(&out));
}

#[test]
fn unknown_input_suggests_builtins() {
    let out = dba(&["analyze", "not-a-system"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cubic-nls"), "{}", stderr(&out));
}

#[test]
fn verify_passes_at_coarse_resolution() {
    let out = dba(&["verify", "cubic-nls", "--grid", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# seed = 42"), "{text}");
    assert!(text.contains("max relative error"), "{text}");
    assert!(text.ends_with("PASS\n"), "{text}");
}

#[test]
fn verify_respects_seed_and_tolerance_flags() {
    let out = dba(&["verify", "kdv", "--grid", "64", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("# seed = 7"));

    // an unreachable tolerance flips the verdict but not the measurement
    let out = dba(&["verify", "kdv", "--grid", "64", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).ends_with("FAIL\n"), "{}", stdout(&out));
}

#[test]
fn verify_rejects_a_non_power_of_two_grid() {
    let out = dba(&["verify", "cubic-nls", "--grid", "100"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("power of two"), "{}", stderr(&out));
}

#[test]
fn evolve_emits_monitors_and_drift_summary() {
    let out = dba(&["evolve", "kdv", "--t-end", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("t,mass,hamiltonian"), "{text}");
    assert!(text.contains("# seed = 42"), "{text}");
    let drift_line = text
        .lines()
        .find(|l| l.starts_with("# max_rel_hamiltonian_drift = "))
        .expect("drift summary present");
    let drift: f64 =
        drift_line.trim_start_matches("# max_rel_hamiltonian_drift = ").parse().unwrap();
    assert!(drift < 1e-10, "{drift_line}");
    // one row per step plus the initial state
    let rows = text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count();
    assert_eq!(rows, 101);
}

#[test]
fn evolve_aborts_on_an_unstable_time_step() {
    let out = dba(&["evolve", "cubic-nls", "--dt", "1e-1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("instability abort at step"), "{err}");
}

#[test]
fn evolve_aborts_when_the_amplitude_background_collapses() {
    // the solitary amplitude profile decays to ~1e-9 far from its peak, and
    // the phase equation divides by it; the decaying background cannot
    // survive spectral rounding noise, so the run must stop with a step
    // index rather than report garbage monitors
    let out = dba(&["evolve", "cubic-nls", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("instability abort at step"), "{err}");
}

#[test]
fn evolve_refuses_a_flow_with_an_undetermined_multiplier() {
    let out = dba(&["evolve", "fourth-order-nls"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lambda_3"), "{}", stderr(&out));
}

#[test]
fn examples_reproduce_the_corpus_byte_for_byte() {
    let out = dba(&["examples"]);
    assert_eq!(out.status.code(), Some(0));
    let mut expected = String::new();
    for (name, source) in corpus::BUILTINS {
        expected.push_str(&format!("## {name}\n{source}\n"));
    }
    assert_eq!(stdout(&out), expected);
}

#[test]
fn help_documents_the_flag_surface() {
    for (cmd, flags) in [
        ("analyze", vec!["--format", "--max-iterations"]),
        ("verify", vec!["--grid", "--seed", "--tol", "--max-iterations"]),
        ("evolve", vec!["--grid", "--dt", "--t-end", "--seed", "--max-iterations"]),
    ] {
        let out = dba(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help is missing {flag}");
        }
    }
}
