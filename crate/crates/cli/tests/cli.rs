// SPDX-License-Identifier: Apache-2.0
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use debugfabric_cli::project::*;
use debugfabric_cli::stats::ProjectStats;
use debugfabric_cli::{run_pipeline, Outcome, OverlayReport, Status, VerifyReport};
use debugfabric_core::debug::DebugConfig;
use debugfabric_core::fabric::ArchSpec;
use debugfabric_core::pnr::{MinWidthResult, Placement, Routing};
use debugfabric_core::trace::OverlayForest;
use debugfabric_core::trigger::{OverlayFabric, TriggerMapping};

fn run(dir: &Path, args: &[&str]) -> Outcome {
    let d = dir.to_str().unwrap();
    run_pipeline(["debugfabric", "--dir", d].iter().chain(args))
}

fn ok(dir: &Path, args: &[&str]) -> Outcome {
    let o = run(dir, args);
    assert_eq!(o.status, Status::Success, "{args:?}: {}", o.summary);
    o
}

/// Compile flow on syn50 up to both overlays.
fn compiled(dir: &Path) {
    ok(dir, &["gen-arch", "--suite", "syn50"]);
    ok(dir, &["synth-random", "--suite", "syn50"]);
    ok(dir, &["pnr"]);
    ok(dir, &["build-trace-overlay"]);
    ok(dir, &["build-trigger-fabric"]);
}

fn bytes(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn hash(dir: &Path, name: &str) -> String {
    sha256_hex(&bytes(dir, name))
}

fn round_trips<T: Serialize + DeserializeOwned>(dir: &Path, name: &str) {
    let text = String::from_utf8(bytes(dir, name)).unwrap();
    let v: T = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert_eq!(to_json(&v).unwrap(), text, "{name}");
}

#[test]
fn selection_is_repeatable_and_leaves_the_user_circuit_alone() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path();
    compiled(dir);
    let before: Vec<String> = [PLACEMENT, ROUTING, OVERLAY].iter().map(|n| hash(dir, n)).collect();
    let o = run(dir, &["select-signals", "--random", "6", "--seed", "3"]);
    assert!(matches!(o.status, Status::Success | Status::Partial), "{}", o.summary);
    let first = bytes(dir, DEBUG_CONFIG);
    run(dir, &["select-signals", "--random", "6", "--seed", "3"]);
    assert_eq!(bytes(dir, DEBUG_CONFIG), first);

    ok(dir, &["synth-trigger", "--les", "4", "--seed", "2"]);
    let o = run(dir, &["map-trigger", "--seed", "2"]);
    assert!(matches!(o.status, Status::Success | Status::Partial | Status::AlgorithmicFailure), "{}", o.summary);
    let after: Vec<String> = [PLACEMENT, ROUTING, OVERLAY].iter().map(|n| hash(dir, n)).collect();
    assert_eq!(before, after);
    ok(dir, &["verify"]);
}

#[test]
fn unknown_signal_is_a_validation_error_naming_it() {
    let t = tempfile::tempdir().unwrap();
    compiled(t.path());
    let o = run(t.path(), &["select-signals", "--want", "unknown_sig"]);
    assert_eq!(o.status, Status::ValidationError);
    assert_eq!(o.summary["exit_code"], 2);
    assert!(o.summary["error"].as_str().unwrap().contains("unknown_sig"), "{}", o.summary);
    assert!(!t.path().join(DEBUG_CONFIG).exists());
}

#[test]
fn every_artifact_round_trips() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path();
    compiled(dir);
    ok(dir, &["minw"]);
    run(dir, &["select-signals", "--random", "4"]);
    ok(dir, &["synth-trigger"]);
    run(dir, &["map-trigger"]);
    ok(dir, &["verify"]);
    ok(dir, &["stats"]);
    round_trips::<ArchSpec>(dir, ARCH);
    round_trips::<Placement>(dir, PLACEMENT);
    round_trips::<Routing>(dir, ROUTING);
    round_trips::<MinWidthResult>(dir, MINW);
    round_trips::<OverlayForest>(dir, OVERLAY);
    round_trips::<OverlayFabric>(dir, TRIGGER_FABRIC);
    round_trips::<DebugConfig>(dir, DEBUG_CONFIG);
    round_trips::<TriggerMapping>(dir, TRIGGER_CONFIG);
    round_trips::<ProjectStats>(dir, STATS);
    round_trips::<Manifest>(dir, MANIFEST);
    round_trips::<OverlayReport>(dir, OVERLAY_REPORT);
    round_trips::<VerifyReport>(dir, VERIFY_REPORT);
    // The manifest records a hash for every artifact and it matches.
    let m: Manifest = serde_json::from_slice(&bytes(dir, MANIFEST)).unwrap();
    for (name, rec) in &m.artifacts {
        assert_eq!(hash(dir, name), rec.sha256, "{name}");
    }
}

#[test]
fn stale_inputs_are_refused() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path();
    compiled(dir);
    // Hand-edited artifact.
    let mut r = fs::read_to_string(dir.join(ROUTING)).unwrap();
    r.push('\n');
    fs::write(dir.join(ROUTING), &r).unwrap();
    let o = run(dir, &["build-trace-overlay"]);
    assert_eq!(o.status, Status::ValidationError);
    assert!(o.summary["error"].as_str().unwrap().contains("modified"), "{}", o.summary);

    // Upstream input regenerated with different content.
    ok(dir, &["pnr"]);
    ok(dir, &["build-trace-overlay"]);
    ok(dir, &["synth-random", "--luts", "50", "--seed", "99"]);
    let o = run(dir, &["select-signals", "--random", "2"]);
    assert_eq!(o.status, Status::ValidationError, "{}", o.summary);
    assert!(o.summary["error"].as_str().unwrap().contains("stale"), "{}", o.summary);
}

#[test]
fn missing_inputs_and_bad_flags_are_validation_errors() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["pnr"]);
    assert_eq!(o.status, Status::ValidationError);
    assert!(o.summary["error"].as_str().unwrap().contains("missing"), "{}", o.summary);
    assert_eq!(run(t.path(), &["select-signals"]).status, Status::ValidationError);
    assert_eq!(run(t.path(), &["gen-arch", "--suite", "nope"]).status, Status::ValidationError);
    let h = run(t.path(), &["--help"]);
    assert_eq!(h.status, Status::Success);
    assert!(h.text.unwrap().contains("select-signals"));
}

#[test]
fn too_narrow_a_channel_is_an_algorithmic_failure() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path();
    ok(dir, &["gen-arch", "--suite", "syn110"]);
    ok(dir, &["synth-random", "--suite", "syn110"]);
    let o = run(dir, &["pnr", "--width", "2"]);
    assert_eq!(o.status, Status::AlgorithmicFailure, "{}", o.summary);
    assert_eq!(o.summary["exit_code"], 3);
}

#[test]
fn stats_table_is_text() {
    let t = tempfile::tempdir().unwrap();
    compiled(t.path());
    let o = ok(t.path(), &["stats", "--table"]);
    assert!(o.text.is_some_and(|s| !s.trim().is_empty()));
}
