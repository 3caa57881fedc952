//! Shared helpers for driving the installed binary in tests.

// Each integration-test target compiles this module separately and
// none of them uses every helper.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disfluency"))
}

/// Runs the binary and panics unless it exits cleanly; returns stdout.
pub fn run_ok(args: &[&str]) -> String {
    let output = bin().args(args).output().expect("spawn binary");
    assert!(
        output.status.success(),
        "`{}` failed.\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    String::from_utf8(output.stdout).expect("utf-8 stdout")
}

/// Runs the binary expecting failure; returns the exit code and stderr.
pub fn run_err(args: &[&str]) -> (i32, String) {
    let Output { status, stderr, .. } = bin().args(args).output().expect("spawn binary");
    assert!(!status.success(), "`{}` unexpectedly succeeded", args.join(" "));
    (
        status.code().expect("exit code"),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

/// Generates a small annotated corpus under `dir`.
pub fn synth_corpus(dir: &Path, utterances: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("corpus-{utterances}-{seed}.txt"));
    run_ok(&[
        "synth",
        "--out",
        path.to_str().unwrap(),
        "--utterances",
        &utterances.to_string(),
        "--vocab",
        "40",
        "--repair-rate",
        "0.2",
        "--edit-rate",
        "0.1",
        "--seed",
        &seed.to_string(),
    ]);
    path
}

/// Trains a bundle from `corpus` into a directory under `dir`.
pub fn train_bundle(dir: &Path, corpus: &Path, folds: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("bundle-{folds}-{seed}"));
    run_ok(&[
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--folds",
        &folds.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    out
}
