//! Proof of strong incrementality at the process boundary: each word's
//! edit script arrives before the next word is ever written, so the
//! detector cannot be buffering lookahead.

mod common;

use common::{bin, synth_corpus, train_bundle};
use std::io::{BufRead, BufReader, Write};
use std::process::Stdio;
use std::sync::mpsc;
use std::time::Duration;

const PATIENCE: Duration = Duration::from_secs(30);

#[test]
fn each_script_arrives_before_the_next_word_is_sent() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 50, 21);
    let bundle = train_bundle(dir.path(), &corpus, 3, 8);

    let mut child = bin()
        .args(["detect", "--bundle", bundle.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let stdout = child.stdout.take().unwrap();

    // A reader thread forwards output lines; the test thread then waits
    // on the channel, so a detector that held its script back until
    // more input arrived would time the test out.
    let (sender, receiver) = mpsc::channel::<String>();
    let reader = std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if sender.send(line.expect("readable output")).is_err() {
                break;
            }
        }
    });

    let words = [("a", "DT"), ("small", "JJ"), ("test", "NN"), ("here", "RB")];
    for (i, (word, tag)) in words.iter().enumerate() {
        writeln!(stdin, "{word}\t{tag}").unwrap();
        stdin.flush().unwrap();
        let line = receiver
            .recv_timeout(PATIENCE)
            .unwrap_or_else(|_| panic!("no script for word {i} without further input"));
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(value["index"], i);
        assert_eq!(value["word"], *word);
    }

    // The boundary record must also arrive before any further input.
    writeln!(stdin).unwrap();
    stdin.flush().unwrap();
    let line = receiver.recv_timeout(PATIENCE).expect("boundary record");
    let value: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(value["boundary"], true);

    drop(stdin);
    reader.join().unwrap();
    assert!(child.wait().unwrap().success());
}
