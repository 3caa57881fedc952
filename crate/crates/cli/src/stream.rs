//! Streaming detection: reads word/tag lines, emits one JSON edit
//! script per word, and never looks ahead — every script is flushed
//! before the next line is read.

use anyhow::{Context, Result};
use disfluency::pipeline::{Detector, ForestDecider};
use disfluency::train::DetectorBundle;
use serde_json::json;
use std::io::{BufRead, Write};

/// Runs the detector over a line stream. Each line is `word` and
/// `tag` separated by whitespace; a blank line ends the utterance and
/// emits a boundary record; anything else produces an error record and
/// the stream carries on.
pub fn stream_detect(
    bundle: &DetectorBundle,
    capacity: usize,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let mut detector: Option<Detector<'_, ForestDecider>> = None;
    let mut line = String::new();
    let mut line_number: u64 = 0;
    loop {
        line.clear();
        if input.read_line(&mut line).context("reading input stream")? == 0 {
            return Ok(());
        }
        line_number += 1;
        let mut fields = line.split_whitespace();
        let record = match (fields.next(), fields.next(), fields.next()) {
            (None, ..) => {
                // Utterance boundary; silent unless words arrived.
                if detector.take().is_none() {
                    continue;
                }
                json!({ "boundary": true })
            }
            (Some(word), Some(tag), None) => {
                if detector.is_none() {
                    let decider = ForestDecider::new(bundle.forests.clone())?;
                    detector = Some(Detector::new(
                        &bundle.lex,
                        &bundle.pos,
                        &bundle.edit,
                        decider,
                        capacity,
                    )?);
                }
                let d = detector.as_mut().expect("created above");
                let index = d.words();
                let edits = d.consume(index, word, tag)?;
                json!({ "index": index, "word": word, "edits": edits })
            }
            _ => json!({
                "line": line_number,
                "error": "expected `word tag` or a blank line",
            }),
        };
        serde_json::to_writer(&mut *output, &record).context("writing edit script")?;
        output.write_all(b"\n")?;
        // Hand the script over before the next read; incrementality
        // must not depend on the consumer seeing buffered output late.
        output.flush()?;
    }
}
