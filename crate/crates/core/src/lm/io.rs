//! Plain-text model persistence.
//!
//! Only the highest-order raw counts are stored; every lower-order and
//! continuation statistic is a pure function of them, so a reloaded model
//! answers every query bit-identically with far less on disk. Rows are
//! sorted by token sequence, making the file itself deterministic.
//!
//! ```text
//! ngram-counts
//! version 1
//! order 3
//! discount 0.75
//! rows 42
//! <s> <s> a 2
//! a b c 1
//! ...
//! ```

use super::NGramModel;
use crate::error::{Error, Result};
use std::path::Path;

pub fn model_to_string(model: &NGramModel) -> String {
    let rows = model.sorted_counts();
    let mut out = String::new();
    out.push_str("ngram-counts\n");
    out.push_str("version 1\n");
    out.push_str(&format!("order {}\n", model.order()));
    out.push_str(&format!("discount {}\n", model.discount()));
    out.push_str(&format!("rows {}\n", rows.len()));
    for (gram, count) in rows {
        out.push_str(&gram.join(" "));
        out.push_str(&format!(" {count}\n"));
    }
    out
}

pub fn model_from_str(text: &str) -> Result<NGramModel> {
    let bad = |msg: String| Error::Format(format!("ngram counts: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some("ngram-counts") {
        return Err(bad("missing ngram-counts header".into()));
    }
    if lines.next() != Some("version 1") {
        return Err(bad("unsupported version".into()));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| bad("truncated header".into()))?;
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .map(|s| s.to_string())
            .ok_or_else(|| bad(format!("expected `{name} <value>`, got `{line}`")))
    };
    let order: usize = field("order")?
        .parse()
        .map_err(|_| bad("bad order".into()))?;
    let discount: f64 = field("discount")?
        .parse()
        .map_err(|_| bad("bad discount".into()))?;
    let n_rows: usize = field("rows")?
        .parse()
        .map_err(|_| bad("bad row count".into()))?;
    let mut rows: Vec<(Vec<String>, u32)> = Vec::with_capacity(n_rows);
    for line in lines {
        let mut parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != order + 1 {
            return Err(bad(format!(
                "expected {} fields per row, got {} in `{line}`",
                order + 1,
                parts.len()
            )));
        }
        let count: u32 = parts
            .pop()
            .unwrap()
            .parse()
            .map_err(|_| bad(format!("bad count in `{line}`")))?;
        if count == 0 {
            return Err(bad(format!("zero count in `{line}`")));
        }
        rows.push((parts.into_iter().map(|s| s.to_string()).collect(), count));
    }
    if rows.len() != n_rows {
        return Err(bad(format!(
            "expected {n_rows} rows, found {}",
            rows.len()
        )));
    }
    NGramModel::from_counts(order, discount, &rows)
}

pub fn write_model(path: impl AsRef<Path>, model: &NGramModel) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<NGramModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}
