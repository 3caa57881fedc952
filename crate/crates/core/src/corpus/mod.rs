//! Transcript corpora with speech-repair annotations.
//!
//! An utterance is a flat sequence of POS-tagged words plus span
//! annotations for repairs (`[ reparandum + {edit terms} repair ]`) and
//! isolated edit terms (`{uh}`). See [`markup`] for the concrete syntax.

pub mod folds;
pub mod gold;
pub mod labels;
pub mod markup;
pub mod synth;

use crate::error::{Error, Result};

pub use labels::{apply_edit, diff_labels, replay, EditOp, LabelEdit, Tag, TagClass, TagSet};

/// A single transcript word with its part-of-speech tag and position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    /// Lower-cased surface form.
    pub word: String,
    /// Part-of-speech tag, kept as written.
    pub pos: String,
    /// 0-based position within the utterance.
    pub index: usize,
}

impl Token {
    pub fn new(word: impl Into<String>, pos: impl Into<String>, index: usize) -> Token {
        Token {
            word: word.into().to_lowercase(),
            pos: pos.into(),
            index,
        }
    }
}

/// Repair classification: verbatim restart, revision, or abandoned material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepairKind {
    Repeat,
    Substitute,
    Delete,
}

impl RepairKind {
    pub fn name(self) -> &'static str {
        match self {
            RepairKind::Repeat => "repeat",
            RepairKind::Substitute => "substitute",
            RepairKind::Delete => "delete",
        }
    }
}

/// One annotated repair: reparandum span, optional interregnum edit terms,
/// and repair-phase span.
///
/// Spans are inclusive token-index ranges. Delete repairs have an empty
/// repair phase, modeled as `rp_start == rp_end ==` the position of the
/// first word after the interregnum (which may equal the utterance length
/// when the utterance is abandoned at its end); no word carries `rp_*` tags
/// in that case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairAnnotation {
    pub rm_start: usize,
    pub rm_end: usize,
    /// Token indices of the interregnum edit terms, in order.
    pub interregnum: Vec<usize>,
    pub rp_start: usize,
    pub rp_end: usize,
    pub kind: RepairKind,
}

impl RepairAnnotation {
    /// Checks the span ordering invariants.
    pub fn validate(&self) -> Result<()> {
        if self.rm_start > self.rm_end
            || self.rm_end >= self.rp_start
            || self.rp_start > self.rp_end
        {
            return Err(Error::Data(format!(
                "invalid repair spans: rm {}..{} rp {}..{}",
                self.rm_start, self.rm_end, self.rp_start, self.rp_end
            )));
        }
        if self.kind == RepairKind::Delete && self.rp_start != self.rp_end {
            return Err(Error::Data("delete repair with non-empty phase".into()));
        }
        Ok(())
    }

    /// True when the repair phase contains no words.
    pub fn is_delete(&self) -> bool {
        self.kind == RepairKind::Delete
    }

    /// Inclusive reparandum index range.
    pub fn rm_range(&self) -> std::ops::RangeInclusive<usize> {
        self.rm_start..=self.rm_end
    }

    /// Inclusive repair-phase index range; empty for deletes.
    pub fn rp_range(&self) -> std::ops::Range<usize> {
        if self.is_delete() {
            self.rp_start..self.rp_start
        } else {
            self.rp_start..self.rp_end + 1
        }
    }
}

/// One annotated utterance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Utterance {
    pub tokens: Vec<Token>,
    /// Repairs ordered by reparandum onset.
    pub repairs: Vec<RepairAnnotation>,
    /// Indices of edit terms outside any interregnum.
    pub isolated_edits: std::collections::BTreeSet<usize>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// All edit-term indices: interregna plus isolated edits.
    pub fn edit_indices(&self) -> std::collections::BTreeSet<usize> {
        let mut set = self.isolated_edits.clone();
        for r in &self.repairs {
            set.extend(r.interregnum.iter().copied());
        }
        set
    }

    /// Maximal runs of consecutive edit-term indices, used as training
    /// sequences for the edit-term language model.
    pub fn edit_spans(&self) -> Vec<Vec<&Token>> {
        let indices: Vec<usize> = self.edit_indices().into_iter().collect();
        let mut spans: Vec<Vec<&Token>> = Vec::new();
        for &i in &indices {
            match spans.last_mut() {
                Some(span) if span.last().unwrap().index + 1 == i => {
                    span.push(&self.tokens[i]);
                }
                _ => spans.push(vec![&self.tokens[i]]),
            }
        }
        spans
    }

    /// The fluent side of the utterance: every token that is neither an
    /// edit term nor inside a reparandum.
    pub fn cleaned_tokens(&self) -> Vec<&Token> {
        let eds = self.edit_indices();
        let mut excised = vec![false; self.tokens.len()];
        for r in &self.repairs {
            for i in r.rm_range() {
                excised[i] = true;
            }
        }
        self.tokens
            .iter()
            .filter(|t| !eds.contains(&t.index) && !excised[t.index])
            .collect()
    }

    /// Validates span ordering, overlap discipline and index bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                return Err(Error::Data(format!("token index {} out of order", t.index)));
            }
        }
        for r in &self.repairs {
            r.validate()?;
            let last = if r.is_delete() {
                // rp_start may sit one past the end for utterance-final deletes
                if r.rp_start > n {
                    return Err(Error::Data("delete continuation out of range".into()));
                }
                r.rm_end
            } else {
                r.rp_end
            };
            if last >= n {
                return Err(Error::Data("repair span out of range".into()));
            }
        }
        for &i in &self.isolated_edits {
            if i >= n {
                return Err(Error::Data("edit index out of range".into()));
            }
            for r in &self.repairs {
                let in_rm = r.rm_range().contains(&i);
                let in_rp = !r.is_delete() && r.rp_range().contains(&i);
                if in_rm || in_rp {
                    return Err(Error::Data(
                        "isolated edit inside a repair span".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A parsed corpus: utterances plus their source line numbers.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    /// 1-based line number in the source file for each utterance.
    pub line_numbers: Vec<usize>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}
