//! Inline markup for repair-annotated transcripts.
//!
//! One utterance per line. Tokens are `word/POS` pairs; words are
//! lower-cased on input. Repairs are written
//! `[ reparandum + {edit terms} repair ]` where the `{...}` interregnum is
//! optional, a repair with nothing after the `+` is a delete, and a `[`
//! directly after the `+` opens a chained repair whose reparandum is the
//! outer repair's phase. Edit terms outside any repair are written `{...}`
//! on their own. `#` starts a comment line; blank lines are ignored.
//!
//! The characters `[ ] + { }` are reserved and act as standalone symbols
//! wherever they appear.

use super::{Corpus, RepairAnnotation, RepairKind, Token, Utterance};
use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
enum Sym {
    Open,
    Close,
    Plus,
    BraceOpen,
    BraceClose,
    Word(String),
}

#[derive(Debug, Clone)]
struct Lexed {
    sym: Sym,
    offset: usize,
}

fn lex(line: &str) -> Vec<Lexed> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0usize;
    for (offset, ch) in line.char_indices() {
        let sym = match ch {
            '[' => Some(Sym::Open),
            ']' => Some(Sym::Close),
            '+' => Some(Sym::Plus),
            '{' => Some(Sym::BraceOpen),
            '}' => Some(Sym::BraceClose),
            _ => None,
        };
        if sym.is_some() || ch.is_whitespace() {
            if !word.is_empty() {
                out.push(Lexed {
                    sym: Sym::Word(std::mem::take(&mut word)),
                    offset: word_start,
                });
            }
            if let Some(s) = sym {
                out.push(Lexed { sym: s, offset });
            }
        } else {
            if word.is_empty() {
                word_start = offset;
            }
            word.push(ch);
        }
    }
    if !word.is_empty() {
        out.push(Lexed {
            sym: Sym::Word(word),
            offset: word_start,
        });
    }
    out
}

struct Parser {
    syms: Vec<Lexed>,
    at: usize,
    line: usize,
    tokens: Vec<Token>,
    repairs: Vec<RepairAnnotation>,
    isolated: BTreeSet<usize>,
}

impl Parser {
    fn err(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            offset,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Lexed> {
        self.syms.get(self.at)
    }

    fn next(&mut self) -> Option<&Lexed> {
        let item = self.syms.get(self.at);
        if item.is_some() {
            self.at += 1;
        }
        item
    }

    fn end_offset(&self) -> usize {
        self.syms.last().map(|l| l.offset + 1).unwrap_or(0)
    }

    fn push_word(&mut self, text: &str, offset: usize) -> Result<usize> {
        let slash = text
            .rfind('/')
            .ok_or_else(|| self.err(offset, format!("token `{text}` lacks a /POS suffix")))?;
        let (word, pos) = (&text[..slash], &text[slash + 1..]);
        if word.is_empty() || pos.is_empty() {
            return Err(self.err(offset, format!("token `{text}` has an empty word or POS")));
        }
        let index = self.tokens.len();
        self.tokens.push(Token::new(word, pos, index));
        Ok(index)
    }

    /// Parses `{ token+ }` starting at the opening brace (already peeked).
    fn parse_edit_block(&mut self) -> Result<Vec<usize>> {
        let open = self.next().expect("caller peeked {");
        debug_assert_eq!(open.sym, Sym::BraceOpen);
        let open_offset = open.offset;
        let mut indices = Vec::new();
        loop {
            match self.peek() {
                Some(Lexed {
                    sym: Sym::Word(_), ..
                }) => {
                    let Lexed {
                        sym: Sym::Word(w),
                        offset,
                    } = self.next().unwrap().clone()
                    else {
                        unreachable!()
                    };
                    indices.push(self.push_word(&w, offset)?);
                }
                Some(Lexed {
                    sym: Sym::BraceClose,
                    ..
                }) => {
                    self.next();
                    break;
                }
                Some(l) => {
                    let o = l.offset;
                    return Err(self.err(o, "only tokens may appear inside {...}"));
                }
                None => {
                    return Err(self.err(self.end_offset(), "unclosed {"));
                }
            }
        }
        if indices.is_empty() {
            return Err(self.err(open_offset, "empty {...} edit block"));
        }
        Ok(indices)
    }

    /// Parses a repair starting at `[` (already peeked); returns its
    /// reparandum span so a chaining caller can adopt it as a repair phase.
    fn parse_repair(&mut self) -> Result<(usize, usize)> {
        let open = self.next().expect("caller peeked [");
        debug_assert_eq!(open.sym, Sym::Open);
        let open_offset = open.offset;

        // Reparandum: plain tokens up to the `+`.
        let mut rm_indices = Vec::new();
        loop {
            match self.peek() {
                Some(Lexed {
                    sym: Sym::Word(_), ..
                }) => {
                    let Lexed {
                        sym: Sym::Word(w),
                        offset,
                    } = self.next().unwrap().clone()
                    else {
                        unreachable!()
                    };
                    rm_indices.push(self.push_word(&w, offset)?);
                }
                Some(Lexed { sym: Sym::Plus, .. }) => {
                    self.next();
                    break;
                }
                Some(Lexed {
                    sym: Sym::BraceOpen,
                    offset,
                }) => {
                    let o = *offset;
                    return Err(self.err(o, "edit block inside a reparandum"));
                }
                Some(Lexed {
                    sym: Sym::Open,
                    offset,
                }) => {
                    let o = *offset;
                    return Err(self.err(o, "nested [ inside a reparandum"));
                }
                Some(Lexed {
                    sym: Sym::Close,
                    offset,
                }) => {
                    let o = *offset;
                    return Err(self.err(o, "repair lacks a +"));
                }
                Some(Lexed {
                    sym: Sym::BraceClose,
                    offset,
                }) => {
                    let o = *offset;
                    return Err(self.err(o, "stray }"));
                }
                None => return Err(self.err(self.end_offset(), "unclosed [")),
            }
        }
        if rm_indices.is_empty() {
            return Err(self.err(open_offset, "empty reparandum"));
        }
        let (rm_start, rm_end) = (rm_indices[0], *rm_indices.last().unwrap());

        // Optional interregnum directly after the `+`.
        let interregnum = if matches!(
            self.peek(),
            Some(Lexed {
                sym: Sym::BraceOpen,
                ..
            })
        ) {
            self.parse_edit_block()?
        } else {
            Vec::new()
        };

        // Repair phase: plain tokens, or one chained repair, or nothing.
        let mut rp_indices = Vec::new();
        let mut chained: Option<(usize, usize)> = None;
        loop {
            match self.peek() {
                Some(Lexed {
                    sym: Sym::Word(_), ..
                }) => {
                    if chained.is_some() {
                        let o = self.peek().unwrap().offset;
                        return Err(self.err(o, "tokens after a chained repair"));
                    }
                    let Lexed {
                        sym: Sym::Word(w),
                        offset,
                    } = self.next().unwrap().clone()
                    else {
                        unreachable!()
                    };
                    rp_indices.push(self.push_word(&w, offset)?);
                }
                Some(Lexed { sym: Sym::Open, .. }) => {
                    if chained.is_some() || !rp_indices.is_empty() {
                        let o = self.peek().unwrap().offset;
                        return Err(self.err(o, "chained repair must be the whole repair phase"));
                    }
                    chained = Some(self.parse_repair()?);
                }
                Some(Lexed {
                    sym: Sym::Close, ..
                }) => {
                    self.next();
                    break;
                }
                Some(Lexed { sym: Sym::Plus, .. }) => {
                    let o = self.peek().unwrap().offset;
                    return Err(self.err(o, "duplicate + inside repair"));
                }
                Some(Lexed {
                    sym: Sym::BraceOpen,
                    ..
                }) => {
                    let o = self.peek().unwrap().offset;
                    return Err(self.err(o, "edit block must follow the + directly"));
                }
                Some(Lexed {
                    sym: Sym::BraceClose,
                    ..
                }) => {
                    let o = self.peek().unwrap().offset;
                    return Err(self.err(o, "stray }"));
                }
                None => return Err(self.err(self.end_offset(), "unclosed [")),
            }
        }

        let (rp_start, rp_end, kind) = if let Some((crm_start, crm_end)) = chained {
            (crm_start, crm_end, self.infer_kind(rm_start, rm_end, crm_start, crm_end))
        } else if rp_indices.is_empty() {
            let next = self.tokens.len();
            (next, next, RepairKind::Delete)
        } else {
            let (s, e) = (rp_indices[0], *rp_indices.last().unwrap());
            (s, e, self.infer_kind(rm_start, rm_end, s, e))
        };
        self.repairs.push(RepairAnnotation {
            rm_start,
            rm_end,
            interregnum,
            rp_start,
            rp_end,
            kind,
        });
        Ok((rm_start, rm_end))
    }

    fn infer_kind(&self, rm_s: usize, rm_e: usize, rp_s: usize, rp_e: usize) -> RepairKind {
        let rm: Vec<&str> = (rm_s..=rm_e).map(|i| self.tokens[i].word.as_str()).collect();
        let rp: Vec<&str> = (rp_s..=rp_e).map(|i| self.tokens[i].word.as_str()).collect();
        if rm == rp {
            RepairKind::Repeat
        } else {
            RepairKind::Substitute
        }
    }

    fn parse(mut self) -> Result<Utterance> {
        while let Some(l) = self.peek() {
            match &l.sym {
                Sym::Word(_) => {
                    let Lexed {
                        sym: Sym::Word(w),
                        offset,
                    } = self.next().unwrap().clone()
                    else {
                        unreachable!()
                    };
                    self.push_word(&w, offset)?;
                }
                Sym::BraceOpen => {
                    let indices = self.parse_edit_block()?;
                    self.isolated.extend(indices);
                }
                Sym::Open => {
                    self.parse_repair()?;
                }
                Sym::Plus => {
                    let o = l.offset;
                    return Err(self.err(o, "+ outside [ ]"));
                }
                Sym::Close => {
                    let o = l.offset;
                    return Err(self.err(o, "] without ["));
                }
                Sym::BraceClose => {
                    let o = l.offset;
                    return Err(self.err(o, "} without {"));
                }
            }
        }
        let mut repairs = self.repairs;
        repairs.sort_by_key(|r| (r.rm_start, r.rp_start));
        let utt = Utterance {
            tokens: self.tokens,
            repairs,
            isolated_edits: self.isolated,
        };
        utt.validate()?;
        Ok(utt)
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Utterance> {
    Parser {
        syms: lex(line),
        at: 0,
        line: line_no,
        tokens: Vec::new(),
        repairs: Vec::new(),
        isolated: BTreeSet::new(),
    }
    .parse()
}

/// Parses a single utterance line.
pub fn parse_utterance(line: &str) -> Result<Utterance> {
    parse_line(line, 1)
}

/// Parses a whole corpus; `#` comment lines and blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let utt = parse_line(line, line_no)?;
        if utt.is_empty() {
            continue;
        }
        corpus.utterances.push(utt);
        corpus.line_numbers.push(line_no);
    }
    Ok(corpus)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Serializes one utterance back to markup. Inverse of [`parse_utterance`]
/// for utterances in canonical form (contiguous interregna, chained repairs
/// sharing full spans).
pub fn serialize_utterance(u: &Utterance) -> String {
    let mut parts: Vec<String> = Vec::new();
    // A repair B chains off A when B's reparandum is exactly A's phase.
    let child_of = |r: &RepairAnnotation| -> Option<usize> {
        u.repairs
            .iter()
            .position(|c| !r.is_delete() && c.rm_start == r.rp_start && c.rm_end == r.rp_end)
    };
    let is_child: Vec<bool> = u
        .repairs
        .iter()
        .map(|b| {
            u.repairs
                .iter()
                .any(|a| !a.is_delete() && a.rp_start == b.rm_start && a.rp_end == b.rm_end && a != b)
        })
        .collect();

    fn tok(t: &Token) -> String {
        format!("{}/{}", t.word, t.pos)
    }

    fn emit_repair(
        u: &Utterance,
        r: &RepairAnnotation,
        child_of: &dyn Fn(&RepairAnnotation) -> Option<usize>,
        parts: &mut Vec<String>,
    ) -> usize {
        parts.push("[".into());
        for i in r.rm_range() {
            parts.push(tok(&u.tokens[i]));
        }
        parts.push("+".into());
        if !r.interregnum.is_empty() {
            parts.push("{".into());
            for &i in &r.interregnum {
                parts.push(tok(&u.tokens[i]));
            }
            parts.push("}".into());
        }
        let next = if let Some(ci) = child_of(r) {
            emit_repair(u, &u.repairs[ci], child_of, parts)
        } else {
            for i in r.rp_range() {
                parts.push(tok(&u.tokens[i]));
            }
            if r.is_delete() {
                r.rp_start
            } else {
                r.rp_end + 1
            }
        };
        parts.push("]".into());
        next
    }

    let mut i = 0usize;
    while i < u.tokens.len() {
        let top_level = u
            .repairs
            .iter()
            .enumerate()
            .find(|(ri, r)| r.rm_start == i && !is_child[*ri])
            .map(|(_, r)| r);
        if let Some(r) = top_level {
            i = emit_repair(u, r, &child_of, &mut parts);
        } else if u.isolated_edits.contains(&i) {
            parts.push("{".into());
            while i < u.tokens.len() && u.isolated_edits.contains(&i) {
                parts.push(tok(&u.tokens[i]));
                i += 1;
            }
            parts.push("}".into());
        } else {
            parts.push(tok(&u.tokens[i]));
            i += 1;
        }
    }
    // Brace blocks read better without inner padding: `{uh/uh}`.
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for p in &parts {
        let no_space = matches!(prev, Some("{")) || p == "}";
        if prev.is_some() && !no_space {
            out.push(' ');
        }
        out.push_str(p);
        prev = Some(p.as_str());
    }
    out
}

/// Serializes a corpus, one utterance per line.
pub fn serialize_corpus(c: &Corpus) -> String {
    let mut out = String::new();
    for u in &c.utterances {
        out.push_str(&serialize_utterance(u));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, c: &Corpus) -> Result<()> {
    std::fs::write(path, serialize_corpus(c))?;
    Ok(())
}
