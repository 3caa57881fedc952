//! Word-level disfluency tags, tag sets and incremental label edits.
//!
//! Every consumed word carries a set of tags. A word with no repair
//! structure carries exactly `fluent`; reparandum / edit-term / repair-phase
//! words carry positional tags (`rm_start`, `rp_mid`, ...). Single-word
//! spans carry only their start tag. Incremental output is expressed as
//! `add` / `revoke` edits against these sets; `fluent` is the default state
//! of a consumed word, so it is only ever *added* when a word arrives
//! fluent, never explicitly revoked (dropping the last repair tag of a word
//! restores `fluent` implicitly).

use serde::{Deserialize, Serialize};
use std::fmt;

/// One word-level disfluency tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    RmStart,
    RmMid,
    RmEnd,
    Ed,
    RpStart,
    RpMid,
    RpEnd,
    Fluent,
}

/// Coarse label class: which repair component a tag belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagClass {
    Rm,
    Ed,
    Rp,
    Fluent,
}

impl Tag {
    pub const ALL: [Tag; 8] = [
        Tag::RmStart,
        Tag::RmMid,
        Tag::RmEnd,
        Tag::Ed,
        Tag::RpStart,
        Tag::RpMid,
        Tag::RpEnd,
        Tag::Fluent,
    ];

    pub fn class(self) -> TagClass {
        match self {
            Tag::RmStart | Tag::RmMid | Tag::RmEnd => TagClass::Rm,
            Tag::Ed => TagClass::Ed,
            Tag::RpStart | Tag::RpMid | Tag::RpEnd => TagClass::Rp,
            Tag::Fluent => TagClass::Fluent,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::RmStart => "rm_start",
            Tag::RmMid => "rm_mid",
            Tag::RmEnd => "rm_end",
            Tag::Ed => "ed",
            Tag::RpStart => "rp_start",
            Tag::RpMid => "rp_mid",
            Tag::RpEnd => "rp_end",
            Tag::Fluent => "fluent",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Tag::RmStart => 1,
            Tag::RmMid => 1 << 1,
            Tag::RmEnd => 1 << 2,
            Tag::Ed => 1 << 3,
            Tag::RpStart => 1 << 4,
            Tag::RpMid => 1 << 5,
            Tag::RpEnd => 1 << 6,
            Tag::Fluent => 1 << 7,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A small set of [`Tag`]s; words may carry several tags at once when
/// repairs share a word (one repair's `rp_start` doubling as the next
/// repair's `rm_start`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TagSet(u8);

impl TagSet {
    pub const EMPTY: TagSet = TagSet(0);

    pub fn fluent() -> TagSet {
        TagSet(Tag::Fluent.bit())
    }

    pub fn single(tag: Tag) -> TagSet {
        TagSet(tag.bit())
    }

    pub fn insert(&mut self, tag: Tag) {
        if tag != Tag::Fluent {
            self.0 &= !Tag::Fluent.bit();
        }
        self.0 |= tag.bit();
    }

    pub fn remove(&mut self, tag: Tag) {
        self.0 &= !tag.bit();
    }

    pub fn contains(&self, tag: Tag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Tag> + '_ {
        Tag::ALL.iter().copied().filter(|t| self.contains(*t))
    }

    pub fn has_class(&self, class: TagClass) -> bool {
        self.iter().any(|t| t.class() == class)
    }

    /// Drops every `rm_*` tag; an emptied set reverts to `fluent`.
    pub fn without_rm(mut self) -> TagSet {
        self.remove(Tag::RmStart);
        self.remove(Tag::RmMid);
        self.remove(Tag::RmEnd);
        if self.is_empty() {
            TagSet::fluent()
        } else {
            self
        }
    }
}

impl fmt::Debug for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<Tag> for TagSet {
    fn from_iter<I: IntoIterator<Item = Tag>>(iter: I) -> Self {
        let mut s = TagSet::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

/// Edit operation on a word's tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Add,
    Revoke,
}

/// One incremental change to the label sequence: add or revoke `tag` on the
/// word at `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelEdit {
    pub op: EditOp,
    pub index: usize,
    pub tag: Tag,
}

impl LabelEdit {
    pub fn add(index: usize, tag: Tag) -> LabelEdit {
        LabelEdit {
            op: EditOp::Add,
            index,
            tag,
        }
    }

    pub fn revoke(index: usize, tag: Tag) -> LabelEdit {
        LabelEdit {
            op: EditOp::Revoke,
            index,
            tag,
        }
    }
}

/// Computes the edit script that turns `prev` into `next`.
///
/// `next` must cover at least as many words as `prev`. A newly arrived word
/// contributes adds for all its tags (including a bare `fluent` add);
/// already-seen words contribute revokes for dropped tags and adds for
/// gained tags, except that `fluent` is implicit: losing it to a repair tag
/// or regaining it after the last repair tag is revoked costs nothing.
/// Edits are ordered by word index, revokes before adds.
pub fn diff_labels(prev: &[TagSet], next: &[TagSet]) -> Vec<LabelEdit> {
    debug_assert!(next.len() >= prev.len());
    let mut edits = Vec::new();
    for (i, &new) in next.iter().enumerate() {
        match prev.get(i) {
            None => {
                for tag in new.iter() {
                    edits.push(LabelEdit::add(i, tag));
                }
            }
            Some(&old) => {
                for tag in old.iter() {
                    if tag != Tag::Fluent && !new.contains(tag) {
                        edits.push(LabelEdit::revoke(i, tag));
                    }
                }
                for tag in new.iter() {
                    if tag != Tag::Fluent && !old.contains(tag) {
                        edits.push(LabelEdit::add(i, tag));
                    }
                }
            }
        }
    }
    edits
}

/// Applies one edit to a label sequence, growing it by at most one word.
/// Inverse of [`diff_labels`]: replaying a full edit log over an empty
/// sequence reproduces the final label state exactly.
pub fn apply_edit(labels: &mut Vec<TagSet>, edit: &LabelEdit) {
    if edit.index == labels.len() {
        labels.push(TagSet::EMPTY);
    }
    let set = &mut labels[edit.index];
    match edit.op {
        EditOp::Add => set.insert(edit.tag),
        EditOp::Revoke => {
            set.remove(edit.tag);
            if set.is_empty() {
                *set = TagSet::fluent();
            }
        }
    }
}

/// Replays an edit log from scratch.
pub fn replay(log: impl IntoIterator<Item = LabelEdit>) -> Vec<TagSet> {
    let mut labels = Vec::new();
    for edit in log {
        apply_edit(&mut labels, &edit);
    }
    labels
}
