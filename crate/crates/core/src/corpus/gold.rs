//! Reference labels derived from repair annotations.
//!
//! The full labelling tags every token with its structural role. The
//! incremental labelling gives, per consumed prefix, the labels an ideal
//! strictly-incremental detector could have produced: edit terms and repair
//! phases are taggable the moment the word arrives, but a reparandum only
//! becomes knowable once the repair phase starts, so its `rm_*` tags are
//! withheld until the prefix contains the repair onset (for an
//! utterance-final delete, until the last word).

use super::labels::{Tag, TagSet};
use super::{RepairAnnotation, Utterance};

fn tag_span(labels: &mut [TagSet], start: usize, end: usize, tags: [Tag; 3]) {
    let [first, mid, last] = tags;
    if start == end {
        labels[start].insert(first);
        return;
    }
    labels[start].insert(first);
    for set in labels.iter_mut().take(end).skip(start + 1) {
        set.insert(mid);
    }
    labels[end].insert(last);
}

/// The earliest token index whose arrival reveals the reparandum of `r`.
pub fn reveal_index(r: &RepairAnnotation, utterance_len: usize) -> usize {
    r.rp_start.min(utterance_len.saturating_sub(1))
}

/// Labels for the complete utterance.
pub fn gold_labels(u: &Utterance) -> Vec<TagSet> {
    let mut labels = vec![TagSet::fluent(); u.tokens.len()];
    for &i in &u.isolated_edits {
        labels[i].insert(Tag::Ed);
    }
    for r in &u.repairs {
        for &i in &r.interregnum {
            labels[i].insert(Tag::Ed);
        }
        tag_span(&mut labels, r.rm_start, r.rm_end, [Tag::RmStart, Tag::RmMid, Tag::RmEnd]);
        if !r.is_delete() {
            tag_span(&mut labels, r.rp_start, r.rp_end, [Tag::RpStart, Tag::RpMid, Tag::RpEnd]);
        }
    }
    labels
}

/// Per-prefix labels; element `t-1` covers the first `t` tokens and the
/// last element equals [`gold_labels`].
pub fn incremental_gold(u: &Utterance) -> Vec<Vec<TagSet>> {
    let n = u.tokens.len();
    let mut steps = Vec::with_capacity(n);
    for t in 1..=n {
        let mut labels = vec![TagSet::fluent(); t];
        for &i in &u.isolated_edits {
            if i < t {
                labels[i].insert(Tag::Ed);
            }
        }
        for r in &u.repairs {
            for &i in &r.interregnum {
                if i < t {
                    labels[i].insert(Tag::Ed);
                }
            }
            if !r.is_delete() && r.rp_start < t {
                if r.rp_end < t {
                    tag_span(&mut labels, r.rp_start, r.rp_end, [Tag::RpStart, Tag::RpMid, Tag::RpEnd]);
                } else {
                    // Phase still open: the words seen so far are onset and
                    // interior; none of them is known to end it.
                    tag_span(&mut labels, r.rp_start, t - 1, [Tag::RpStart, Tag::RpMid, Tag::RpMid]);
                }
            }
            if t > reveal_index(r, n) {
                tag_span(&mut labels, r.rm_start, r.rm_end, [Tag::RmStart, Tag::RmMid, Tag::RmEnd]);
            }
        }
        steps.push(labels);
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::markup::parse_utterance;

    fn set(tags: &[Tag]) -> TagSet {
        tags.iter().copied().collect()
    }

    #[test]
    fn labels_substitution_with_interregnum() {
        let u = parse_utterance("john/nnp [ likes/vbz + {uh/uh} loves/vbz ] mary/nnp").unwrap();
        let labels = gold_labels(&u);
        assert_eq!(
            labels,
            vec![
                TagSet::fluent(),
                set(&[Tag::RmStart]),
                set(&[Tag::Ed]),
                set(&[Tag::RpStart]),
                TagSet::fluent(),
            ]
        );
    }

    #[test]
    fn multi_word_spans_get_start_mid_end() {
        let u = parse_utterance("[ a/x b/x c/x + d/x e/x ] f/x").unwrap();
        let labels = gold_labels(&u);
        assert_eq!(labels[0], set(&[Tag::RmStart]));
        assert_eq!(labels[1], set(&[Tag::RmMid]));
        assert_eq!(labels[2], set(&[Tag::RmEnd]));
        assert_eq!(labels[3], set(&[Tag::RpStart]));
        assert_eq!(labels[4], set(&[Tag::RpEnd]));
        assert_eq!(labels[5], TagSet::fluent());
    }

    #[test]
    fn delete_repair_has_no_phase_tags() {
        let u = parse_utterance("i/prp [ want/vbp + ] need/vbp it/prp").unwrap();
        let labels = gold_labels(&u);
        assert_eq!(
            labels,
            vec![TagSet::fluent(), set(&[Tag::RmStart]), TagSet::fluent(), TagSet::fluent()]
        );
    }

    #[test]
    fn chained_repair_shares_middle_word() {
        let u = parse_utterance("[ a/x + [ b/x + c/x ] ]").unwrap();
        let labels = gold_labels(&u);
        assert_eq!(labels[0], set(&[Tag::RmStart]));
        assert_eq!(labels[1], set(&[Tag::RpStart, Tag::RmStart]));
        assert_eq!(labels[2], set(&[Tag::RpStart]));
    }

    #[test]
    fn incremental_labels_delay_reparandum_until_onset() {
        let u = parse_utterance("john/nnp [ likes/vbz + {uh/uh} loves/vbz ] mary/nnp").unwrap();
        let steps = incremental_gold(&u);
        assert_eq!(steps.len(), 5);
        assert_eq!(steps[0], vec![TagSet::fluent()]);
        // `likes` is not yet knowable as a reparandum...
        assert_eq!(steps[1], vec![TagSet::fluent(), TagSet::fluent()]);
        // ...the edit term is immediate...
        assert_eq!(steps[2], vec![TagSet::fluent(), TagSet::fluent(), set(&[Tag::Ed])]);
        // ...and the repair onset reveals it.
        assert_eq!(
            steps[3],
            vec![TagSet::fluent(), set(&[Tag::RmStart]), set(&[Tag::Ed]), set(&[Tag::RpStart])]
        );
        assert_eq!(*steps.last().unwrap(), gold_labels(&u));
    }

    #[test]
    fn utterance_final_delete_reveals_at_last_word() {
        let u = parse_utterance("i/prp saw/vbd [ the/dt + ]").unwrap();
        let steps = incremental_gold(&u);
        assert_eq!(steps[1], vec![TagSet::fluent(), TagSet::fluent()]);
        assert_eq!(
            steps[2],
            vec![TagSet::fluent(), TagSet::fluent(), set(&[Tag::RmStart])]
        );
        assert_eq!(*steps.last().unwrap(), gold_labels(&u));
    }

    #[test]
    fn partial_repair_phase_is_tagged_as_far_as_consumed() {
        let u = parse_utterance("[ a/x b/x + c/x d/x ] e/x").unwrap();
        let steps = incremental_gold(&u);
        // After `c` arrives the phase is just one word long so far.
        assert_eq!(
            steps[2],
            vec![set(&[Tag::RmStart]), set(&[Tag::RmEnd]), set(&[Tag::RpStart])]
        );
        // After `d` the phase has a proper end.
        assert_eq!(steps[3][3], set(&[Tag::RpEnd]));
    }

    #[test]
    fn open_phase_interior_is_provisionally_mid() {
        let u = parse_utterance("[ a/x + b/x c/x d/x ]").unwrap();
        let steps = incremental_gold(&u);
        // With the phase still open after `c`, `c` is interior, not an end.
        assert_eq!(steps[2][2], set(&[Tag::RpMid]));
        assert_eq!(steps[3][2], set(&[Tag::RpMid]));
        assert_eq!(steps[3][3], set(&[Tag::RpEnd]));
    }
}
