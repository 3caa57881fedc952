//! The incremental detector: a four-stage classifier cascade that consumes
//! one token at a time and emits label edits.
//!
//! Per word, in order: (a) an edit-term check on the new word plus a gated
//! revisit of the previous word, (b) a repair-onset check, (c) a backward
//! search for the reparandum onset when (b) fires, and (d) a phase-end
//! check of every open repair hypothesis. Open hypotheses whose phase
//! outlives the search window are abandoned afterwards.
//!
//! Each stage consults a [`StageDecider`]; the production decider wraps one
//! trained classifier per stage, while [`ScriptedDecider`] gives tests
//! exact control over every decision. All tags the detector has committed
//! to are derived from its current hypothesis state after each word, and
//! the returned edit script is the delta against the previous word's state,
//! so revoked hypotheses automatically retract their tags.

pub mod dag;

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::labels::{diff_labels, LabelEdit, Tag, TagSet};
use crate::error::{Error, Result};
use crate::features::extract::{
    edit_features, rm_start_features, rp_end_features, rp_start_features, RM_WINDOW, RP_WINDOW,
};
use crate::features::{FeatureVector, Stage};
use crate::forest::Forest;
use dag::{PrefixDag, WhichModel};
use crate::lm::NGramModel;

/// One stage decision: the binary call and the confidence behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub positive: bool,
    pub score: f64,
}

/// The four classification points the detector consults while consuming a
/// word. Implementations receive the assembled feature vector plus enough
/// positional information to be scriptable in tests.
pub trait StageDecider {
    /// Is the word at `position` an edit term? `revisit` is true when the
    /// word is re-examined one step late, with its successor known.
    fn edit(&mut self, position: usize, revisit: bool, features: &FeatureVector) -> Decision;

    /// Does the word at `position` start a repair phase?
    fn rp_start(&mut self, position: usize, features: &FeatureVector) -> Decision;

    /// Does the reparandum of the repair starting at `rp_start` begin at
    /// `candidate`?
    fn rm_start(&mut self, rp_start: usize, candidate: usize, features: &FeatureVector)
        -> Decision;

    /// Does the repair phase end at `candidate_end` (`None`: the phase is
    /// empty and the reparandum is simply deleted)?
    fn rp_end(
        &mut self,
        rm_start: usize,
        rp_start: usize,
        candidate_end: Option<usize>,
        features: &FeatureVector,
    ) -> Decision;
}

impl<D: StageDecider + ?Sized> StageDecider for &mut D {
    fn edit(&mut self, position: usize, revisit: bool, features: &FeatureVector) -> Decision {
        (**self).edit(position, revisit, features)
    }

    fn rp_start(&mut self, position: usize, features: &FeatureVector) -> Decision {
        (**self).rp_start(position, features)
    }

    fn rm_start(
        &mut self,
        rp_start: usize,
        candidate: usize,
        features: &FeatureVector,
    ) -> Decision {
        (**self).rm_start(rp_start, candidate, features)
    }

    fn rp_end(
        &mut self,
        rm_start: usize,
        rp_start: usize,
        candidate_end: Option<usize>,
        features: &FeatureVector,
    ) -> Decision {
        (**self).rp_end(rm_start, rp_start, candidate_end, features)
    }
}

/// The trained classifiers for all four stages.
#[derive(Debug, Clone)]
pub struct StageForests {
    pub edit: Forest,
    pub rp_start: Forest,
    pub rm_start: Forest,
    pub rp_end: Forest,
}

impl StageForests {
    /// Checks every forest against the feature manifest of its stage.
    pub fn validate(&self) -> Result<()> {
        for (forest, stage) in [
            (&self.edit, Stage::Edit),
            (&self.rp_start, Stage::RpStart),
            (&self.rm_start, Stage::RmStart),
            (&self.rp_end, Stage::RpEnd),
        ] {
            forest.require_manifest(stage.name(), stage.manifest())?;
        }
        Ok(())
    }
}

/// Production decider: one forest per stage, vote share as the score.
pub struct ForestDecider {
    forests: StageForests,
}

impl ForestDecider {
    pub fn new(forests: StageForests) -> Result<Self> {
        forests.validate()?;
        Ok(ForestDecider { forests })
    }

    pub fn forests(&self) -> &StageForests {
        &self.forests
    }

    fn decide(forest: &Forest, features: &FeatureVector) -> Decision {
        let score = forest.score(&features.values);
        Decision { positive: score > 0.5, score }
    }
}

impl StageDecider for ForestDecider {
    fn edit(&mut self, _position: usize, _revisit: bool, features: &FeatureVector) -> Decision {
        Self::decide(&self.forests.edit, features)
    }

    fn rp_start(&mut self, _position: usize, features: &FeatureVector) -> Decision {
        Self::decide(&self.forests.rp_start, features)
    }

    fn rm_start(
        &mut self,
        _rp_start: usize,
        _candidate: usize,
        features: &FeatureVector,
    ) -> Decision {
        Self::decide(&self.forests.rm_start, features)
    }

    fn rp_end(
        &mut self,
        _rm_start: usize,
        _rp_start: usize,
        _candidate_end: Option<usize>,
        features: &FeatureVector,
    ) -> Decision {
        Self::decide(&self.forests.rp_end, features)
    }
}

/// Test decider driven entirely by position lookups; features are ignored.
/// Membership means a positive decision with the stored (or unit) score.
#[derive(Debug, Default, Clone)]
pub struct ScriptedDecider {
    /// Words classified as edit terms on arrival.
    pub edits: BTreeSet<usize>,
    /// Words classified as edit terms one step late, on the revisit.
    pub late_edits: BTreeSet<usize>,
    /// Words classified as repair-phase onsets.
    pub onsets: BTreeSet<usize>,
    /// `(rp_start, candidate)` pairs accepted as reparandum onsets, with
    /// the score used for capacity ranking.
    pub reparanda: BTreeMap<(usize, usize), f64>,
    /// `(rm_start, rp_start, end)` triples accepted as phase ends.
    pub ends: BTreeSet<(usize, usize, usize)>,
    /// `(rm_start, rp_start)` hypotheses accepted as bare deletions.
    pub deletes: BTreeSet<(usize, usize)>,
}

fn scripted(hit: bool, score: f64) -> Decision {
    Decision { positive: hit, score: if hit { score } else { 0.0 } }
}

impl StageDecider for ScriptedDecider {
    fn edit(&mut self, position: usize, revisit: bool, _features: &FeatureVector) -> Decision {
        let set = if revisit { &self.late_edits } else { &self.edits };
        scripted(set.contains(&position), 1.0)
    }

    fn rp_start(&mut self, position: usize, _features: &FeatureVector) -> Decision {
        scripted(self.onsets.contains(&position), 1.0)
    }

    fn rm_start(
        &mut self,
        rp_start: usize,
        candidate: usize,
        _features: &FeatureVector,
    ) -> Decision {
        match self.reparanda.get(&(rp_start, candidate)) {
            Some(&score) => Decision { positive: true, score },
            None => Decision { positive: false, score: 0.0 },
        }
    }

    fn rp_end(
        &mut self,
        rm_start: usize,
        rp_start: usize,
        candidate_end: Option<usize>,
        _features: &FeatureVector,
    ) -> Decision {
        let hit = match candidate_end {
            Some(end) => self.ends.contains(&(rm_start, rp_start, end)),
            None => self.deletes.contains(&(rm_start, rp_start)),
        };
        scripted(hit, 1.0)
    }
}

/// How a hypothesis closed its repair phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClosedKind {
    Repeat,
    Substitute,
    Delete,
}

/// One candidate reading of a repair: reparandum onset, repair onset, and
/// the phase state. `last_phase_word` is the most recent word the open
/// phase covers, or the closing word once closed (unused for deletions).
#[derive(Debug, Clone)]
struct RepairHypothesis {
    rm_start: usize,
    rp_start: usize,
    score: f64,
    last_phase_word: usize,
    closed: Option<ClosedKind>,
}

impl RepairHypothesis {
    /// Whether the word at `p` belongs to this hypothesis's reparandum or
    /// repair phase. Callers only ask about words that are (still) live,
    /// so the raw reparandum range needs no interregnum carve-out.
    fn span_contains(&self, p: usize) -> bool {
        if (self.rm_start..self.rp_start).contains(&p) {
            return true;
        }
        if self.closed == Some(ClosedKind::Delete) {
            return false;
        }
        (self.rp_start..=self.last_phase_word).contains(&p)
    }
}

/// The hypotheses sharing one repair onset: the best-scoring reading holds
/// the committed tags; with capacity two a runner-up shadows it untagged,
/// ready to take over if the primary is struck down.
#[derive(Debug, Clone)]
struct OnsetGroup {
    primary: RepairHypothesis,
    shadow: Option<RepairHypothesis>,
}

/// Drops every hypothesis `doomed` accepts. A doomed primary is replaced
/// by its surviving shadow when one exists, otherwise the group dies.
fn prune_hypotheses(groups: &mut Vec<OnsetGroup>, mut doomed: impl FnMut(&RepairHypothesis) -> bool) {
    groups.retain_mut(|g| {
        if g.shadow.as_ref().is_some_and(&mut doomed) {
            g.shadow = None;
        }
        if doomed(&g.primary) {
            match g.shadow.take() {
                Some(s) => {
                    g.primary = s;
                    true
                }
                None => false,
            }
        } else {
            true
        }
    });
}

/// Loose upper bound on the distinct ⟨reparandum onset, repair onset⟩
/// pairs the detector can evaluate over an `n`-word utterance: each word
/// can pair with at most [`RM_WINDOW`] predecessors.
pub fn hypothesis_count_bound(n: usize, capacity: usize) -> u64 {
    let per_word: u64 = (1..=n as u64).map(|p| p.min(RM_WINDOW as u64)).sum();
    capacity as u64 * per_word
}

/// The strongly incremental repair detector. Feed words with
/// [`consume`](Detector::consume); each call returns the label edits that
/// update the previous prefix's labelling to the current one.
pub struct Detector<'m, D> {
    dag: PrefixDag<'m>,
    decider: D,
    capacity: usize,
    groups: Vec<OnsetGroup>,
    labels: Vec<TagSet>,
    log: Vec<Vec<LabelEdit>>,
    invocations: u64,
    pairs: BTreeSet<(usize, usize)>,
    position: usize,
}

impl<'m, D: StageDecider> Detector<'m, D> {
    /// `capacity` is how many reparandum readings each onset may keep
    /// (1 or 2); the runner-up is tracked but never tagged.
    pub fn new(
        lex: &'m NGramModel,
        pos: &'m NGramModel,
        edit: &'m NGramModel,
        decider: D,
        capacity: usize,
    ) -> Result<Self> {
        if !(1..=2).contains(&capacity) {
            return Err(Error::Config(format!(
                "hypothesis capacity must be 1 or 2, got {capacity}"
            )));
        }
        Ok(Detector {
            dag: PrefixDag::new(lex, pos, edit),
            decider,
            capacity,
            groups: Vec::new(),
            labels: Vec::new(),
            log: Vec::new(),
            invocations: 0,
            pairs: BTreeSet::new(),
            position: 0,
        })
    }

    /// Consumes the next word and returns this step's label edits. Words
    /// must arrive in order: `index` is checked against the count so far.
    pub fn consume(&mut self, index: usize, word: &str, tag: &str) -> Result<Vec<LabelEdit>> {
        if index != self.position {
            return Err(Error::Data(format!(
                "words must arrive in order: expected index {}, got {index}",
                self.position
            )));
        }
        self.dag.push(word, tag);
        self.position += 1;
        let n = index;

        // (a) Edit-term check on the new word. A hit reroutes the graph
        // and pierces every open phase, so those hypotheses die; a closed
        // shadow whose span the edit term cannot touch takes over.
        let features = edit_features(&mut self.dag, n);
        if self.call_edit(n, false, &features).positive {
            self.dag.set_ed(n, true);
            prune_hypotheses(&mut self.groups, |h| h.closed.is_none());
        } else {
            self.revisit_previous(n);
            // (b) Repair-onset check, (c) backward reparandum search.
            let features = rp_start_features(&mut self.dag, n);
            self.invocations += 1;
            if self.decider.rp_start(n, &features).positive {
                self.open_group(n)?;
            }
            // (d) Phase-end check of every open hypothesis.
            self.evaluate_open(n)?;
        }

        // (e) Abandon hypotheses whose phase outlived the search window.
        let expired = |h: &RepairHypothesis| h.closed.is_none() && n - h.rp_start >= RP_WINDOW;
        prune_hypotheses(&mut self.groups, expired);

        let next = self.derive_labels();
        let edits = diff_labels(&self.labels, &next);
        self.labels = next;
        self.log.push(edits.clone());
        Ok(edits)
    }

    /// The labelling committed after the last consumed word.
    pub fn labels(&self) -> &[TagSet] {
        &self.labels
    }

    /// Every edit script emitted so far, one per consumed word.
    pub fn log(&self) -> &[Vec<LabelEdit>] {
        &self.log
    }

    /// Total decider invocations, the unit of processing overhead.
    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    /// Distinct ⟨reparandum onset, repair onset⟩ pairs evaluated; bounded
    /// by [`hypothesis_count_bound`] of the words consumed.
    pub fn hypothesis_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn words(&self) -> usize {
        self.position
    }

    pub fn dag(&self) -> &PrefixDag<'m> {
        &self.dag
    }

    fn call_edit(&mut self, target: usize, revisit: bool, features: &FeatureVector) -> Decision {
        self.invocations += 1;
        self.decider.edit(target, revisit, features)
    }

    /// Reconsiders the previous word as an edit term now that its
    /// successor is known. The classifier is only consulted when routing
    /// around the word actually improves the successor's prediction — two
    /// model queries decide that. A late hit cancels exactly the
    /// hypotheses whose span contains the word.
    fn revisit_previous(&mut self, n: usize) {
        if n == 0 || !self.dag.is_live(n - 1, &[]) {
            return;
        }
        let gain = self.dag.surprisal(WhichModel::Lex, n, &[])
            - self.dag.surprisal(WhichModel::Lex, n, &[(n - 1, n)]);
        if gain <= 0.0 {
            return;
        }
        let features = edit_features(&mut self.dag, n - 1);
        if self.call_edit(n - 1, true, &features).positive {
            self.dag.set_ed(n - 1, true);
            prune_hypotheses(&mut self.groups, |h| h.span_contains(n - 1));
        }
    }

    /// Backward search for the reparandum onset of a repair starting at
    /// `n`. Candidates walk back from just before the interregnum — the
    /// edit-term run touching `n` — and stop at any earlier edit term,
    /// since a reparandum never crosses one. The best `capacity` accepted
    /// candidates form a new onset group, ties going to the nearer one.
    fn open_group(&mut self, n: usize) -> Result<()> {
        let mut interregnum_start = n;
        while interregnum_start > 0 && self.dag.is_ed(interregnum_start - 1) {
            interregnum_start -= 1;
        }
        let mut accepted: Vec<RepairHypothesis> = Vec::new();
        let mut c = interregnum_start;
        while c > 0 {
            c -= 1;
            if self.dag.is_ed(c) || n - c > RM_WINDOW {
                break;
            }
            let features = rm_start_features(&mut self.dag, n, c)?;
            self.pairs.insert((c, n));
            self.invocations += 1;
            let decision = self.decider.rm_start(n, c, &features);
            if decision.positive {
                accepted.push(RepairHypothesis {
                    rm_start: c,
                    rp_start: n,
                    score: decision.score,
                    last_phase_word: n,
                    closed: None,
                });
            }
        }
        accepted.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then(b.rm_start.cmp(&a.rm_start))
        });
        accepted.truncate(self.capacity);
        let mut readings = accepted.into_iter();
        if let Some(primary) = readings.next() {
            self.groups.push(OnsetGroup { primary, shadow: readings.next() });
        }
        Ok(())
    }

    /// Asks every open hypothesis whether its phase ends at `n`. On the
    /// step that opened it the empty-phase deletion reading competes too;
    /// the higher score wins and a tie keeps the overt phase.
    fn evaluate_open(&mut self, n: usize) -> Result<()> {
        let mut groups = std::mem::take(&mut self.groups);
        for group in &mut groups {
            let readings = std::iter::once(&mut group.primary).chain(group.shadow.as_mut());
            for h in readings {
                if h.closed.is_some() {
                    continue;
                }
                let end = self.decide_end(h.rm_start, h.rp_start, Some(n))?;
                let delete = if h.rp_start == n {
                    Some(self.decide_end(h.rm_start, h.rp_start, None)?)
                } else {
                    None
                };
                let delete_wins = delete.is_some_and(|d| {
                    d.positive && (!end.positive || d.score > end.score)
                });
                if delete_wins {
                    h.closed = Some(ClosedKind::Delete);
                    continue;
                }
                h.last_phase_word = n;
                if end.positive {
                    let rm: Vec<&str> = self
                        .dag
                        .live_range(h.rm_start, h.rp_start, &[])
                        .into_iter()
                        .map(|p| self.dag.word(p))
                        .collect();
                    let rp: Vec<&str> = self
                        .dag
                        .live_range(h.rp_start, n + 1, &[])
                        .into_iter()
                        .map(|p| self.dag.word(p))
                        .collect();
                    h.closed = Some(if rm == rp {
                        ClosedKind::Repeat
                    } else {
                        ClosedKind::Substitute
                    });
                }
            }
        }
        self.groups = groups;
        Ok(())
    }

    fn decide_end(
        &mut self,
        rm_start: usize,
        rp_start: usize,
        candidate_end: Option<usize>,
    ) -> Result<Decision> {
        let features = rp_end_features(&mut self.dag, rm_start, rp_start, candidate_end)?;
        self.invocations += 1;
        Ok(self.decider.rp_end(rm_start, rp_start, candidate_end, &features))
    }

    /// The full labelling implied by the current graph and hypotheses.
    /// Words no tag claims are fluent; only primaries contribute tags.
    fn derive_labels(&self) -> Vec<TagSet> {
        let mut labels = vec![TagSet::fluent(); self.dag.len()];
        for (i, set) in labels.iter_mut().enumerate() {
            if self.dag.is_ed(i) {
                set.insert(Tag::Ed);
            }
        }
        for group in &self.groups {
            let h = &group.primary;
            let rm = self.dag.live_range(h.rm_start, h.rp_start, &[]);
            tag_positions(&mut labels, &rm, [Tag::RmStart, Tag::RmMid, Tag::RmEnd]);
            if h.closed == Some(ClosedKind::Delete) {
                continue;
            }
            let rp = self.dag.live_range(h.rp_start, h.last_phase_word + 1, &[]);
            let tags = match h.closed {
                // Open phases end provisionally: no word is yet known to
                // close them.
                None => [Tag::RpStart, Tag::RpMid, Tag::RpMid],
                Some(_) => [Tag::RpStart, Tag::RpMid, Tag::RpEnd],
            };
            tag_positions(&mut labels, &rp, tags);
        }
        labels
    }
}

/// Everything recorded while detecting over one utterance: the label
/// snapshot and edit script after each word, plus instrumentation.
#[derive(Debug, Clone, Default)]
pub struct DetectorRun {
    pub history: Vec<Vec<TagSet>>,
    pub log: Vec<Vec<LabelEdit>>,
    pub invocations: u64,
    pub pairs: usize,
}

/// Runs a fresh detector over one utterance's tokens.
pub fn run_utterance<D: StageDecider>(
    lex: &NGramModel,
    pos: &NGramModel,
    edit: &NGramModel,
    decider: D,
    capacity: usize,
    tokens: &[crate::corpus::Token],
) -> Result<DetectorRun> {
    let mut detector = Detector::new(lex, pos, edit, decider, capacity)?;
    let mut run = DetectorRun::default();
    for (i, token) in tokens.iter().enumerate() {
        let edits = detector.consume(i, &token.word, &token.pos)?;
        run.log.push(edits);
        run.history.push(detector.labels().to_vec());
    }
    run.invocations = detector.invocations();
    run.pairs = detector.hypothesis_pairs();
    Ok(run)
}

/// Runs the trained detector over a batch of utterances in parallel,
/// one fresh decider per utterance so the runs stay independent.
pub fn run_corpus(
    lex: &NGramModel,
    pos: &NGramModel,
    edit: &NGramModel,
    forests: &StageForests,
    capacity: usize,
    utterances: &[crate::corpus::Utterance],
) -> Result<Vec<DetectorRun>> {
    use rayon::prelude::*;
    utterances
        .par_iter()
        .map(|u| {
            let mut decider = ForestDecider::new(forests.clone())?;
            run_utterance(lex, pos, edit, &mut decider, capacity, &u.tokens)
        })
        .collect()
}

/// Tags a span given as an explicit position list; a single-word span
/// receives only the start tag.
fn tag_positions(labels: &mut [TagSet], positions: &[usize], tags: [Tag; 3]) {
    let [start, mid, end] = tags;
    match positions {
        [] => {}
        [only] => labels[*only].insert(start),
        [first, interior @ .., last] => {
            labels[*first].insert(start);
            for &p in interior {
                labels[p].insert(mid);
            }
            labels[*last].insert(end);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::labels::replay;

    fn models() -> (NGramModel, NGramModel, NGramModel) {
        let lex: Vec<Vec<&str>> = vec![
            vec!["john", "likes", "mary"],
            vec!["john", "likes", "mary"],
            vec!["john", "loves", "mary"],
            vec!["john", "loves", "mary"],
            vec!["uh", "uh"],
        ];
        let pos: Vec<Vec<&str>> = vec![
            vec!["nnp", "vbz", "nnp"],
            vec!["nnp", "vbz", "nnp"],
            vec!["uh", "uh"],
        ];
        let edit: Vec<Vec<&str>> = vec![vec!["uh"], vec!["uh"], vec!["um"], vec!["um"]];
        (
            NGramModel::train(3, 0.75, &lex).unwrap(),
            NGramModel::train(3, 0.75, &pos).unwrap(),
            NGramModel::train(2, 0.75, &edit).unwrap(),
        )
    }

    fn feed<'m, D: StageDecider>(
        detector: &mut Detector<'m, D>,
        words: &[(&str, &str)],
    ) -> Vec<Vec<LabelEdit>> {
        words
            .iter()
            .enumerate()
            .map(|(i, (w, t))| detector.consume(i, w, t).unwrap())
            .collect()
    }

    fn set(tags: &[Tag]) -> TagSet {
        tags.iter().copied().collect()
    }

    #[test]
    fn bound_matches_closed_form() {
        assert_eq!(hypothesis_count_bound(0, 1), 0);
        assert_eq!(hypothesis_count_bound(1, 1), 1);
        assert_eq!(hypothesis_count_bound(3, 1), 6);
        assert_eq!(hypothesis_count_bound(20, 1), 119);
        assert_eq!(hypothesis_count_bound(20, 2), 238);
    }

    #[test]
    fn fluent_words_emit_single_fluent_adds() {
        let (lex, pos, edit) = models();
        let mut det =
            Detector::new(&lex, &pos, &edit, ScriptedDecider::default(), 1).unwrap();
        let words = [("john", "nnp"), ("likes", "vbz"), ("mary", "nnp")];
        let log = feed(&mut det, &words);
        for (i, step) in log.iter().enumerate() {
            assert_eq!(step, &vec![LabelEdit::add(i, Tag::Fluent)]);
        }
        assert!(det.labels().iter().all(|s| *s == TagSet::fluent()));
        // Two decisions per word, plus at most one gated revisit each.
        let n = words.len() as u64;
        assert!(det.invocations() >= 2 * n && det.invocations() < 3 * n);
        assert_eq!(det.hypothesis_pairs(), 0);
    }

    #[test]
    fn edit_term_arrival_cancels_open_hypothesis() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            edits: BTreeSet::from([2]),
            onsets: BTreeSet::from([1, 3]),
            reparanda: BTreeMap::from([((1, 0), 1.0), ((3, 1), 1.0)]),
            ends: BTreeSet::from([(1, 3, 3)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let words = [
            ("john", "nnp"),
            ("likes", "vbz"),
            ("uh", "uh"),
            ("loves", "vbz"),
            ("mary", "nnp"),
        ];
        let log = feed(&mut det, &words);

        // A premature hypothesis goes up at the second word, is revoked
        // when the edit term arrives, and the real repair replaces it.
        assert_eq!(log[0], vec![LabelEdit::add(0, Tag::Fluent)]);
        assert_eq!(
            log[1],
            vec![LabelEdit::add(0, Tag::RmStart), LabelEdit::add(1, Tag::RpStart)]
        );
        assert_eq!(
            log[2],
            vec![
                LabelEdit::revoke(0, Tag::RmStart),
                LabelEdit::revoke(1, Tag::RpStart),
                LabelEdit::add(2, Tag::Ed),
            ]
        );
        assert_eq!(
            log[3],
            vec![LabelEdit::add(1, Tag::RmStart), LabelEdit::add(3, Tag::RpStart)]
        );
        assert_eq!(log[4], vec![LabelEdit::add(4, Tag::Fluent)]);
        assert_eq!(log.iter().map(Vec::len).sum::<usize>(), 9);

        assert_eq!(
            det.labels(),
            &[
                TagSet::fluent(),
                set(&[Tag::RmStart]),
                set(&[Tag::Ed]),
                set(&[Tag::RpStart]),
                TagSet::fluent(),
            ]
        );
        // The emitted scripts reconstruct the final labelling exactly.
        assert_eq!(replay(log.into_iter().flatten()), det.labels());
    }

    #[test]
    fn multi_word_phase_closes_with_end_tag() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: BTreeSet::from([1]),
            reparanda: BTreeMap::from([((1, 0), 1.0)]),
            ends: BTreeSet::from([(0, 1, 3)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let words = [
            ("john", "nnp"),
            ("likes", "vbz"),
            ("loves", "vbz"),
            ("mary", "nnp"),
            ("too", "rb"),
        ];
        let log = feed(&mut det, &words);
        // Interior words are provisionally mid-phase while the phase is
        // open; the close retags only the final word.
        assert_eq!(log[2], vec![LabelEdit::add(2, Tag::RpMid)]);
        assert_eq!(log[3], vec![LabelEdit::add(3, Tag::RpEnd)]);
        assert_eq!(log[4], vec![LabelEdit::add(4, Tag::Fluent)]);
        assert_eq!(
            det.labels(),
            &[
                set(&[Tag::RmStart]),
                set(&[Tag::RpStart]),
                set(&[Tag::RpMid]),
                set(&[Tag::RpEnd]),
                TagSet::fluent(),
            ]
        );
    }

    #[test]
    fn delete_closure_keeps_continuation_fluent() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: BTreeSet::from([1]),
            reparanda: BTreeMap::from([((1, 0), 1.0)]),
            deletes: BTreeSet::from([(0, 1)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let log = feed(&mut det, &[("john", "nnp"), ("likes", "vbz"), ("mary", "nnp")]);
        // The deletion reading wins at the opening step, so the word that
        // triggered the onset is never tagged as phase material.
        assert_eq!(
            log[1],
            vec![LabelEdit::add(0, Tag::RmStart), LabelEdit::add(1, Tag::Fluent)]
        );
        assert_eq!(
            det.labels(),
            &[set(&[Tag::RmStart]), TagSet::fluent(), TagSet::fluent()]
        );
    }

    #[test]
    fn delete_tie_prefers_overt_phase() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: BTreeSet::from([1]),
            reparanda: BTreeMap::from([((1, 0), 1.0)]),
            ends: BTreeSet::from([(0, 1, 1)]),
            deletes: BTreeSet::from([(0, 1)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        feed(&mut det, &[("john", "nnp"), ("likes", "vbz"), ("mary", "nnp")]);
        assert_eq!(
            det.labels(),
            &[set(&[Tag::RmStart]), set(&[Tag::RpStart]), TagSet::fluent()]
        );
    }

    #[test]
    fn expiry_revokes_abandoned_phase() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: BTreeSet::from([1]),
            reparanda: BTreeMap::from([((1, 0), 1.0)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let words: Vec<(&str, &str)> = std::iter::repeat_n(("john", "nnp"), 10).collect();
        let log = feed(&mut det, &words);

        assert_eq!(log[7], vec![LabelEdit::add(7, Tag::RpMid)]);
        // Once the phase has run the full window without closing, the
        // whole hypothesis is abandoned and every tag comes back.
        assert_eq!(
            log[8],
            vec![
                LabelEdit::revoke(0, Tag::RmStart),
                LabelEdit::revoke(1, Tag::RpStart),
                LabelEdit::revoke(2, Tag::RpMid),
                LabelEdit::revoke(3, Tag::RpMid),
                LabelEdit::revoke(4, Tag::RpMid),
                LabelEdit::revoke(5, Tag::RpMid),
                LabelEdit::revoke(6, Tag::RpMid),
                LabelEdit::revoke(7, Tag::RpMid),
                LabelEdit::add(8, Tag::Fluent),
            ]
        );
        assert!(det.labels().iter().all(|s| *s == TagSet::fluent()));
        assert_eq!(replay(log.into_iter().flatten()), det.labels());
    }

    #[test]
    fn delayed_edit_cancels_spanning_hypothesis() {
        // Fixture where routing around the middle word makes the last
        // word much more predictable, so the revisit gate opens.
        let lex: Vec<Vec<&str>> = vec![
            vec!["c", "b"],
            vec!["c", "b"],
            vec!["c", "b"],
            vec!["c", "b"],
            vec!["a", "c"],
            vec!["a", "c"],
        ];
        let pos: Vec<Vec<&str>> = vec![vec!["t", "t"], vec!["t", "t"]];
        let ed: Vec<Vec<&str>> = vec![vec!["a"], vec!["a"]];
        let lex = NGramModel::train(3, 0.75, &lex).unwrap();
        let pos = NGramModel::train(3, 0.75, &pos).unwrap();
        let edit = NGramModel::train(2, 0.75, &ed).unwrap();
        {
            let mut dag = PrefixDag::new(&lex, &pos, &edit);
            dag.push("c", "t");
            dag.push("a", "t");
            dag.push("b", "t");
            let gain = dag.surprisal(WhichModel::Lex, 2, &[])
                - dag.surprisal(WhichModel::Lex, 2, &[(1, 2)]);
            assert!(gain > 0.0, "fixture must open the revisit gate, gain {gain}");
        }

        let decider = ScriptedDecider {
            late_edits: BTreeSet::from([1]),
            onsets: BTreeSet::from([1]),
            reparanda: BTreeMap::from([((1, 0), 1.0)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let log = feed(&mut det, &[("c", "t"), ("a", "t"), ("b", "t")]);
        // The hypothesis spanning the late edit term is cancelled in the
        // same step that reclassifies the word.
        assert_eq!(
            log[2],
            vec![
                LabelEdit::revoke(0, Tag::RmStart),
                LabelEdit::revoke(1, Tag::RpStart),
                LabelEdit::add(1, Tag::Ed),
                LabelEdit::add(2, Tag::Fluent),
            ]
        );
        assert_eq!(
            det.labels(),
            &[TagSet::fluent(), set(&[Tag::Ed]), TagSet::fluent()]
        );
    }

    #[test]
    fn closed_shadow_promoted_when_edit_cancels_primary() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            edits: BTreeSet::from([3]),
            onsets: BTreeSet::from([2]),
            reparanda: BTreeMap::from([((2, 0), 0.9), ((2, 1), 0.6)]),
            ends: BTreeSet::from([(1, 2, 2)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 2).unwrap();
        let words = [("john", "nnp"), ("likes", "vbz"), ("loves", "vbz"), ("uh", "uh")];
        let log = feed(&mut det, &words);
        // The wider reading is tagged first; the edit term pierces its
        // open phase, and the closed runner-up takes over the tags.
        assert_eq!(
            log[3],
            vec![
                LabelEdit::revoke(0, Tag::RmStart),
                LabelEdit::revoke(1, Tag::RmEnd),
                LabelEdit::add(1, Tag::RmStart),
                LabelEdit::add(3, Tag::Ed),
            ]
        );
        assert_eq!(
            det.labels(),
            &[
                TagSet::fluent(),
                set(&[Tag::RmStart]),
                set(&[Tag::RpStart]),
                set(&[Tag::Ed]),
            ]
        );
        assert_eq!(det.hypothesis_pairs(), 2);
    }

    #[test]
    fn open_shadow_dies_with_primary() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            edits: BTreeSet::from([3]),
            onsets: BTreeSet::from([2]),
            reparanda: BTreeMap::from([((2, 0), 0.9), ((2, 1), 0.6)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 2).unwrap();
        let words = [("john", "nnp"), ("likes", "vbz"), ("loves", "vbz"), ("uh", "uh")];
        feed(&mut det, &words);
        assert_eq!(
            det.labels(),
            &[TagSet::fluent(), TagSet::fluent(), TagSet::fluent(), set(&[Tag::Ed])]
        );
    }

    #[test]
    fn chained_repairs_share_a_word() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: BTreeSet::from([1, 2]),
            reparanda: BTreeMap::from([((1, 0), 1.0), ((2, 1), 1.0)]),
            ends: BTreeSet::from([(0, 1, 1), (1, 2, 2)]),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let log = feed(&mut det, &[("likes", "vbz"), ("loves", "vbz"), ("adores", "vbz")]);
        // The middle word is simultaneously the repair of the first
        // hypothesis and the reparandum of the second.
        assert_eq!(
            det.labels(),
            &[
                set(&[Tag::RmStart]),
                set(&[Tag::RmStart, Tag::RpStart]),
                set(&[Tag::RpStart]),
            ]
        );
        assert_eq!(replay(log.into_iter().flatten()), det.labels());
    }

    #[test]
    fn evaluated_pairs_stay_within_bound() {
        let (lex, pos, edit) = models();
        let decider = ScriptedDecider {
            onsets: (0..10).collect(),
            ..ScriptedDecider::default()
        };
        let mut det = Detector::new(&lex, &pos, &edit, decider, 1).unwrap();
        let words: Vec<(&str, &str)> = std::iter::repeat_n(("john", "nnp"), 10).collect();
        feed(&mut det, &words);
        // Every onset walked the full window but accepted nothing.
        let expected: usize = (0..10).map(|n: usize| n.min(RM_WINDOW)).sum();
        assert_eq!(det.hypothesis_pairs(), expected);
        assert!((det.hypothesis_pairs() as u64) <= hypothesis_count_bound(10, 1));
        assert!(det.labels().iter().all(|s| *s == TagSet::fluent()));
    }

    #[test]
    fn out_of_order_words_rejected() {
        let (lex, pos, edit) = models();
        let mut det =
            Detector::new(&lex, &pos, &edit, ScriptedDecider::default(), 1).unwrap();
        assert!(matches!(det.consume(1, "john", "nnp"), Err(Error::Data(_))));
        det.consume(0, "john", "nnp").unwrap();
        assert!(matches!(det.consume(0, "john", "nnp"), Err(Error::Data(_))));
    }

    #[test]
    fn capacity_outside_range_rejected() {
        let (lex, pos, edit) = models();
        for bad in [0, 3] {
            assert!(matches!(
                Detector::new(&lex, &pos, &edit, ScriptedDecider::default(), bad),
                Err(Error::Config(_))
            ));
        }
        assert!(Detector::new(&lex, &pos, &edit, ScriptedDecider::default(), 2).is_ok());
    }
}
