//! Feature extraction for the four detector stages, computed over the
//! prefix graph.
//!
//! Conventions shared by all extractors:
//! - The *base route* is the utterance with edit terms routed around;
//!   *excised routes* additionally remove a hypothesized reparandum span.
//! - Word positions are raw utterance indices; span features count only
//!   live (non-edit) words.
//! - Booleans are encoded 1.0/0.0; absent quantities (no previous word,
//!   no next word, no candidate) are 0.0 so vectors are always total.
//! - Divergence and span-difference features short-circuit to exactly 0.0
//!   when the compared contexts or spans are identical, so verbatim
//!   repeat repairs score precisely zero on them.

use super::{FeatureVector, Stage};
use crate::error::{Error, Result};
use crate::pipeline::dag::{PrefixDag, WhichModel};

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

/// How far back the onset stage scans for hypothetical excisions.
const BEST_SCAN: usize = 3;

/// Widest reparandum the backward search may propose, in raw positions.
pub const RM_WINDOW: usize = 7;

/// Longest repair phase before a hypothesis must close or expire.
pub const RP_WINDOW: usize = 7;

/// Features for classifying the word at `target` as an edit term.
///
/// `target` is the current word, or the previous word on a delayed
/// revisit; in the latter case the following word is known and the
/// excision gain measures how much routing around `target` improves the
/// prediction of that next word.
pub fn edit_features(dag: &mut PrefixDag, target: usize) -> FeatureVector {
    let edit_s = dag.surprisal(WhichModel::Edit, target, &[]);
    let fluent_s = dag.surprisal(WhichModel::Lex, target, &[]);
    let (prev_edit, prev_fluent) = match dag.live_before(target, &[]) {
        Some(q) => (
            dag.surprisal(WhichModel::Edit, q, &[]),
            dag.surprisal(WhichModel::Lex, q, &[]),
        ),
        None => (0.0, 0.0),
    };
    let next = (target + 1..dag.len()).find(|&u| dag.is_live(u, &[]));
    let excision_gain = match next {
        Some(u) => {
            dag.surprisal(WhichModel::Lex, u, &[])
                - dag.surprisal(WhichModel::Lex, u, &[(target, target + 1)])
        }
        None => 0.0,
    };
    FeatureVector::new(
        Stage::Edit,
        vec![
            edit_s,
            fluent_s,
            edit_s - fluent_s,
            prev_edit,
            prev_fluent,
            prev_edit - prev_fluent,
            b(next.is_some()),
            excision_gain,
        ],
    )
}

/// Features for classifying the word at `n` as a repair-phase onset.
pub fn rp_start_features(dag: &mut PrefixDag, n: usize) -> FeatureVector {
    let mut values = Vec::with_capacity(Stage::RpStart.arity());
    for m in [WhichModel::Lex, WhichModel::Pos] {
        let s = dag.surprisal(m, n, &[]);
        let wml = dag.wml(m, n, &[]);
        let delta_wml = match dag.live_before(n, &[]) {
            Some(q) => dag.wml(m, q, &[]) - wml,
            None => 0.0,
        };
        let h_before = dag.entropy_before(m, n, &[]);
        let h_after = dag.entropy_through(m, n, &[]);
        let mut best_wml_boost = 0.0f64;
        let mut best_entropy_reduce = 0.0f64;
        for x in 1..=BEST_SCAN.min(n) {
            let e = [(n - x, n)];
            best_wml_boost = best_wml_boost.max(dag.wml(m, n, &e) - wml);
            best_entropy_reduce = best_entropy_reduce.max(h_before - dag.entropy_before(m, n, &e));
        }
        values.extend([
            s,
            wml,
            delta_wml,
            best_wml_boost,
            h_after,
            h_before - s,
            h_before - h_after,
            best_entropy_reduce,
        ]);
    }
    for x in 1..=3usize {
        values.push(b(n >= x && dag.word(n - x) == dag.word(n)));
    }
    for x in 1..=3usize {
        values.push(b(n >= x && dag.tag(n - x) == dag.tag(n)));
    }
    values.push(b(n >= 1 && dag.is_ed(n - 1)));
    FeatureVector::new(Stage::RpStart, values)
}

/// Features for the reparandum-onset candidate `candidate` paired with the
/// repair onset at `rp_index`.
pub fn rm_start_features(
    dag: &mut PrefixDag,
    rp_index: usize,
    candidate: usize,
) -> Result<FeatureVector> {
    if candidate >= rp_index || rp_index - candidate > RM_WINDOW {
        return Err(Error::Window(format!(
            "reparandum candidate {candidate} outside the {RM_WINDOW}-word window before onset {rp_index}"
        )));
    }
    if dag.is_ed(candidate) {
        return Err(Error::Data(format!(
            "reparandum candidate {candidate} is an edit term"
        )));
    }
    let e = [(candidate, rp_index)];
    let mut values = Vec::with_capacity(Stage::RmStart.arity());
    for m in [WhichModel::Lex, WhichModel::Pos] {
        let base_wml = dag.wml(m, rp_index, &[]);
        let boost = dag.wml(m, rp_index, &e) - base_wml;
        // The next-closer candidate; adjacent candidates compare against
        // the empty excision, whose boost is zero.
        let closer_boost = match dag.live_range(candidate + 1, rp_index, &[]).first() {
            Some(&c2) => dag.wml(m, rp_index, &[(c2, rp_index)]) - base_wml,
            None => 0.0,
        };
        let onset_s_excised = dag.surprisal(m, rp_index, &e);
        let ctx_rm = dag.context_through(m, candidate, &[]);
        let ctx_rp = dag.context_through(m, rp_index, &e);
        let context_kl = if ctx_rm == ctx_rp {
            0.0
        } else {
            let model = dag.model(m);
            model
                .continuation(ctx_rm.as_slice())
                .kl(&model.continuation(ctx_rp.as_slice()))
        };
        values.extend([
            boost,
            boost - closer_boost,
            dag.surprisal(m, candidate, &[]),
            dag.wml(m, candidate, &[]),
            dag.unigram_lp(m, candidate),
            dag.entropy_before(m, candidate, &[]),
            dag.entropy_through(m, candidate, &[]),
            onset_s_excised,
            dag.surprisal(m, rp_index, &[]) - onset_s_excised,
            dag.wml(m, rp_index, &e),
            dag.entropy_before(m, rp_index, &e) - onset_s_excised,
            context_kl,
        ]);
    }
    values.push((rp_index - candidate) as f64);
    values.push(dag.live_range(candidate, rp_index, &[]).len() as f64);
    values.push(b(candidate == 0));
    values.push(b(dag.word(candidate) == dag.word(rp_index)));
    values.push(b(dag.tag(candidate) == dag.tag(rp_index)));
    let successor = candidate + 1 < rp_index;
    values.push(b(successor && dag.word(candidate + 1) == dag.word(rp_index)));
    values.push(b(successor && dag.tag(candidate + 1) == dag.tag(rp_index)));
    values.push(b((candidate + 1..rp_index).any(|i| dag.is_ed(i))));
    Ok(FeatureVector::new(Stage::RmStart, values))
}

/// Features for closing the repair phase of the hypothesis
/// (`rm_start`, `rp_start`) at `candidate_end`.
///
/// `candidate_end = None` is the zero-length-repair (delete) outcome,
/// only meaningful at the push step: the word at `rp_start` is then read
/// as the fluent continuation after the deletion, phase-length features
/// are zero, and span-equality features are false.
pub fn rp_end_features(
    dag: &mut PrefixDag,
    rm_start: usize,
    rp_start: usize,
    candidate_end: Option<usize>,
) -> Result<FeatureVector> {
    if rm_start >= rp_start || rp_start - rm_start > RM_WINDOW {
        return Err(Error::Window(format!(
            "reparandum onset {rm_start} outside the {RM_WINDOW}-word window before repair onset {rp_start}"
        )));
    }
    if let Some(c) = candidate_end {
        if c < rp_start {
            return Err(Error::Window(format!(
                "phase end candidate {c} precedes the repair onset {rp_start}"
            )));
        }
        if c - rp_start > RP_WINDOW {
            return Err(Error::Window(format!(
                "phase end candidate {c} more than {RP_WINDOW} words past the repair onset {rp_start}"
            )));
        }
    }
    let rm_live = dag.live_range(rm_start, rp_start, &[]);
    let Some((&rm_first, &rm_end)) = rm_live.first().zip(rm_live.last()) else {
        return Err(Error::Data(format!(
            "empty reparandum span {rm_start}..{rp_start}"
        )));
    };
    debug_assert_eq!(rm_first, rm_start);
    let e = [(rm_start, rp_start)];
    // The word whose local measures describe the phase end: the end
    // candidate itself, or the continuation witness for a delete.
    let witness = candidate_end.unwrap_or(rp_start);
    let rp_live = candidate_end.map(|c| dag.live_range(rp_start, c + 1, &[]));
    let pre = dag.live_range(0, rm_start, &[]);

    let mut values = Vec::with_capacity(Stage::RpEnd.arity());
    for m in [WhichModel::Lex, WhichModel::Pos] {
        let ctx_rm_end = dag.context_through(m, rm_end, &[]);
        let ctx_phase_end = match candidate_end {
            Some(c) => dag.context_through(m, c, &e),
            None => dag.context_before(m, rp_start, &e),
        };
        let end_kl = if ctx_rm_end == ctx_phase_end {
            0.0
        } else {
            let model = dag.model(m);
            model
                .continuation(ctx_rm_end.as_slice())
                .kl(&model.continuation(ctx_phase_end.as_slice()))
        };
        // Log-probability difference between keeping the repair phase and
        // keeping the reparandum, both appended to the same pre-context.
        let rrd = {
            let mut cleaned = pre.clone();
            let mut substituted = pre.clone();
            match (&rp_live, candidate_end) {
                (Some(rp), Some(_)) => {
                    cleaned.extend(rp);
                    substituted.extend(&rm_live);
                }
                _ => {
                    substituted.extend(&rm_live);
                    cleaned.push(witness);
                    substituted.push(witness);
                }
            }
            let same = cleaned.len() == substituted.len()
                && cleaned
                    .iter()
                    .zip(&substituted)
                    .all(|(&a, &bq)| dag.id(m, a) == dag.id(m, bq));
            if same {
                0.0
            } else {
                dag.sequence_lp(m, &cleaned) - dag.sequence_lp(m, &substituted)
            }
        };
        values.extend([
            end_kl,
            rrd,
            dag.surprisal(m, witness, &e),
            dag.wml(m, witness, &e),
            dag.entropy_before(m, witness, &e),
            dag.entropy_through(m, witness, &e),
            dag.wml(m, witness, &e) - dag.wml(m, witness, &[]),
            dag.entropy_through(m, rm_end, &[]),
        ]);
    }
    let rp_len = rp_live.as_ref().map_or(0, Vec::len);
    values.push(rp_len as f64);
    values.push(rm_live.len() as f64);
    values.push(b(rp_len == rm_live.len()));
    values.push(b(dag.word(rm_end) == dag.word(witness)));
    values.push(b(dag.tag(rm_end) == dag.tag(witness)));
    values.push(b(dag.word(rm_start) == dag.word(rp_start)));
    let whole_equal = rp_live.as_ref().is_some_and(|rp| {
        rp.len() == rm_live.len()
            && rp
                .iter()
                .zip(&rm_live)
                .all(|(&a, &bq)| dag.word(a) == dag.word(bq))
    });
    values.push(b(whole_equal));
    Ok(FeatureVector::new(Stage::RpEnd, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::NGramModel;

    fn sentences(text: &[&str]) -> Vec<Vec<String>> {
        text.iter()
            .map(|s| s.split(' ').map(|w| w.to_string()).collect())
            .collect()
    }

    fn models() -> (NGramModel, NGramModel, NGramModel) {
        let lex = NGramModel::train(
            3,
            0.75,
            &sentences(&[
                "i like this one",
                "i like that one",
                "you like this",
                "i want this one",
                "you want that",
                "i like this",
            ]),
        )
        .unwrap();
        let pos = NGramModel::train(
            3,
            0.75,
            &sentences(&[
                "prp vbp dt cd",
                "prp vbp dt cd",
                "prp vbp dt",
                "prp vbp dt cd",
                "prp vbp dt",
                "prp vbp dt",
            ]),
        )
        .unwrap();
        let edit =
            NGramModel::train(2, 0.75, &sentences(&["uh", "uh uh", "i mean", "uh i mean"]))
                .unwrap();
        (lex, pos, edit)
    }

    fn dag_of<'m>(
        ms: &'m (NGramModel, NGramModel, NGramModel),
        pairs: &[(&str, &str)],
    ) -> PrefixDag<'m> {
        let mut dag = PrefixDag::new(&ms.0, &ms.1, &ms.2);
        for (w, t) in pairs {
            dag.push(w, t);
        }
        dag
    }

    #[test]
    fn vectors_are_total_at_boundaries() {
        let ms = models();
        let mut dag = dag_of(&ms, &[("i", "prp"), ("like", "vbp"), ("this", "dt")]);
        for target in 0..3 {
            let v = edit_features(&mut dag, target);
            assert!(v.values.iter().all(|x| x.is_finite()));
        }
        for n in 0..3 {
            let v = rp_start_features(&mut dag, n);
            assert!(v.values.iter().all(|x| x.is_finite()));
        }
        let v = rm_start_features(&mut dag, 2, 1).unwrap();
        assert!(v.values.iter().all(|x| x.is_finite()));
        let v = rp_end_features(&mut dag, 1, 2, Some(2)).unwrap();
        assert!(v.values.iter().all(|x| x.is_finite()));
        let v = rp_end_features(&mut dag, 1, 2, None).unwrap();
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn edit_model_prefers_edit_vocabulary() {
        let ms = models();
        let mut dag = dag_of(&ms, &[("i", "prp"), ("uh", "uh")]);
        let v = edit_features(&mut dag, 1);
        assert!(
            v.value("edit_surprisal") < v.value("fluent_surprisal"),
            "filler should look like an edit term"
        );
        assert!(v.value("edit_fluent_gap") < 0.0);
        // A frequent content word reads the other way.
        let mut dag = dag_of(&ms, &[("i", "prp"), ("like", "vbp")]);
        let v = edit_features(&mut dag, 1);
        assert!(v.value("fluent_surprisal") < v.value("edit_surprisal"));
        assert_eq!(v.value("next_known"), 0.0);
        assert_eq!(v.value("excision_gain"), 0.0);
    }

    #[test]
    fn excision_gain_rewards_removing_a_disruptive_word() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[("i", "prp"), ("like", "vbp"), ("uh", "uh"), ("this", "dt")],
        );
        // Revisit "uh" now that "this" is known.
        let v = edit_features(&mut dag, 2);
        assert_eq!(v.value("next_known"), 1.0);
        assert!(
            v.value("excision_gain") > 0.0,
            "removing the filler should make the next word more predictable"
        );
    }

    #[test]
    fn onset_alignment_flags_repeats() {
        let ms = models();
        let mut dag = dag_of(&ms, &[("i", "prp"), ("like", "vbp"), ("like", "vbp")]);
        let v = rp_start_features(&mut dag, 2);
        assert_eq!(v.value("align_word_1"), 1.0);
        assert_eq!(v.value("align_pos_1"), 1.0);
        assert_eq!(v.value("align_word_2"), 0.0);
        assert_eq!(v.value("edit_prev"), 0.0);
    }

    #[test]
    fn best_excision_features_dominate_single_candidates() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[("i", "prp"), ("want", "vbp"), ("like", "vbp"), ("this", "dt")],
        );
        let v = rp_start_features(&mut dag, 3);
        for m in ["lex", "pos"] {
            let base_wml = v.value(&format!("wml_{m}"));
            let best = v.value(&format!("best_wml_boost_{m}"));
            for x in 1..=3usize {
                let which = if m == "lex" {
                    WhichModel::Lex
                } else {
                    WhichModel::Pos
                };
                let boost = dag.wml(which, 3, &[(3 - x, 3)]) - base_wml;
                assert!(best >= boost - 1e-12);
            }
            assert!(best >= 0.0);
        }
    }

    #[test]
    fn window_violations_are_rejected() {
        let ms = models();
        let words: Vec<(&str, &str)> = std::iter::repeat_n(("like", "vbp"), 12).collect();
        let mut dag = dag_of(&ms, &words);
        assert!(rm_start_features(&mut dag, 9, 9).is_err());
        assert!(rm_start_features(&mut dag, 9, 10).is_err());
        assert!(matches!(
            rm_start_features(&mut dag, 9, 1),
            Err(Error::Window(_))
        ));
        assert!(rm_start_features(&mut dag, 9, 2).is_ok());
        assert!(matches!(
            rp_end_features(&mut dag, 0, 1, Some(9)),
            Err(Error::Window(_))
        ));
        assert!(rp_end_features(&mut dag, 0, 1, Some(8)).is_ok());
        assert!(rp_end_features(&mut dag, 1, 3, Some(2)).is_err());
        assert!(matches!(
            rp_end_features(&mut dag, 1, 9, Some(9)),
            Err(Error::Window(_))
        ));
        // An edit-term candidate can never begin a reparandum.
        dag.set_ed(8, true);
        assert!(rm_start_features(&mut dag, 9, 8).is_err());
    }

    #[test]
    fn verbatim_repeat_scores_exactly_zero_on_divergence_features() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[("i", "prp"), ("like", "vbp"), ("like", "vbp"), ("this", "dt")],
        );
        let v = rm_start_features(&mut dag, 2, 1).unwrap();
        assert_eq!(v.value("context_kl_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("context_kl_pos").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("align_word_onset"), 1.0);
        assert_eq!(v.value("distance"), 1.0);
        assert_eq!(v.value("edit_between"), 0.0);

        let v = rp_end_features(&mut dag, 1, 2, Some(2)).unwrap();
        assert_eq!(v.value("end_kl_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("end_kl_pos").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("rrd_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("rrd_pos").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("whole_span_equal"), 1.0);
        assert_eq!(v.value("len_equal"), 1.0);
        assert_eq!(v.value("align_end_word"), 1.0);
    }

    #[test]
    fn repeats_spanning_an_interregnum_still_score_zero() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[
                ("i", "prp"),
                ("like", "vbp"),
                ("uh", "uh"),
                ("like", "vbp"),
                ("this", "dt"),
            ],
        );
        dag.set_ed(2, true);
        let v = rm_start_features(&mut dag, 3, 1).unwrap();
        assert_eq!(v.value("context_kl_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("edit_between"), 1.0);
        assert_eq!(v.value("rm_span_live_len"), 1.0);
        assert_eq!(v.value("distance"), 2.0);
        let v = rp_end_features(&mut dag, 1, 3, Some(3)).unwrap();
        assert_eq!(v.value("rrd_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("end_kl_lex").to_bits(), 0.0f64.to_bits());
        assert_eq!(v.value("whole_span_equal"), 1.0);
    }

    #[test]
    fn substitution_diverges_where_repeats_do_not() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[("i", "prp"), ("want", "vbp"), ("like", "vbp"), ("this", "dt")],
        );
        let v = rp_end_features(&mut dag, 1, 2, Some(2)).unwrap();
        assert!(v.value("end_kl_lex") > 0.0);
        assert_ne!(v.value("rrd_lex"), 0.0);
        assert_eq!(v.value("whole_span_equal"), 0.0);
        assert_eq!(v.value("len_equal"), 1.0);
        // POS-identical substitution keeps the POS divergence at zero.
        assert_eq!(v.value("end_kl_pos").to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn delete_candidate_uses_empty_phase_conventions() {
        let ms = models();
        let mut dag = dag_of(
            &ms,
            &[("i", "prp"), ("want", "vbp"), ("i", "prp"), ("like", "vbp")],
        );
        // Hypothesis: delete "want"; the second "i" is the continuation.
        let v = rp_end_features(&mut dag, 1, 2, None).unwrap();
        assert_eq!(v.value("rp_len"), 0.0);
        assert_eq!(v.value("rm_len"), 1.0);
        assert_eq!(v.value("len_equal"), 0.0);
        assert_eq!(v.value("whole_span_equal"), 0.0);
        assert!(v.values.iter().all(|x| x.is_finite()));
    }
}
