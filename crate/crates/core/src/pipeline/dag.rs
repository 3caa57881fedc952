//! Incremental prefix graph over the consumed words of one utterance.
//!
//! Each consumed token becomes a node holding its encodings and unigram
//! log-probabilities under the three models (fluent word, fluent POS,
//! edit-term word). Conditional quantities — surprisal, WML, continuation
//! entropy — are memoized by (word, context), so they are computed once
//! per distinct context even as routes change. Routes never mutate stored
//! values: marking a word as an edit term, or hypothetically excising a
//! reparandum span, only changes which nodes a context walk visits, and
//! queries along the new route append fresh memo entries. Node and memo
//! growth is therefore monotone, which the detector's complexity
//! accounting relies on.

use crate::lm::NGramModel;
use std::collections::HashMap;

/// Longest context any supported model can request.
pub const MAX_CTX: usize = crate::lm::MAX_ORDER - 1;

/// Which model a query runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WhichModel {
    /// Fluent word trigram model.
    Lex,
    /// Fluent POS-tag trigram model.
    Pos,
    /// Edit-term word bigram model.
    Edit,
}

impl WhichModel {
    pub const ALL: [WhichModel; 3] = [WhichModel::Lex, WhichModel::Pos, WhichModel::Edit];

    fn index(self) -> usize {
        match self {
            WhichModel::Lex => 0,
            WhichModel::Pos => 1,
            WhichModel::Edit => 2,
        }
    }
}

/// A fixed-width context key: the ids conditioning the next word, oldest
/// first, before start-padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CtxKey {
    ids: [u32; MAX_CTX],
    len: u8,
}

impl CtxKey {
    fn new(ids: &[u32]) -> Self {
        debug_assert!(ids.len() <= MAX_CTX);
        let mut buf = [0u32; MAX_CTX];
        buf[..ids.len()].copy_from_slice(ids);
        Self {
            ids: buf,
            len: ids.len() as u8,
        }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }
}

struct TokenNode {
    word: String,
    tag: String,
    /// Encodings under [lex, pos, edit] models.
    ids: [u32; 3],
    /// Unigram log2 probabilities, written once at append time.
    uni_lp: [f64; 3],
    /// Currently routed around as an edit term.
    ed: bool,
}

/// The prefix graph for one utterance.
pub struct PrefixDag<'m> {
    models: [&'m NGramModel; 3],
    tokens: Vec<TokenNode>,
    surprisal_memo: [HashMap<(u32, CtxKey), f64>; 3],
    entropy_memo: [HashMap<CtxKey, f64>; 3],
}

impl<'m> PrefixDag<'m> {
    pub fn new(lex: &'m NGramModel, pos: &'m NGramModel, edit: &'m NGramModel) -> Self {
        Self {
            models: [lex, pos, edit],
            tokens: Vec::new(),
            surprisal_memo: Default::default(),
            entropy_memo: Default::default(),
        }
    }

    pub fn model(&self, m: WhichModel) -> &'m NGramModel {
        self.models[m.index()]
    }

    /// Appends the next consumed token.
    pub fn push(&mut self, word: &str, tag: &str) {
        let ids = [
            self.models[0].encode(word),
            self.models[1].encode(tag),
            self.models[2].encode(word),
        ];
        let uni_lp = [
            self.models[0].unigram_prob_id(ids[0]).log2(),
            self.models[1].unigram_prob_id(ids[1]).log2(),
            self.models[2].unigram_prob_id(ids[2]).log2(),
        ];
        self.tokens.push(TokenNode {
            word: word.to_string(),
            tag: tag.to_string(),
            ids,
            uni_lp,
            ed: false,
        });
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.tokens[i].word
    }

    pub fn tag(&self, i: usize) -> &str {
        &self.tokens[i].tag
    }

    pub fn is_ed(&self, i: usize) -> bool {
        self.tokens[i].ed
    }

    /// Re-routes the graph around (or back through) token `i`.
    pub fn set_ed(&mut self, i: usize, ed: bool) {
        self.tokens[i].ed = ed;
    }

    pub fn id(&self, m: WhichModel, i: usize) -> u32 {
        self.tokens[i].ids[m.index()]
    }

    /// Stored unigram log2 probability of token `i`.
    pub fn unigram_lp(&self, m: WhichModel, i: usize) -> f64 {
        self.tokens[i].uni_lp[m.index()]
    }

    /// Is token `i` on the route: not an edit term and not inside any of
    /// the half-open excised spans?
    pub fn is_live(&self, i: usize, excise: &[(usize, usize)]) -> bool {
        !self.tokens[i].ed && !excise.iter().any(|&(a, b)| a <= i && i < b)
    }

    /// Live positions in `[from, to)`, in order.
    pub fn live_range(&self, from: usize, to: usize, excise: &[(usize, usize)]) -> Vec<usize> {
        (from..to.min(self.tokens.len()))
            .filter(|&i| self.is_live(i, excise))
            .collect()
    }

    /// The preceding live position, if any.
    pub fn live_before(&self, i: usize, excise: &[(usize, usize)]) -> Option<usize> {
        (0..i).rev().find(|&j| self.is_live(j, excise))
    }

    /// The context conditioning position `p` on the (possibly excised)
    /// route, sized for model `m`.
    pub fn context_before(&self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> CtxKey {
        let need = self.models[m.index()].order() - 1;
        let mut rev: Vec<u32> = Vec::with_capacity(need);
        let mut i = p;
        while i > 0 && rev.len() < need {
            i -= 1;
            if self.is_live(i, excise) {
                rev.push(self.tokens[i].ids[m.index()]);
            }
        }
        rev.reverse();
        CtxKey::new(&rev)
    }

    /// The context ending with (and including) position `p`: what
    /// conditions the next word after `p` on this route.
    pub fn context_through(&self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> CtxKey {
        debug_assert!(self.is_live(p, excise));
        let need = self.models[m.index()].order() - 1;
        let mut rev: Vec<u32> = vec![self.tokens[p].ids[m.index()]];
        let mut i = p;
        while i > 0 && rev.len() < need {
            i -= 1;
            if self.is_live(i, excise) {
                rev.push(self.tokens[i].ids[m.index()]);
            }
        }
        rev.reverse();
        CtxKey::new(&rev)
    }

    fn memoized_surprisal(&mut self, m: WhichModel, id: u32, ctx: CtxKey) -> f64 {
        let model = self.models[m.index()];
        *self.surprisal_memo[m.index()]
            .entry((id, ctx))
            .or_insert_with(|| model.surprisal(ctx.as_slice(), id))
    }

    /// Surprisal of token `p` given the route context, in bits.
    pub fn surprisal(&mut self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> f64 {
        let ctx = self.context_before(m, p, excise);
        self.memoized_surprisal(m, self.tokens[p].ids[m.index()], ctx)
    }

    /// WML of token `p` on the route: `log2 p(w|ctx) / -log2 p_uni(w)`,
    /// zero when the unigram carries no information.
    pub fn wml(&mut self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> f64 {
        let denom = -self.tokens[p].uni_lp[m.index()];
        if denom <= 0.0 {
            return 0.0;
        }
        -self.surprisal(m, p, excise) / denom
    }

    /// Continuation entropy of the context that predicts position `p`.
    pub fn entropy_before(&mut self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> f64 {
        let ctx = self.context_before(m, p, excise);
        self.entropy_of(m, ctx)
    }

    /// Continuation entropy after consuming position `p` on the route.
    pub fn entropy_through(&mut self, m: WhichModel, p: usize, excise: &[(usize, usize)]) -> f64 {
        let ctx = self.context_through(m, p, excise);
        self.entropy_of(m, ctx)
    }

    pub fn entropy_of(&mut self, m: WhichModel, ctx: CtxKey) -> f64 {
        let model = self.models[m.index()];
        *self.entropy_memo[m.index()]
            .entry(ctx)
            .or_insert_with(|| model.entropy(ctx.as_slice()))
    }

    /// Sum of `log2 p` over the words at `positions`, read as a fresh
    /// start-padded sequence (the route is the list itself).
    pub fn sequence_lp(&mut self, m: WhichModel, positions: &[usize]) -> f64 {
        let need = self.models[m.index()].order() - 1;
        let mut sum = 0.0;
        for (j, &p) in positions.iter().enumerate() {
            let from = j.saturating_sub(need);
            let ctx_ids: Vec<u32> = positions[from..j]
                .iter()
                .map(|&q| self.tokens[q].ids[m.index()])
                .collect();
            let ctx = CtxKey::new(&ctx_ids);
            sum -= self.memoized_surprisal(m, self.tokens[p].ids[m.index()], ctx);
        }
        sum
    }

    /// Number of token nodes written (monotone under `push`).
    pub fn node_count(&self) -> usize {
        self.tokens.len()
    }

    /// Total memo entries across models (monotone under queries).
    pub fn memo_entries(&self) -> usize {
        self.surprisal_memo.iter().map(HashMap::len).sum::<usize>()
            + self.entropy_memo.iter().map(HashMap::len).sum::<usize>()
    }
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
                "i like that",
                "you like this",
                "i want this one",
                "you want that one",
            ]),
        )
        .unwrap();
        let pos = NGramModel::train(
            3,
            0.75,
            &sentences(&["prp vbp dt cd", "prp vbp dt", "prp vbp dt cd", "uh uh"]),
        )
        .unwrap();
        let edit = NGramModel::train(2, 0.75, &sentences(&["uh", "uh uh", "i mean"])).unwrap();
        (lex, pos, edit)
    }

    fn push_all(dag: &mut PrefixDag, pairs: &[(&str, &str)]) {
        for (w, t) in pairs {
            dag.push(w, t);
        }
    }

    #[test]
    fn surprisal_and_wml_match_direct_model_queries() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(
            &mut dag,
            &[("i", "prp"), ("like", "vbp"), ("this", "dt"), ("one", "cd")],
        );
        // Position 2 conditioned on the two preceding words.
        let ctx = [lex.encode("i"), lex.encode("like")];
        let direct = lex.surprisal(&ctx, lex.encode("this"));
        assert_eq!(dag.surprisal(WhichModel::Lex, 2, &[]).to_bits(), direct.to_bits());
        let direct_wml = lex.wml(&ctx, lex.encode("this"));
        assert_eq!(dag.wml(WhichModel::Lex, 2, &[]).to_bits(), direct_wml.to_bits());
        // Utterance-initial word sees pure start padding.
        let direct0 = lex.surprisal(&[], lex.encode("i"));
        assert_eq!(dag.surprisal(WhichModel::Lex, 0, &[]).to_bits(), direct0.to_bits());
        // POS model runs on tags, not words.
        let direct_pos = pos.surprisal(&[pos.encode("prp"), pos.encode("vbp")], pos.encode("dt"));
        assert_eq!(dag.surprisal(WhichModel::Pos, 2, &[]).to_bits(), direct_pos.to_bits());
        // The bigram edit model uses a one-word context.
        let direct_edit = edit.surprisal(&[edit.encode("like")], edit.encode("this"));
        assert_eq!(dag.surprisal(WhichModel::Edit, 2, &[]).to_bits(), direct_edit.to_bits());
    }

    #[test]
    fn ed_marking_reroutes_context() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(&mut dag, &[("i", "prp"), ("uh", "uh"), ("like", "vbp")]);
        let with_uh = lex.surprisal(&[lex.encode("i"), lex.encode("uh")], lex.encode("like"));
        assert_eq!(
            dag.surprisal(WhichModel::Lex, 2, &[]).to_bits(),
            with_uh.to_bits()
        );
        dag.set_ed(1, true);
        let without_uh = lex.surprisal(&[lex.encode("i")], lex.encode("like"));
        assert_eq!(
            dag.surprisal(WhichModel::Lex, 2, &[]).to_bits(),
            without_uh.to_bits()
        );
        assert_eq!(dag.live_before(2, &[]), Some(0));
        assert_eq!(dag.live_range(0, 3, &[]), vec![0, 2]);
    }

    #[test]
    fn excised_span_equals_ed_rerouting_bitwise() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(
            &mut dag,
            &[("i", "prp"), ("like", "vbp"), ("want", "vbp"), ("this", "dt")],
        );
        // Excising position 1 vs. marking it ed must agree everywhere.
        let excised = dag.surprisal(WhichModel::Lex, 3, &[(1, 2)]);
        dag.set_ed(1, true);
        let rerouted = dag.surprisal(WhichModel::Lex, 3, &[]);
        assert_eq!(excised.to_bits(), rerouted.to_bits());
    }

    #[test]
    fn entropy_queries_match_model() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(&mut dag, &[("i", "prp"), ("like", "vbp")]);
        let direct = lex.entropy(&[lex.encode("i"), lex.encode("like")]);
        assert_eq!(
            dag.entropy_through(WhichModel::Lex, 1, &[]).to_bits(),
            direct.to_bits()
        );
        let before = lex.entropy(&[lex.encode("i")]);
        assert_eq!(
            dag.entropy_before(WhichModel::Lex, 1, &[]).to_bits(),
            before.to_bits()
        );
        // Empty context: start padding only.
        let h0 = lex.entropy(&[]);
        assert_eq!(
            dag.entropy_before(WhichModel::Lex, 0, &[]).to_bits(),
            h0.to_bits()
        );
    }

    #[test]
    fn sequence_lp_chains_surprisals() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(
            &mut dag,
            &[("i", "prp"), ("like", "vbp"), ("this", "dt"), ("one", "cd")],
        );
        let ids: Vec<u32> = ["i", "like", "one"].iter().map(|w| lex.encode(w)).collect();
        let manual = -lex.surprisal(&[], ids[0]) - lex.surprisal(&ids[..1], ids[1])
            - lex.surprisal(&ids[..2], ids[2]);
        let got = dag.sequence_lp(WhichModel::Lex, &[0, 1, 3]);
        assert!((got - manual).abs() < 1e-12);
    }

    #[test]
    fn growth_is_monotone_and_memos_are_stable() {
        let (lex, pos, edit) = models();
        let mut dag = PrefixDag::new(&lex, &pos, &edit);
        push_all(&mut dag, &[("i", "prp"), ("like", "vbp"), ("this", "dt")]);
        let nodes_before = dag.node_count();
        let s_base = dag.surprisal(WhichModel::Lex, 2, &[]);
        let memo_before = dag.memo_entries();
        // New routes add entries; the old route's value survives unchanged.
        dag.set_ed(1, true);
        let _ = dag.surprisal(WhichModel::Lex, 2, &[]);
        assert!(dag.memo_entries() >= memo_before);
        dag.set_ed(1, false);
        assert_eq!(dag.surprisal(WhichModel::Lex, 2, &[]).to_bits(), s_base.to_bits());
        dag.push("one", "cd");
        assert!(dag.node_count() > nodes_before);
        // Repeating a query adds nothing.
        let stable = dag.memo_entries();
        let _ = dag.surprisal(WhichModel::Lex, 2, &[]);
        assert_eq!(dag.memo_entries(), stable);
    }
}
