//! Interpolated Kneser-Ney n-gram language models.
//!
//! Models are trained over arbitrary token streams (words or POS tags).
//! Utterances are padded with `order - 1` start markers and one end marker;
//! tokens seen exactly once in training are replaced by `<unk>` so unknown
//! input has somewhere to go at query time. The highest order interpolates
//! discounted raw counts with lower orders; middle orders use continuation
//! counts; the unigram level interpolates continuation counts with a
//! uniform distribution over the vocabulary, so every probability is
//! strictly positive and each conditional distribution sums to one. A
//! context whose count total is zero falls through to the next order with
//! full weight.
//!
//! Queries take context token-id slices; ids are assigned by sorting the
//! vocabulary, so retraining on the same data (or reloading a saved model)
//! reproduces bit-identical probabilities.

mod distribution;
mod io;

pub use distribution::ContinuationDistribution;
pub use io::{model_from_str, model_to_string, read_model, write_model};

use crate::error::{Error, Result};
use std::collections::{BTreeSet, HashMap, HashSet};

pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_DISCOUNT: f64 = 0.75;

/// Largest supported model order; query paths use fixed-size context
/// buffers of this length.
pub const MAX_ORDER: usize = 6;

/// Fraction of contexts (heaviest first) whose entropy is precomputed.
const ENTROPY_CACHE_FRACTION: f64 = 0.20;

/// Observed continuations of one context at one level, sorted by word id,
/// with their count total. At the highest level the counts are raw n-gram
/// counts; at middle levels they are distinct-predecessor counts.
#[derive(Debug, Clone, Default)]
struct ContextStats {
    total: u64,
    items: Vec<(u32, u32)>,
}

impl ContextStats {
    fn count_of(&self, word: u32) -> u32 {
        match self.items.binary_search_by_key(&word, |&(w, _)| w) {
            Ok(i) => self.items[i].1,
            Err(_) => 0,
        }
    }

    fn distinct(&self) -> u32 {
        self.items.len() as u32
    }
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    /// id -> token string; id 0 is always `<s>`, the rest are sorted.
    words: Vec<String>,
    ids: HashMap<String, u32>,
    /// Highest level, keyed by contexts of length `order - 1`.
    highest: HashMap<Box<[u32]>, ContextStats>,
    /// Middle levels indexed by context length `1..=order-2`.
    middle: Vec<HashMap<Box<[u32]>, ContextStats>>,
    /// Distinct left contexts per word id (`N1+(.w)`).
    uni_cont: Vec<u32>,
    uni_total: u64,
    /// Number of word types with at least one left context.
    uni_types: u32,
    entropy_cache: HashMap<Box<[u32]>, f64>,
}

impl NGramModel {
    /// Trains a model of the given order on tokenized utterances.
    pub fn train<S: AsRef<str>>(
        order: usize,
        discount: f64,
        utterances: &[Vec<S>],
    ) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Config(format!(
                "model order must be in 2..={MAX_ORDER}, got {order}"
            )));
        }
        if !(0.0..1.0).contains(&discount) || discount <= 0.0 {
            return Err(Error::Config(format!(
                "discount must be in (0, 1), got {discount}"
            )));
        }

        // Replace tokens seen exactly once by <unk>.
        let mut freq: HashMap<&str, u32> = HashMap::new();
        for utt in utterances {
            for tok in utt {
                *freq.entry(tok.as_ref()).or_insert(0) += 1;
            }
        }
        fn effective<'a>(freq: &HashMap<&str, u32>, tok: &'a str) -> &'a str {
            if freq.get(tok).copied().unwrap_or(0) <= 1 {
                UNK
            } else {
                tok
            }
        }

        // Canonical ids: <s> first, everything else sorted.
        let mut types: BTreeSet<&str> = BTreeSet::new();
        types.insert(END);
        types.insert(UNK);
        for utt in utterances {
            for tok in utt {
                types.insert(effective(&freq, tok.as_ref()));
            }
        }
        let mut words: Vec<String> = Vec::with_capacity(types.len() + 1);
        words.push(START.to_string());
        words.extend(types.iter().map(|s| s.to_string()));
        let ids: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let end_id = ids[END];

        // Count highest-order n-grams over padded utterances.
        let mut counts: HashMap<Box<[u32]>, u32> = HashMap::new();
        let mut padded: Vec<u32> = Vec::new();
        for utt in utterances {
            padded.clear();
            padded.extend(std::iter::repeat_n(0u32, order - 1));
            padded.extend(utt.iter().map(|t| ids[effective(&freq, t.as_ref())]));
            padded.push(end_id);
            for window in padded.windows(order) {
                *counts.entry(window.into()).or_insert(0) += 1;
            }
        }

        let mut model = Self {
            order,
            discount,
            words,
            ids,
            highest: HashMap::new(),
            middle: vec![HashMap::new(); order.saturating_sub(1)],
            uni_cont: Vec::new(),
            uni_total: 0,
            uni_types: 0,
            entropy_cache: HashMap::new(),
        };
        model.build_tables(&counts);
        model.build_entropy_cache();
        Ok(model)
    }

    /// Derives every queryable table from highest-order counts.
    fn build_tables(&mut self, counts: &HashMap<Box<[u32]>, u32>) {
        let order = self.order;

        self.highest.clear();
        for (gram, &c) in counts {
            let stats = self
                .highest
                .entry(gram[..order - 1].into())
                .or_default();
            stats.total += c as u64;
            stats.items.push((gram[order - 1], c));
        }
        for stats in self.highest.values_mut() {
            stats.items.sort_unstable_by_key(|&(w, _)| w);
        }

        // Distinct lower-order n-gram types, from subwindows of the
        // highest-order types. Every short window of a padded utterance is
        // contained in some full-order window, so this is exact.
        let mut type_sets: Vec<HashSet<&[u32]>> = vec![HashSet::new(); order + 1];
        for gram in counts.keys() {
            for (len, set) in type_sets.iter_mut().enumerate().take(order).skip(2) {
                for window in gram.windows(len) {
                    set.insert(window);
                }
            }
        }

        // Unigram continuation counts from bigram types.
        self.uni_cont = vec![0; self.words.len()];
        let bigram_types: Box<dyn Iterator<Item = &[u32]>> = if order == 2 {
            Box::new(counts.keys().map(|k| &k[..]))
        } else {
            Box::new(type_sets[2].iter().copied())
        };
        for bigram in bigram_types {
            let w = bigram[1];
            if w != 0 {
                self.uni_cont[w as usize] += 1;
            }
        }
        self.uni_total = self.uni_cont.iter().map(|&c| c as u64).sum();
        self.uni_types = self.uni_cont.iter().filter(|&&c| c > 0).count() as u32;

        // Middle levels: for context length l, the continuation count of
        // (context, w) is the number of distinct predecessors of that
        // (l+1)-gram, i.e. the number of (l+2)-gram types ending with it.
        self.middle = vec![HashMap::new(); order.saturating_sub(1)];
        for level in 1..=order.saturating_sub(2) {
            let mut cont: HashMap<&[u32], u32> = HashMap::new();
            let source: Box<dyn Iterator<Item = &[u32]>> = if level + 2 == order {
                Box::new(counts.keys().map(|k| &k[..]))
            } else {
                Box::new(type_sets[level + 2].iter().copied())
            };
            for gram in source {
                let key = &gram[1..];
                if key[key.len() - 1] != 0 {
                    *cont.entry(key).or_insert(0) += 1;
                }
            }
            let table = &mut self.middle[level];
            for (key, n) in cont {
                let stats = table
                    .entry(key[..level].into())
                    .or_default();
                stats.total += n as u64;
                stats.items.push((key[level], n));
            }
            for stats in table.values_mut() {
                stats.items.sort_unstable_by_key(|&(w, _)| w);
            }
        }
    }

    fn build_entropy_cache(&mut self) {
        let mut contexts: Vec<(&Box<[u32]>, u64)> = self
            .highest
            .iter()
            .map(|(k, stats)| (k, stats.total))
            .collect();
        contexts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let keep = ((contexts.len() as f64) * ENTROPY_CACHE_FRACTION).ceil() as usize;
        let keys: Vec<Box<[u32]>> = contexts
            .into_iter()
            .take(keep)
            .map(|(k, _)| k.clone())
            .collect();
        self.entropy_cache = keys
            .into_iter()
            .map(|k| {
                let h = self.continuation(&k).entropy();
                (k, h)
            })
            .collect();
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Number of predictable word types (everything but `<s>`).
    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    pub fn start_id(&self) -> u32 {
        0
    }

    pub fn end_id(&self) -> u32 {
        self.ids[END]
    }

    pub fn unk_id(&self) -> u32 {
        self.ids[UNK]
    }

    /// Token id for a word, mapping unknown words to `<unk>`.
    pub fn encode(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or_else(|| self.unk_id())
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Predictable vocabulary ids (excludes `<s>`).
    pub fn vocab_ids(&self) -> impl Iterator<Item = u32> + '_ {
        1..self.words.len() as u32
    }

    /// Pads or trims a context to exactly `order - 1` ids.
    fn normalize_context(&self, context: &[u32]) -> ([u32; MAX_ORDER], usize) {
        let want = self.order - 1;
        let mut buf = [0u32; MAX_ORDER];
        if context.len() >= want {
            buf[..want].copy_from_slice(&context[context.len() - want..]);
        } else {
            let pad = want - context.len();
            buf[pad..want].copy_from_slice(context);
        }
        (buf, want)
    }

    /// `p(word | context)` under interpolated Kneser-Ney.
    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        let (buf, len) = self.normalize_context(context);
        let ctx = &buf[..len];
        match self.highest.get(ctx) {
            Some(stats) if stats.total > 0 => {
                let total = stats.total as f64;
                let c = stats.count_of(word) as f64;
                let head = (c - self.discount).max(0.0) / total;
                let weight = self.discount * stats.distinct() as f64 / total;
                head + weight * self.middle_prob(self.order - 2, &ctx[1..], word)
            }
            _ => self.middle_prob(self.order - 2, &ctx[1..], word),
        }
    }

    fn middle_prob(&self, level: usize, ctx: &[u32], word: u32) -> f64 {
        if level == 0 {
            return self.unigram_prob_id(word);
        }
        match self.middle[level].get(ctx) {
            Some(stats) if stats.total > 0 => {
                let total = stats.total as f64;
                let n = stats.count_of(word) as f64;
                let head = (n - self.discount).max(0.0) / total;
                let weight = self.discount * stats.distinct() as f64 / total;
                head + weight * self.middle_prob(level - 1, &ctx[1..], word)
            }
            _ => self.middle_prob(level - 1, &ctx[1..], word),
        }
    }

    /// Unigram probability with continuation counts, interpolated with the
    /// uniform distribution so unseen words keep strictly positive mass.
    pub fn unigram_prob_id(&self, word: u32) -> f64 {
        let v = self.vocab_size() as f64;
        if self.uni_total == 0 {
            return 1.0 / v;
        }
        let total = self.uni_total as f64;
        let n = self.uni_cont[word as usize] as f64;
        let head = (n - self.discount).max(0.0) / total;
        head + self.discount * self.uni_types as f64 / total / v
    }

    pub fn unigram_prob(&self, word: &str) -> f64 {
        self.unigram_prob_id(self.encode(word))
    }

    /// `-log2 p(word | context)`, in bits.
    pub fn surprisal(&self, context: &[u32], word: u32) -> f64 {
        -self.prob(context, word).log2()
    }

    pub fn unigram_surprisal(&self, word: u32) -> f64 {
        -self.unigram_prob_id(word).log2()
    }

    /// Log probability of the word normalized by its unigram information:
    /// `log2 p(w|ctx) / -log2 p_uni(w)`. Zero when the unigram carries no
    /// information (degenerate single-word vocabularies).
    pub fn wml(&self, context: &[u32], word: u32) -> f64 {
        let denom = self.unigram_surprisal(word);
        if denom <= 0.0 {
            return 0.0;
        }
        self.prob(context, word).log2() / denom
    }

    /// Sum of `log2 p` over a word sequence, advancing the context.
    pub fn sequence_logprob(&self, context: &[u32], words: &[u32]) -> f64 {
        let (mut buf, len) = self.normalize_context(context);
        let mut sum = 0.0;
        for &w in words {
            sum += self.prob(&buf[..len], w).log2();
            buf.copy_within(1..len, 0);
            buf[len - 1] = w;
        }
        sum
    }

    /// The next-word distribution for a context: exact probabilities for
    /// the continuations observed at the longest matching level, uniform
    /// mass elsewhere.
    pub fn continuation(&self, context: &[u32]) -> ContinuationDistribution {
        let (buf, len) = self.normalize_context(context);
        let ctx = &buf[..len];
        let observed: Option<Vec<u32>> = match self.highest.get(ctx) {
            Some(stats) if stats.total > 0 => {
                Some(stats.items.iter().map(|&(w, _)| w).collect())
            }
            _ => {
                let mut found = None;
                for level in (1..=self.order.saturating_sub(2)).rev() {
                    let sub = &ctx[len - level..];
                    if let Some(stats) = self.middle[level].get(sub) {
                        if stats.total > 0 {
                            found = Some(stats.items.iter().map(|&(w, _)| w).collect());
                            break;
                        }
                    }
                }
                found
            }
        };
        let observed = observed.unwrap_or_else(|| {
            (1..self.words.len() as u32)
                .filter(|&w| self.uni_cont[w as usize] > 0)
                .collect()
        });
        let explicit: Vec<(u32, f64)> = observed
            .into_iter()
            .map(|w| (w, self.prob(ctx, w)))
            .collect();
        ContinuationDistribution::new(explicit, self.vocab_size())
    }

    /// Next-word entropy of a context in bits, served from the cache when
    /// the context is among the heaviest fifth seen in training.
    pub fn entropy(&self, context: &[u32]) -> f64 {
        let (buf, len) = self.normalize_context(context);
        let ctx = &buf[..len];
        if let Some(&h) = self.entropy_cache.get(ctx) {
            return h;
        }
        self.continuation(ctx).entropy()
    }

    pub fn entropy_cache_len(&self) -> usize {
        self.entropy_cache.len()
    }

    pub fn entropy_cached(&self, context: &[u32]) -> Option<f64> {
        let (buf, len) = self.normalize_context(context);
        self.entropy_cache.get(&buf[..len]).copied()
    }

    pub fn context_count(&self) -> usize {
        self.highest.len()
    }

    /// Highest-order grams and raw counts, sorted by token sequence; the
    /// entire model can be rebuilt from these.
    pub(crate) fn sorted_counts(&self) -> Vec<(Vec<&str>, u32)> {
        let mut rows: Vec<(Vec<&str>, u32)> = Vec::new();
        for (ctx, stats) in &self.highest {
            for &(w, c) in &stats.items {
                let mut gram: Vec<&str> =
                    ctx.iter().map(|&id| self.words[id as usize].as_str()).collect();
                gram.push(&self.words[w as usize]);
                rows.push((gram, c));
            }
        }
        rows.sort();
        rows
    }

    /// Rebuilds a model from highest-order counts (token strings).
    pub(crate) fn from_counts(
        order: usize,
        discount: f64,
        rows: &[(Vec<String>, u32)],
    ) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Config(format!(
                "model order must be in 2..={MAX_ORDER}, got {order}"
            )));
        }
        let mut types: BTreeSet<&str> = BTreeSet::new();
        types.insert(END);
        types.insert(UNK);
        for (gram, _) in rows {
            for tok in gram {
                if tok != START {
                    types.insert(tok);
                }
            }
        }
        let mut words: Vec<String> = Vec::with_capacity(types.len() + 1);
        words.push(START.to_string());
        words.extend(types.iter().map(|s| s.to_string()));
        let ids: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut counts: HashMap<Box<[u32]>, u32> = HashMap::new();
        for (gram, c) in rows {
            if gram.len() != order {
                return Err(Error::Format(format!(
                    "expected {order}-grams, found {} tokens",
                    gram.len()
                )));
            }
            let key: Box<[u32]> = gram.iter().map(|t| ids[t.as_str()]).collect();
            if counts.insert(key, *c).is_some() {
                return Err(Error::Format("duplicate n-gram row".into()));
            }
        }
        let mut model = Self {
            order,
            discount,
            words,
            ids,
            highest: HashMap::new(),
            middle: vec![HashMap::new(); order.saturating_sub(1)],
            uni_cont: Vec::new(),
            uni_total: 0,
            uni_types: 0,
            entropy_cache: HashMap::new(),
        };
        model.build_tables(&counts);
        model.build_entropy_cache();
        Ok(model)
    }

    /// Convenience for tests and tools: encode a context of strings.
    pub fn encode_all(&self, words: &[&str]) -> Vec<u32> {
        words.iter().map(|w| self.encode(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn split(utts: &[&str]) -> Vec<Vec<String>> {
        utts.iter()
            .map(|u| u.split(' ').map(|w| w.to_string()).collect())
            .collect()
    }

    /// Bigram model over three two-word utterances; every probability below
    /// was worked out by hand from the count definitions.
    fn bigram_toy() -> NGramModel {
        NGramModel::train(2, 0.75, &split(&["a b", "a c", "b c"])).unwrap()
    }

    /// Trigram model where `d` occurs once and becomes `<unk>`.
    fn trigram_toy() -> NGramModel {
        NGramModel::train(3, 0.75, &split(&["a b c", "a b d", "b c a"])).unwrap()
    }

    #[test]
    fn bigram_unigram_continuation_probabilities() {
        let m = bigram_toy();
        assert_eq!(m.vocab_size(), 5); // a b c </s> <unk>
        assert_abs_diff_eq!(m.unigram_prob("a"), 17.0 / 140.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("b"), 37.0 / 140.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("c"), 37.0 / 140.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob(END), 37.0 / 140.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("zzz"), 3.0 / 35.0, epsilon = 1e-12);
    }

    #[test]
    fn bigram_conditional_probabilities() {
        let m = bigram_toy();
        let p = |ctx: &str, w: &str| m.prob(&[m.encode(ctx)], m.encode(w));
        assert_abs_diff_eq!(p("a", "b"), 181.0 / 560.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p("a", "c"), 181.0 / 560.0, epsilon = 1e-12);
        // `a a` never occurs: pure backoff with the interpolation weight.
        assert_abs_diff_eq!(p("a", "a"), 0.75 * 17.0 / 140.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            m.prob(&[m.encode("a")], m.end_id()),
            0.75 * 37.0 / 140.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            m.prob(&[m.encode("c")], m.end_id()),
            811.0 / 1120.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            m.prob(&[m.start_id()], m.encode("a")),
            1.25 / 3.0 + 17.0 / 280.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn trigram_interpolates_through_continuation_counts() {
        let m = trigram_toy();
        // d was a hapax: vocabulary is a b c </s> <unk>.
        assert_eq!(m.vocab_size(), 5);
        assert_abs_diff_eq!(m.unigram_prob("a"), 2.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("b"), 2.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("c"), 1.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob("d"), 1.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unigram_prob(END), 3.0 / 9.0, epsilon = 1e-12);
        let ctx = m.encode_all(&["a", "b"]);
        assert_abs_diff_eq!(m.prob(&ctx, m.encode("c")), 23.0 / 48.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            m.surprisal(&ctx, m.encode("c")),
            -(23.0f64 / 48.0).log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn hapax_words_are_indistinguishable_from_unknown_words() {
        let m = trigram_toy();
        assert_eq!(m.encode("d"), m.unk_id());
        let ctx = m.encode_all(&["a", "b"]);
        assert_abs_diff_eq!(
            m.prob(&ctx, m.encode("d")),
            m.prob(&ctx, m.encode("never-seen")),
            epsilon = 0.0
        );
    }

    #[test]
    fn conditionals_sum_to_one_at_every_level() {
        for m in [bigram_toy(), trigram_toy()] {
            let contexts: Vec<Vec<u32>> = vec![
                m.encode_all(&["a", "b"]),
                m.encode_all(&["b", "c"]),
                vec![m.start_id(), m.start_id()],
                // Unseen at the top, present in the middle level.
                m.encode_all(&["zzz", "b"]),
                // Unseen everywhere: pure unigram.
                m.encode_all(&["zzz", "zzz"]),
                vec![m.end_id(), m.end_id()],
            ];
            for ctx in contexts {
                let total: f64 = m.vocab_ids().map(|w| m.prob(&ctx, w)).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn unseen_context_falls_through_entirely() {
        let m = trigram_toy();
        // No trigram has </s> in the middle, so both levels miss and the
        // query must collapse to the unigram exactly.
        let ctx = vec![m.end_id(), m.end_id()];
        for w in ["a", "b", "c"] {
            assert_abs_diff_eq!(
                m.prob(&ctx, m.encode(w)),
                m.unigram_prob(w),
                epsilon = 0.0
            );
        }
        // An unknown word still has a live middle context (it replaced a
        // hapax), so only the top level falls through there.
        let partial = m.encode_all(&["zzz", "zzz"]);
        assert_abs_diff_eq!(
            m.prob(&partial, m.encode("a")),
            0.75 * m.unigram_prob("a"),
            epsilon = 1e-12
        );
    }

    #[test]
    fn short_contexts_are_padded_with_start() {
        let m = trigram_toy();
        let padded = m.prob(&[m.start_id(), m.start_id()], m.encode("a"));
        assert_abs_diff_eq!(m.prob(&[], m.encode("a")), padded, epsilon = 0.0);
        let long = m.prob(
            &[m.encode("x"), m.encode("a"), m.encode("b")],
            m.encode("c"),
        );
        assert_abs_diff_eq!(
            long,
            m.prob(&m.encode_all(&["a", "b"]), m.encode("c")),
            epsilon = 0.0
        );
    }

    #[test]
    fn continuation_distribution_matches_pointwise_probs_on_head() {
        let m = trigram_toy();
        let ctx = m.encode_all(&["a", "b"]);
        let d = m.continuation(&ctx);
        // Observed continuations of (a, b) are c and <unk>.
        assert_abs_diff_eq!(d.prob(m.encode("c")), m.prob(&ctx, m.encode("c")), epsilon = 0.0);
        assert_abs_diff_eq!(d.prob(m.unk_id()), m.prob(&ctx, m.unk_id()), epsilon = 0.0);
        let total: f64 = m.vocab_ids().map(|w| d.prob(w)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.entropy(), d.entropy_brute_force(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_cache_is_bit_identical_and_covers_top_fifth() {
        let m = trigram_toy();
        let expected = ((m.context_count() as f64) * 0.20).ceil() as usize;
        assert_eq!(m.entropy_cache_len(), expected);
        let ctx = vec![m.start_id(), m.start_id()];
        let cached = m.entropy_cached(&ctx).expect("heaviest context is cached");
        let fresh = m.continuation(&ctx).entropy();
        assert_eq!(cached.to_bits(), fresh.to_bits());
        assert_eq!(m.entropy(&ctx).to_bits(), fresh.to_bits());
    }

    #[test]
    fn training_is_deterministic() {
        let a = trigram_toy();
        let b = trigram_toy();
        let ctx = a.encode_all(&["a", "b"]);
        for w in a.vocab_ids() {
            assert_eq!(a.prob(&ctx, w).to_bits(), b.prob(&ctx, w).to_bits());
        }
        assert_eq!(
            a.entropy(&ctx).to_bits(),
            b.entropy(&ctx).to_bits()
        );
    }

    #[test]
    fn wml_normalizes_by_unigram_information() {
        let m = trigram_toy();
        let ctx = m.encode_all(&["a", "b"]);
        let w = m.encode("c");
        let expected = m.prob(&ctx, w).log2() / -m.unigram_prob_id(w).log2();
        assert_abs_diff_eq!(m.wml(&ctx, w), expected, epsilon = 1e-12);
        // A likelier-than-unigram word scores higher (closer to zero).
        assert!(m.wml(&ctx, w) > m.wml(&ctx, m.encode("a")));
    }

    #[test]
    fn sequence_logprob_chains_contexts() {
        let m = trigram_toy();
        let ctx = vec![m.start_id(), m.start_id()];
        let words = m.encode_all(&["a", "b", "c"]);
        let by_hand = m.prob(&ctx, words[0]).log2()
            + m.prob(&[m.start_id(), words[0]], words[1]).log2()
            + m.prob(&[words[0], words[1]], words[2]).log2();
        assert_abs_diff_eq!(m.sequence_logprob(&ctx, &words), by_hand, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NGramModel::train(1, 0.75, &split(&["a b"])).is_err());
        assert!(NGramModel::train(9, 0.75, &split(&["a b"])).is_err());
        assert!(NGramModel::train(3, 0.0, &split(&["a b"])).is_err());
        assert!(NGramModel::train(3, 1.5, &split(&["a b"])).is_err());
    }
}
