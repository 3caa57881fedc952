//! Synthetic POS-tagged corpora with injected repairs and edit terms.
//!
//! Utterances are instantiated from a fixed set of part-of-speech
//! templates; each slot draws a word from a per-POS pool under a mildly
//! zipfian distribution so frequency effects resemble natural text. Repairs
//! are injected in front of upcoming material: a repeat copies the next few
//! words, a substitution copies them and swaps one word for another of the
//! same POS, and a delete inserts an abandoned start drawn from an
//! unrelated template. An interregnum (`uh`, `um`, rarely `i mean` /
//! `you know`) follows a quarter of reparanda, and isolated edit terms are
//! sprinkled between words.
//!
//! The per-opportunity injection probability is calibrated so that the
//! expected fraction of reparandum tokens in the output matches
//! `repair_rate`: with mean copied-span length `E_L` and mean inserted
//! tokens per repair `E_ADD`, `q = r / (E_L - r * E_ADD)`.

use super::{Corpus, RepairAnnotation, RepairKind, Token, Utterance};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_utterances: usize,
    /// Size of each open-class word pool.
    pub vocab_size: usize,
    /// Target fraction of output tokens that are reparandum words.
    pub repair_rate: f64,
    /// Relative weights for repeat, substitute, delete repairs.
    pub kind_mix: [f64; 3],
    /// Per-boundary probability of an isolated edit term.
    pub edit_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 500,
            vocab_size: 60,
            repair_rate: 0.08,
            kind_mix: [0.45, 0.35, 0.20],
            edit_rate: 0.04,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_utterances == 0 {
            return bad("n_utterances must be positive".into());
        }
        if self.vocab_size < 5 {
            return bad(format!("vocab_size {} too small (need >= 5)", self.vocab_size));
        }
        if !(0.0..=0.5).contains(&self.repair_rate) {
            return bad(format!("repair_rate {} outside [0, 0.5]", self.repair_rate));
        }
        if !(0.0..=0.3).contains(&self.edit_rate) {
            return bad(format!("edit_rate {} outside [0, 0.3]", self.edit_rate));
        }
        if self.kind_mix.iter().any(|&w| w.is_nan() || w < 0.0) {
            return bad(format!("kind_mix {:?} has a negative weight", self.kind_mix));
        }
        if self.kind_mix.iter().sum::<f64>() <= 0.0 {
            return bad("kind_mix weights sum to zero".into());
        }
        Ok(())
    }
}

/// Mean copied-span length under [`span_len`].
const E_L: f64 = 1.7;
/// Mean tokens added per injected repair (span copy plus interregnum).
const E_ADD: f64 = E_L + 0.275;

fn injection_prob(repair_rate: f64) -> f64 {
    if repair_rate <= 0.0 {
        return 0.0;
    }
    repair_rate / (E_L - repair_rate * E_ADD)
}

fn span_len(rng: &mut ChaCha8Rng) -> usize {
    // P(1)=.55, P(2)=.25, P(3)=.15, P(4)=.05; mean 1.7.
    let u: f64 = rng.random_range(0.0..1.0);
    if u < 0.55 {
        1
    } else if u < 0.80 {
        2
    } else if u < 0.95 {
        3
    } else {
        4
    }
}

struct Pool {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl Pool {
    fn new(words: Vec<String>) -> Self {
        let mut cumulative = Vec::with_capacity(words.len());
        let mut total = 0.0;
        for i in 0..words.len() {
            total += 1.0 / (i as f64 + 1.0);
            cumulative.push(total);
        }
        Self { words, cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &str {
        let total = *self.cumulative.last().expect("non-empty pool");
        let u = rng.random_range(0.0..total);
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.words[i.min(self.words.len() - 1)]
    }

    fn len(&self) -> usize {
        self.words.len()
    }
}

const NOUNS: &[&str] = &[
    "time", "people", "way", "day", "thing", "man", "world", "life", "hand", "part", "child",
    "eye", "woman", "place", "work", "week", "case", "point", "company", "number", "group",
    "problem", "fact", "night", "home", "water", "room", "mother", "area", "money", "story",
    "month", "book", "job", "word", "business", "issue", "side", "house", "friend",
];
const VBP: &[&str] = &[
    "have", "do", "say", "get", "make", "go", "know", "take", "see", "come", "think", "look",
    "want", "give", "use", "find", "tell", "need", "feel", "try",
];
const VBZ: &[&str] = &[
    "has", "does", "says", "gets", "makes", "goes", "knows", "takes", "sees", "comes", "thinks",
    "looks", "wants", "gives", "uses", "finds", "tells", "needs", "feels", "tries",
];
const VBD: &[&str] = &[
    "was", "had", "did", "said", "got", "made", "went", "knew", "took", "saw", "came", "thought",
    "looked", "wanted", "gave", "used", "found", "told", "needed", "felt",
];
const VB: &[&str] = &[
    "be", "have", "do", "say", "get", "make", "go", "know", "take", "see", "come", "think",
    "look", "want", "give", "use", "find", "tell", "need", "feel",
];
const JJ: &[&str] = &[
    "good", "new", "first", "last", "long", "great", "little", "own", "other", "old", "right",
    "big", "high", "different", "small", "large", "next", "early", "young", "important",
];
const RB: &[&str] = &[
    "really", "just", "now", "then", "here", "there", "still", "also", "never", "again", "often",
    "always", "maybe", "soon",
];

const TEMPLATES: &[&str] = &[
    "PRP VBP DT NN",
    "PRP VBZ DT JJ NN",
    "DT NN VBZ IN DT NN",
    "PRP MD VB DT NN",
    "PRP VBD DT NN CC PRP VBD IN DT NN",
    "DT JJ NN VBD RB",
    "PRP VBP IN DT NN IN DT NN",
    "PRP MD VB IN DT JJ NN",
    "DT NN IN DT NN VBZ JJ",
    "PRP VBP DT NN CC DT NN",
    "RB PRP VBD DT JJ NN",
    "PRP VBZ RB JJ",
    "PRP VBD IN DT NN",
    "DT NN VBD DT NN IN DT NN",
];

fn sized_pool(base: &[&str], stem: &str, size: usize) -> Pool {
    let mut words: Vec<String> = base.iter().take(size).map(|w| w.to_string()).collect();
    let mut k = 0usize;
    while words.len() < size {
        words.push(format!("{stem}{k}"));
        k += 1;
    }
    Pool::new(words)
}

fn build_pools(vocab_size: usize) -> BTreeMap<&'static str, Pool> {
    let closed = |words: &[&str]| Pool::new(words.iter().map(|w| w.to_string()).collect());
    let mut pools = BTreeMap::new();
    pools.insert("NN", sized_pool(NOUNS, "thing", vocab_size));
    pools.insert("VBP", sized_pool(VBP, "vop", vocab_size.min(40)));
    pools.insert("VBZ", sized_pool(VBZ, "vozs", vocab_size.min(40)));
    pools.insert("VBD", sized_pool(VBD, "voded", vocab_size.min(40)));
    pools.insert("VB", sized_pool(VB, "vo", vocab_size.min(40)));
    pools.insert("JJ", sized_pool(JJ, "adj", vocab_size.min(40)));
    pools.insert("RB", sized_pool(RB, "adv", vocab_size.min(30)));
    pools.insert("PRP", closed(&["i", "you", "he", "she", "it", "we", "they"]));
    pools.insert("DT", closed(&["the", "a", "this", "that"]));
    pools.insert("IN", closed(&["in", "on", "at", "with", "for", "from", "of", "about"]));
    pools.insert("CC", closed(&["and", "but", "or"]));
    pools.insert("MD", closed(&["can", "will", "would", "could", "should"]));
    pools.insert("UH", closed(&["uh", "um", "well"]));
    pools
}

struct Generator {
    pools: BTreeMap<&'static str, Pool>,
    templates: Vec<Vec<&'static str>>,
    q: f64,
    edit_rate: f64,
    kind_cumulative: [f64; 3],
    rng: ChaCha8Rng,
}

/// Tracks a repeat/substitute injection whose repair phase is the upcoming
/// template material, filled in as those words are emitted.
struct PendingPhase {
    rm_start: usize,
    rm_end: usize,
    interregnum: Vec<usize>,
    remaining: usize,
    rp_start: Option<usize>,
    kind: RepairKind,
}

impl Generator {
    fn new(config: &SynthConfig) -> Self {
        let mix_total: f64 = config.kind_mix.iter().sum();
        let mut acc = 0.0;
        let mut kind_cumulative = [0.0; 3];
        for (i, w) in config.kind_mix.iter().enumerate() {
            acc += w / mix_total;
            kind_cumulative[i] = acc;
        }
        Self {
            pools: build_pools(config.vocab_size),
            templates: TEMPLATES.iter().map(|t| t.split(' ').collect()).collect(),
            q: injection_prob(config.repair_rate),
            edit_rate: config.edit_rate,
            kind_cumulative,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    fn sample_kind(&mut self) -> RepairKind {
        let u: f64 = self.rng.random_range(0.0..1.0);
        if u < self.kind_cumulative[0] {
            RepairKind::Repeat
        } else if u < self.kind_cumulative[1] {
            RepairKind::Substitute
        } else {
            RepairKind::Delete
        }
    }

    fn sample_word(&mut self, pos: &str) -> String {
        let pool = self.pools.get(pos).unwrap_or_else(|| panic!("no pool for POS {pos}"));
        pool.sample(&mut self.rng).to_string()
    }

    fn interregnum_words(&mut self) -> Vec<(String, String)> {
        if self.rng.random_range(0.0..1.0) < 0.10 {
            if self.rng.random_range(0.0..1.0) < 0.5 {
                vec![("i".into(), "PRP".into()), ("mean".into(), "VBP".into())]
            } else {
                vec![("you".into(), "PRP".into()), ("know".into(), "VBP".into())]
            }
        } else if self.rng.random_range(0.0..1.0) < 0.5 {
            vec![("uh".into(), "UH".into())]
        } else {
            vec![("um".into(), "UH".into())]
        }
    }

    fn instantiate_template(&mut self) -> Vec<(String, String)> {
        let t = self.templates[self.rng.random_range(0..self.templates.len())].clone();
        t.iter().map(|pos| (self.sample_word(pos), pos.to_string())).collect()
    }

    /// Junk opening for a delete repair: the first words of an unrelated
    /// template, capped at three.
    fn junk_prefix(&mut self) -> Vec<(String, String)> {
        let len = span_len(&mut self.rng).min(3);
        let inst = self.instantiate_template();
        inst.into_iter().take(len).collect()
    }

    fn generate_utterance(&mut self) -> Utterance {
        let base = self.instantiate_template();
        let mut tokens: Vec<Token> = Vec::new();
        let mut repairs: Vec<RepairAnnotation> = Vec::new();
        let mut isolated = std::collections::BTreeSet::new();
        let mut pending: Option<PendingPhase> = None;

        let push = |tokens: &mut Vec<Token>, word: &str, pos: &str| -> usize {
            let index = tokens.len();
            tokens.push(Token::new(word, pos, index));
            index
        };

        for i in 0..base.len() {
            let in_phase = pending.is_some();
            if !in_phase && self.rng.random_range(0.0..1.0) < self.q {
                let kind = self.sample_kind();
                match kind {
                    RepairKind::Delete => {
                        let junk = self.junk_prefix();
                        let rm_start = tokens.len();
                        for (w, p) in &junk {
                            push(&mut tokens, w, p);
                        }
                        let rm_end = tokens.len() - 1;
                        let interregnum = self.maybe_interregnum(&mut tokens);
                        let next = tokens.len();
                        repairs.push(RepairAnnotation {
                            rm_start,
                            rm_end,
                            interregnum,
                            rp_start: next,
                            rp_end: next,
                            kind: RepairKind::Delete,
                        });
                    }
                    RepairKind::Repeat | RepairKind::Substitute => {
                        let span = span_len(&mut self.rng).min(base.len() - i);
                        let mut copy: Vec<(String, String)> =
                            base[i..i + span].to_vec();
                        let mut actual = RepairKind::Repeat;
                        if kind == RepairKind::Substitute {
                            if let Some(j) = self.swap_slot(&copy) {
                                let pos = copy[j].1.clone();
                                for _ in 0..16 {
                                    let w = self.sample_word(&pos);
                                    if w != copy[j].0 {
                                        copy[j].0 = w;
                                        actual = RepairKind::Substitute;
                                        break;
                                    }
                                }
                            }
                        }
                        let rm_start = tokens.len();
                        for (w, p) in &copy {
                            push(&mut tokens, w, p);
                        }
                        let rm_end = tokens.len() - 1;
                        let interregnum = self.maybe_interregnum(&mut tokens);
                        pending = Some(PendingPhase {
                            rm_start,
                            rm_end,
                            interregnum,
                            remaining: span,
                            rp_start: None,
                            kind: actual,
                        });
                    }
                }
            } else if !in_phase && self.rng.random_range(0.0..1.0) < self.edit_rate {
                let idx = push(&mut tokens, "uh", "UH");
                isolated.insert(idx);
            }

            let (w, p) = &base[i];
            let idx = push(&mut tokens, w, p);
            if let Some(ph) = pending.as_mut() {
                if ph.rp_start.is_none() {
                    ph.rp_start = Some(idx);
                }
                ph.remaining -= 1;
                if ph.remaining == 0 {
                    let ph = pending.take().unwrap();
                    repairs.push(RepairAnnotation {
                        rm_start: ph.rm_start,
                        rm_end: ph.rm_end,
                        interregnum: ph.interregnum,
                        rp_start: ph.rp_start.unwrap(),
                        rp_end: idx,
                        kind: ph.kind,
                    });
                }
            }
        }

        // Occasional abandoned start at the very end of the utterance.
        let delete_share = self.kind_cumulative[2] - self.kind_cumulative[1];
        if self.rng.random_range(0.0..1.0) < self.q * delete_share {
            let junk = self.junk_prefix();
            let rm_start = tokens.len();
            for (w, p) in &junk {
                push(&mut tokens, w, p);
            }
            let rm_end = tokens.len() - 1;
            let interregnum = self.maybe_interregnum(&mut tokens);
            let next = tokens.len();
            repairs.push(RepairAnnotation {
                rm_start,
                rm_end,
                interregnum,
                rp_start: next,
                rp_end: next,
                kind: RepairKind::Delete,
            });
        }

        repairs.sort_by_key(|r| (r.rm_start, r.rp_start));
        Utterance {
            tokens,
            repairs,
            isolated_edits: isolated,
        }
    }

    fn maybe_interregnum(&mut self, tokens: &mut Vec<Token>) -> Vec<usize> {
        if self.rng.random_range(0.0..1.0) >= 0.25 {
            return Vec::new();
        }
        let words = self.interregnum_words();
        let mut indices = Vec::new();
        for (w, p) in words {
            let index = tokens.len();
            tokens.push(Token::new(&w, &p, index));
            indices.push(index);
        }
        indices
    }

    /// A copy position whose POS pool is big enough to swap within.
    fn swap_slot(&mut self, copy: &[(String, String)]) -> Option<usize> {
        let eligible: Vec<usize> = (0..copy.len())
            .filter(|&j| self.pools.get(copy[j].1.as_str()).map(|p| p.len() >= 2).unwrap_or(false))
            .collect();
        if eligible.is_empty() {
            None
        } else {
            Some(eligible[self.rng.random_range(0..eligible.len())])
        }
    }
}

/// Generates a corpus; the same config always yields the same corpus.
pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut generator = Generator::new(config);
    let mut corpus = Corpus::default();
    for i in 0..config.n_utterances {
        let utt = generator.generate_utterance();
        utt.validate()?;
        corpus.line_numbers.push(i + 1);
        corpus.utterances.push(utt);
    }
    Ok(corpus)
}
