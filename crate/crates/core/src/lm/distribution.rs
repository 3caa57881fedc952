//! Next-word distributions with an explicit head and a uniform tail.
//!
//! A full conditional distribution over the vocabulary is expensive to
//! enumerate, so we keep exact probabilities only for the continuations
//! actually observed after a context and spread the remaining mass evenly
//! over every other vocabulary word. Entropy and divergence then reduce to
//! a sum over the explicit head plus one closed-form term for the tail,
//! which matches a brute-force enumeration of the same distribution to
//! floating-point accuracy.

/// A probability distribution over vocabulary ids `1..=n` (id 0 is the
/// sentence-start marker, which is never predicted).
#[derive(Debug, Clone)]
pub struct ContinuationDistribution {
    /// `(word id, probability)`, sorted by id.
    explicit: Vec<(u32, f64)>,
    /// Per-word probability of each word outside the explicit head.
    tail: f64,
    tail_count: usize,
    vocab_size: usize,
}

impl ContinuationDistribution {
    /// Builds the distribution from exact head probabilities. `explicit`
    /// must be sorted by id with no duplicates; leftover mass is spread
    /// uniformly over the other `vocab_size - explicit.len()` words. If the
    /// head already covers the whole vocabulary it is renormalized instead.
    pub fn new(mut explicit: Vec<(u32, f64)>, vocab_size: usize) -> Self {
        debug_assert!(explicit.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(explicit.len() <= vocab_size);
        let head_mass: f64 = explicit.iter().map(|&(_, p)| p).sum();
        let tail_count = vocab_size - explicit.len();
        let tail = if tail_count == 0 {
            if head_mass > 0.0 {
                for e in explicit.iter_mut() {
                    e.1 /= head_mass;
                }
            }
            0.0
        } else {
            ((1.0 - head_mass) / tail_count as f64).max(0.0)
        };
        Self {
            explicit,
            tail,
            tail_count,
            vocab_size,
        }
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self::new(Vec::new(), vocab_size)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn prob(&self, word: u32) -> f64 {
        match self.explicit.binary_search_by_key(&word, |&(w, _)| w) {
            Ok(i) => self.explicit[i].1,
            Err(_) => self.tail,
        }
    }

    fn is_explicit(&self, word: u32) -> bool {
        self.explicit.binary_search_by_key(&word, |&(w, _)| w).is_ok()
    }

    /// Shannon entropy in bits, with the uniform tail folded into a single
    /// closed-form term.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for &(_, p) in &self.explicit {
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        if self.tail > 0.0 && self.tail_count > 0 {
            h -= self.tail_count as f64 * self.tail * self.tail.log2();
        }
        h
    }

    /// Entropy by enumerating every vocabulary word; test oracle for
    /// [`entropy`](Self::entropy).
    pub fn entropy_brute_force(&self) -> f64 {
        let mut h = 0.0;
        for id in 1..=self.vocab_size as u32 {
            let p = self.prob(id);
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        h
    }

    /// KL divergence `D(self || other)` in bits. Words explicit in either
    /// distribution are summed directly; the shared tail collapses to one
    /// term.
    pub fn kl(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.vocab_size, other.vocab_size);
        let mut sum = 0.0;
        let mut shared_tail = self.tail_count;
        let mut term = |p: f64, q: f64| {
            if p > 0.0 {
                sum += p * (p / q).log2();
            }
        };
        for &(w, p) in &self.explicit {
            term(p, other.prob(w));
        }
        for &(w, q) in &other.explicit {
            if !self.is_explicit(w) {
                term(self.tail, q);
                shared_tail -= 1;
            }
        }
        if shared_tail > 0 && self.tail > 0.0 {
            sum += shared_tail as f64 * self.tail * (self.tail / other.tail).log2();
        }
        sum
    }

    /// KL divergence by full enumeration; test oracle for [`kl`](Self::kl).
    pub fn kl_brute_force(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        for id in 1..=self.vocab_size as u32 {
            let p = self.prob(id);
            if p > 0.0 {
                sum += p * (p / other.prob(id)).log2();
            }
        }
        sum
    }
}
