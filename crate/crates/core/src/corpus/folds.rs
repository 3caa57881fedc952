//! Deterministic cross-validation fold assignment.
//!
//! Utterance indices are shuffled with a seeded generator and dealt
//! round-robin, so fold sizes never differ by more than one and the same
//! seed always reproduces the same split. Assignments can be written to a
//! small text manifest so separate runs share a split.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// `folds[i]` is the fold of utterance `i`.
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {k}")));
        }
        if k > n {
            return Err(Error::Config(format!(
                "cannot split {n} utterances into {k} folds"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut folds = vec![0usize; n];
        for (deal, &utt) in order.iter().enumerate() {
            folds[utt] = deal % k;
        }
        Ok(Self { k, seed, folds })
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Utterance indices held out as the test side of `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// Utterance indices on the training side of `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        out.push_str("fold-assignment\n");
        out.push_str("version 1\n");
        out.push_str(&format!("k {}\n", self.k));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("count {}\n", self.folds.len()));
        for f in &self.folds {
            out.push_str(&format!("{f}\n"));
        }
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |msg: &str| Error::Format(format!("fold manifest: {msg}"));
        if lines.next() != Some("fold-assignment") {
            return Err(bad("missing fold-assignment header"));
        }
        if lines.next() != Some("version 1") {
            return Err(bad("unsupported version"));
        }
        let mut field = |name: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let value = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(&format!("expected `{name} <value>`")))?;
            value
                .parse()
                .map_err(|_| bad(&format!("bad {name} value `{value}`")))
        };
        let k = field("k")? as usize;
        let seed = field("seed")?;
        let count = field("count")? as usize;
        let mut folds = Vec::with_capacity(count);
        for line in lines {
            let f: usize = line
                .parse()
                .map_err(|_| bad(&format!("bad fold line `{line}`")))?;
            if f >= k {
                return Err(bad(&format!("fold {f} out of range for k={k}")));
            }
            folds.push(f);
        }
        if folds.len() != count {
            return Err(bad(&format!(
                "expected {count} assignments, found {}",
                folds.len()
            )));
        }
        Ok(Self { k, seed, folds })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_manifest())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_manifest(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_reproduces_assignment() {
        let a = FoldAssignment::new(37, 10, 7).unwrap();
        let b = FoldAssignment::new(37, 10, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = FoldAssignment::new(50, 5, 1).unwrap();
        let b = FoldAssignment::new(50, 5, 2).unwrap();
        assert_ne!(a.folds, b.folds);
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let a = FoldAssignment::new(37, 10, 0).unwrap();
        let sizes: Vec<usize> = (0..10).map(|f| a.test_indices(f).len()).collect();
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(max - min <= 1, "sizes {sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 37);
    }

    #[test]
    fn train_and_test_partition() {
        let a = FoldAssignment::new(23, 4, 9).unwrap();
        for f in 0..4 {
            let mut all = a.train_indices(f);
            all.extend(a.test_indices(f));
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_degenerate_fold_counts() {
        assert!(FoldAssignment::new(10, 1, 0).is_err());
        assert!(FoldAssignment::new(3, 4, 0).is_err());
        assert!(FoldAssignment::new(2, 2, 0).is_ok());
    }

    #[test]
    fn manifest_round_trips() {
        let a = FoldAssignment::new(17, 3, 123).unwrap();
        let b = FoldAssignment::from_manifest(&a.to_manifest()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn manifest_rejects_out_of_range_fold() {
        let text = "fold-assignment\nversion 1\nk 2\nseed 0\ncount 1\n5\n";
        assert!(FoldAssignment::from_manifest(text).is_err());
    }
}
