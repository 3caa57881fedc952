//! Cost-sensitive random forests for the detector stages.
//!
//! A forest is a bag of depth-limited decision trees trained on bootstrap
//! samples with information-gain splits over a random subset of features.
//! Class imbalance between missing a repair and over-triggering is handled
//! by MetaCost-style relabeling: an ensemble of forests trained on small
//! resamples estimates class probabilities, every training example is
//! relabeled to the class with the lower expected cost, and the final
//! forest is trained on the relabeled data. All randomness flows from a
//! single seed, so training is reproducible bit for bit.

pub mod io;

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Misclassification costs. `false_negative` is the cost of calling a
/// positive example negative; raising it trades precision for recall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMatrix {
    pub false_negative: f64,
    pub false_positive: f64,
}

impl CostMatrix {
    pub fn new(false_negative: f64, false_positive: f64) -> Result<Self> {
        let invalid = |c: f64| c.is_nan() || c < 0.0;
        if invalid(false_negative) || invalid(false_positive) || false_negative + false_positive == 0.0 {
            return Err(Error::Config(format!(
                "costs must be non-negative and not both zero, got fn={false_negative} fp={false_positive}"
            )));
        }
        Ok(Self {
            false_negative,
            false_positive,
        })
    }

    pub fn uniform() -> Self {
        Self {
            false_negative: 1.0,
            false_positive: 1.0,
        }
    }
}

/// Training hyper-parameters; the defaults are the deployed configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Maximum number of decisions on any root-to-leaf path.
    pub max_depth: usize,
    pub metacost_iterations: usize,
    /// Fraction of the training set drawn (with replacement) per
    /// MetaCost iteration.
    pub resample_fraction: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 20,
            max_depth: 4,
            metacost_iterations: 10,
            resample_fraction: 0.25,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.metacost_iterations == 0 {
            return Err(Error::Config("metacost_iterations must be at least 1".into()));
        }
        if !(self.resample_fraction > 0.0 && self.resample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "resample_fraction must be in (0, 1], got {}",
                self.resample_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf {
        positive: bool,
    },
    /// Examples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn classify(&self, x: &[f64]) -> bool {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { positive } => return *positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Longest root-to-leaf path, counted in decisions.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

fn entropy(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for count in [pos, total - pos] {
        if count > 0 {
            let p = count as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    max_depth: usize,
    candidates: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, pos: usize, total: usize) -> u32 {
        // Ties resolve to the negative (fluent) class.
        self.nodes.push(Node::Leaf {
            positive: 2 * pos > total,
        });
        (self.nodes.len() - 1) as u32
    }

    fn build(&mut self, indices: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let total = indices.len();
        let pos = indices.iter().filter(|&&i| self.labels[i]).count();
        if depth == self.max_depth || pos == 0 || pos == total {
            return self.leaf(pos, total);
        }
        let d = self.rows[0].len();
        let sampled = rand::seq::index::sample(rng, d, self.candidates.min(d));
        let parent = entropy(pos, total);
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut scratch: Vec<(f64, bool)> = Vec::with_capacity(total);
        for feature in sampled {
            scratch.clear();
            scratch.extend(
                indices
                    .iter()
                    .map(|&i| (self.rows[i][feature], self.labels[i])),
            );
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for i in 1..total {
                if scratch[i - 1].1 {
                    left_pos += 1;
                }
                if scratch[i - 1].0 < scratch[i].0 {
                    let left = i;
                    let right = total - i;
                    let gain = parent
                        - (left as f64 / total as f64) * entropy(left_pos, left)
                        - (right as f64 / total as f64) * entropy(pos - left_pos, right);
                    if best.is_none_or(|(g, _, _)| gain > g) {
                        let threshold = (scratch[i - 1].0 + scratch[i].0) / 2.0;
                        best = Some((gain, feature, threshold));
                    }
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return self.leaf(pos, total);
        };
        if gain <= 1e-12 {
            return self.leaf(pos, total);
        }
        let (left_set, right_set): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.rows[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { positive: false }); // placeholder
        let left = self.build(&left_set, depth + 1, rng);
        let right = self.build(&right_set, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at as u32
    }
}

fn train_tree(rows: &[Vec<f64>], labels: &[bool], params: &ForestParams, seed: u64) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows.len();
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let d = rows[0].len();
    let mut builder = TreeBuilder {
        rows,
        labels,
        max_depth: params.max_depth,
        candidates: ((d as f64).sqrt().ceil() as usize).max(1),
        nodes: Vec::new(),
    };
    let root = builder.build(&bootstrap, 0, &mut rng);
    assert_eq!(root, 0);
    DecisionTree {
        nodes: builder.nodes,
    }
}

fn train_bagged(
    rows: &[Vec<f64>],
    labels: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Vec<DecisionTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.random()).collect();
    tree_seeds
        .par_iter()
        .map(|&s| train_tree(rows, labels, params, s))
        .collect()
}

/// Instrumentation captured during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub n_examples: usize,
    pub n_positive: usize,
    /// The training data contained only one class; the forest degenerates
    /// to a constant classifier.
    pub single_class: bool,
    pub metacost_iterations: usize,
    /// Size of each with-replacement resample used by MetaCost.
    pub resample_size: usize,
    pub relabeled_to_positive: usize,
    pub relabeled_to_negative: usize,
    pub positive_after_relabel: usize,
    pub max_tree_depth: usize,
}

/// A trained forest together with everything needed to check it is being
/// applied to the right inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub stage: String,
    pub feature_names: Vec<String>,
    pub cost: CostMatrix,
    pub params: ForestParams,
    pub(crate) trees: Vec<DecisionTree>,
}

impl Forest {
    /// Trains a cost-sensitive forest.
    ///
    /// MetaCost first trains `metacost_iterations` forests on small
    /// resamples; each example's positive-class probability is the
    /// unsmoothed fraction of those forests voting positive, and the
    /// example is relabeled positive exactly when
    /// `fn_cost * p > fp_cost * (1 - p)` (ties go negative). The returned
    /// forest is trained on the relabeled data.
    pub fn train(
        stage: &str,
        feature_names: &[String],
        rows: &[Vec<f64>],
        labels: &[bool],
        cost: CostMatrix,
        params: ForestParams,
    ) -> Result<(Forest, TrainReport)> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::Data(format!("no training examples for stage {stage}")));
        }
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.iter().any(|r| r.len() != feature_names.len()) {
            return Err(Error::Data(format!(
                "feature rows must have {} values",
                feature_names.len()
            )));
        }
        let n = rows.len();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let iter_seeds: Vec<u64> = (0..params.metacost_iterations).map(|_| rng.random()).collect();
        let final_seed: u64 = rng.random();

        let resample_size = ((n as f64 * params.resample_fraction).ceil() as usize).max(1);
        let ensembles: Vec<Vec<DecisionTree>> = iter_seeds
            .iter()
            .map(|&iter_seed| {
                let mut iter_rng = ChaCha8Rng::seed_from_u64(iter_seed);
                let sample: Vec<usize> = (0..resample_size)
                    .map(|_| iter_rng.random_range(0..n))
                    .collect();
                let sample_rows: Vec<Vec<f64>> = sample.iter().map(|&i| rows[i].clone()).collect();
                let sample_labels: Vec<bool> = sample.iter().map(|&i| labels[i]).collect();
                let forest_seed: u64 = iter_rng.random();
                train_bagged(&sample_rows, &sample_labels, &params, forest_seed)
            })
            .collect();

        let votes_needed = |trees: &[DecisionTree], x: &[f64]| {
            let votes = trees.iter().filter(|t| t.classify(x)).count();
            2 * votes > trees.len()
        };
        let mut relabeled = Vec::with_capacity(n);
        let mut to_positive = 0usize;
        let mut to_negative = 0usize;
        for (row, &orig) in rows.iter().zip(labels) {
            let positive_votes = ensembles.iter().filter(|e| votes_needed(e, row)).count();
            let p = positive_votes as f64 / ensembles.len() as f64;
            let new = cost.false_negative * p > cost.false_positive * (1.0 - p);
            if new && !orig {
                to_positive += 1;
            }
            if !new && orig {
                to_negative += 1;
            }
            relabeled.push(new);
        }

        let trees = train_bagged(rows, &relabeled, &params, final_seed);
        let report = TrainReport {
            n_examples: n,
            n_positive: labels.iter().filter(|&&y| y).count(),
            single_class: labels.iter().all(|&y| y) || labels.iter().all(|&y| !y),
            metacost_iterations: params.metacost_iterations,
            resample_size,
            relabeled_to_positive: to_positive,
            relabeled_to_negative: to_negative,
            positive_after_relabel: relabeled.iter().filter(|&&y| y).count(),
            max_tree_depth: trees.iter().map(DecisionTree::depth).max().unwrap_or(0),
        };
        let forest = Forest {
            stage: stage.to_string(),
            feature_names: feature_names.to_vec(),
            cost,
            params,
            trees,
        };
        Ok((forest, report))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Fraction of trees voting positive.
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.feature_names.len());
        let votes = self.trees.iter().filter(|t| t.classify(x)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Majority vote; an exact tie resolves to negative.
    pub fn classify(&self, x: &[f64]) -> bool {
        self.score(x) > 0.5
    }

    /// Checks that this forest was trained for `stage` with exactly the
    /// expected feature manifest.
    pub fn require_manifest(&self, stage: &str, expected: &[&str]) -> Result<()> {
        if self.stage != stage
            || self.feature_names.len() != expected.len()
            || self.feature_names.iter().zip(expected).any(|(a, &b)| a != b)
        {
            return Err(Error::ManifestMismatch(format!(
                "classifier was trained for stage `{}` with {} features; expected stage `{stage}` with {}",
                self.stage,
                self.feature_names.len(),
                expected.len()
            )));
        }
        Ok(())
    }
}
