//! Per-stage feature vectors and information-gain feature ranking.
//!
//! Each detector stage consumes a fixed, ordered feature set; the names
//! below are frozen and persisted next to trained classifiers so a stale
//! model can never be silently applied to differently-shaped vectors.
//! Extraction itself lives in [`extract`]; this module owns the manifests,
//! the vector type, and the ranking used to compare features.

pub mod extract;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The four classification stages of the detector pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Is the current (or previous) word an edit term?
    Edit,
    /// Does the current word start a repair phase?
    RpStart,
    /// Does a backtracked candidate start the reparandum?
    RmStart,
    /// Does the repair phase end at the current word?
    RpEnd,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Edit => "edit",
            Stage::RpStart => "rp_start",
            Stage::RmStart => "rm_start",
            Stage::RpEnd => "rp_end",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Data(format!("unknown stage `{name}`")))
    }

    /// The frozen, ordered feature-name list for this stage.
    pub fn manifest(self) -> &'static [&'static str] {
        match self {
            Stage::Edit => &EDIT_FEATURES,
            Stage::RpStart => &RP_START_FEATURES,
            Stage::RmStart => &RM_START_FEATURES,
            Stage::RpEnd => &RP_END_FEATURES,
        }
    }

    pub fn arity(self) -> usize {
        self.manifest().len()
    }
}

/// Edit-term stage: the word under test plus its predecessor, under both
/// the edit-term bigram model and the fluent trigram model, and a
/// lookahead-excision cue for delayed decisions.
pub const EDIT_FEATURES: [&str; 8] = [
    "edit_surprisal",
    "fluent_surprisal",
    "edit_fluent_gap",
    "prev_edit_surprisal",
    "prev_fluent_surprisal",
    "prev_edit_fluent_gap",
    "next_known",
    "excision_gain",
];

/// Repair-onset stage: eight information measures per model, three-word
/// alignment windows, and an edit flag on the previous word.
pub const RP_START_FEATURES: [&str; 23] = [
    "s_lex",
    "wml_lex",
    "delta_wml_lex",
    "best_wml_boost_lex",
    "entropy_lex",
    "info_gain_lex",
    "delta_entropy_lex",
    "best_entropy_reduce_lex",
    "s_pos",
    "wml_pos",
    "delta_wml_pos",
    "best_wml_boost_pos",
    "entropy_pos",
    "info_gain_pos",
    "delta_entropy_pos",
    "best_entropy_reduce_pos",
    "align_word_1",
    "align_word_2",
    "align_word_3",
    "align_pos_1",
    "align_pos_2",
    "align_pos_3",
    "edit_prev",
];

/// Reparandum-onset stage: excision fluency gains and candidate-local
/// measures per model, plus span geometry and alignment.
pub const RM_START_FEATURES: [&str; 32] = [
    "wml_boost_lex",
    "wml_boost_delta_lex",
    "cand_surprisal_lex",
    "cand_wml_lex",
    "cand_unigram_lp_lex",
    "cand_entropy_lex",
    "cand_entropy_after_lex",
    "onset_surprisal_excised_lex",
    "onset_surprisal_drop_lex",
    "onset_wml_excised_lex",
    "onset_info_gain_excised_lex",
    "context_kl_lex",
    "wml_boost_pos",
    "wml_boost_delta_pos",
    "cand_surprisal_pos",
    "cand_wml_pos",
    "cand_unigram_lp_pos",
    "cand_entropy_pos",
    "cand_entropy_after_pos",
    "onset_surprisal_excised_pos",
    "onset_surprisal_drop_pos",
    "onset_wml_excised_pos",
    "onset_info_gain_excised_pos",
    "context_kl_pos",
    "distance",
    "rm_span_live_len",
    "cand_is_initial",
    "align_word_onset",
    "align_pos_onset",
    "align_word_successor",
    "align_pos_successor",
    "edit_between",
];

/// Repair-end stage: end-context divergence and span-substitution scores
/// per model, plus span lengths and end alignment.
pub const RP_END_FEATURES: [&str; 23] = [
    "end_kl_lex",
    "rrd_lex",
    "cand_surprisal_lex",
    "cand_wml_lex",
    "cand_entropy_lex",
    "cand_entropy_after_lex",
    "end_wml_boost_lex",
    "rm_end_entropy_after_lex",
    "end_kl_pos",
    "rrd_pos",
    "cand_surprisal_pos",
    "cand_wml_pos",
    "cand_entropy_pos",
    "cand_entropy_after_pos",
    "end_wml_boost_pos",
    "rm_end_entropy_after_pos",
    "rp_len",
    "rm_len",
    "len_equal",
    "align_end_word",
    "align_end_pos",
    "align_start_word",
    "whole_span_equal",
];

/// An ordered feature vector for one stage; booleans are encoded 0.0/1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub stage: Stage,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(stage: Stage, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            stage.arity(),
            "{} stage expects {} features, got {}",
            stage.name(),
            stage.arity(),
            values.len()
        );
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { stage, values }
    }

    /// Value by manifest name; panics on unknown names (test convenience).
    pub fn value(&self, name: &str) -> f64 {
        let i = self
            .stage
            .manifest()
            .iter()
            .position(|&n| n == name)
            .unwrap_or_else(|| panic!("no feature `{name}` in stage {}", self.stage.name()));
        self.values[i]
    }
}

/// One feature's standing after cross-validated information-gain scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub name: String,
    /// Mean information gain over folds, in bits.
    pub merit: f64,
    pub merit_sd: f64,
    /// Mean 1-based rank over folds.
    pub mean_rank: f64,
}

#[derive(Debug, Clone)]
pub struct RankingReport {
    /// Sorted by mean merit, descending.
    pub features: Vec<RankedFeature>,
    /// Set when the dataset had a single class: every merit is zero.
    pub single_class: bool,
}

fn class_entropy(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for count in [positives, total - positives] {
        if count > 0 {
            let p = count as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// Information gain of one feature after equal-frequency discretization
/// into at most `bins` intervals.
pub fn information_gain(values: &[f64], labels: &[bool], bins: usize) -> f64 {
    assert_eq!(values.len(), labels.len());
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    // Cut points at the bin-boundary quantiles, deduplicated so runs of
    // equal values never straddle a boundary.
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = Vec::new();
    for b in 1..bins {
        let idx = (b * n) / bins;
        if idx > 0 && idx < n {
            let cut = sorted[idx - 1];
            if cuts.last().is_none_or(|&c| c < cut) {
                cuts.push(cut);
            }
        }
    }
    // Tally class counts per bin; bin of v = number of cuts < v.
    let mut bin_total = vec![0usize; cuts.len() + 1];
    let mut bin_pos = vec![0usize; cuts.len() + 1];
    for (&v, &y) in values.iter().zip(labels) {
        let b = cuts.partition_point(|&c| c < v);
        bin_total[b] += 1;
        if y {
            bin_pos[b] += 1;
        }
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let mut conditional = 0.0;
    for (t, p) in bin_total.iter().zip(&bin_pos) {
        if *t > 0 {
            conditional += (*t as f64 / n as f64) * class_entropy(*p, *t);
        }
    }
    (class_entropy(positives, n) - conditional).max(0.0)
}

/// Number of equal-frequency bins used by the ranking.
pub const RANKING_BINS: usize = 10;

/// Ranks features by information gain with respect to the labels,
/// cross-validated: merits are computed on the training side of each fold
/// and aggregated as mean, standard deviation, and mean rank.
pub fn information_gain_ranking(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[bool],
    folds: usize,
    seed: u64,
) -> Result<RankingReport> {
    if rows.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} feature rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.iter().any(|r| r.len() != names.len()) {
        return Err(Error::Data("feature row arity mismatch".into()));
    }
    let assignment = crate::corpus::folds::FoldAssignment::new(rows.len(), folds, seed)?;
    let single_class = labels.iter().all(|&y| y) || labels.iter().all(|&y| !y);

    let d = names.len();
    let mut merits: Vec<Vec<f64>> = vec![Vec::with_capacity(folds); d];
    let mut ranks: Vec<Vec<f64>> = vec![Vec::with_capacity(folds); d];
    for fold in 0..folds {
        let train = assignment.train_indices(fold);
        let fold_labels: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let fold_merits: Vec<f64> = (0..d)
            .map(|f| {
                let values: Vec<f64> = train.iter().map(|&i| rows[i][f]).collect();
                information_gain(&values, &fold_labels, RANKING_BINS)
            })
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        // Ties rank by name so the outcome is independent of column order.
        order.sort_by(|&a, &b| {
            fold_merits[b]
                .total_cmp(&fold_merits[a])
                .then_with(|| names[a].cmp(&names[b]))
        });
        for (pos, &f) in order.iter().enumerate() {
            ranks[f].push((pos + 1) as f64);
        }
        for f in 0..d {
            merits[f].push(fold_merits[f]);
        }
    }

    let mut features: Vec<RankedFeature> = (0..d)
        .map(|f| {
            let k = merits[f].len() as f64;
            let mean = merits[f].iter().sum::<f64>() / k;
            let var = merits[f].iter().map(|m| (m - mean).powi(2)).sum::<f64>() / k;
            RankedFeature {
                name: names[f].clone(),
                merit: mean,
                merit_sd: var.sqrt(),
                mean_rank: ranks[f].iter().sum::<f64>() / k,
            }
        })
        .collect();
    features.sort_by(|a, b| b.merit.total_cmp(&a.merit).then(a.name.cmp(&b.name)));
    Ok(RankingReport {
        features,
        single_class,
    })
}
