//! Metrics over detector output: final-labelling accuracy, the stability
//! and latency of the incremental path, and the composite score used to
//! compare cost settings.
//!
//! Accuracy metrics compare words at the class level (reparandum, edit
//! term, repair phase): a word counts once per class it carries. Edit
//! overhead instead works on the raw edit scripts, where every add and
//! revoke of any tag — including a bare `fluent` add on arrival — costs
//! one edit. All metrics are pure functions of their inputs and
//! micro-average (pool counts) over the corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::labels::{diff_labels, LabelEdit, TagClass, TagSet};
use crate::corpus::{gold, Utterance};
use crate::error::{Error, Result};
use crate::pipeline::DetectorRun;

/// Classes that count as detection targets; `fluent` is the negative state.
const STRUCTURE_CLASSES: [TagClass; 3] = [TagClass::Rm, TagClass::Ed, TagClass::Rp];

/// Pooled instance counts behind a micro-averaged F-score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Counts {
    fn accumulate(&mut self, gold: &TagSet, hyp: &TagSet, classes: &[TagClass]) {
        for &class in classes {
            let g = gold.has_class(class);
            let h = hyp.has_class(class);
            self.tp += u64::from(g && h);
            self.fp += u64::from(!g && h);
            self.fn_ += u64::from(g && !h);
        }
    }
}

/// Precision / recall / F over pooled counts. `degenerate` is set when any
/// denominator was empty: with neither reference nor hypothesis positives
/// the score is reported as a vacuous 1.0, while a single empty
/// denominator pins its ratio to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub degenerate: bool,
}

impl FScore {
    fn from_counts(c: Counts) -> FScore {
        if c.tp + c.fp + c.fn_ == 0 {
            return FScore { precision: 1.0, recall: 1.0, f: 1.0, degenerate: true };
        }
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        FScore { precision, recall, f, degenerate: c.tp + c.fp == 0 || c.tp + c.fn_ == 0 }
    }
}

fn check_aligned(gold: usize, hyp: usize, what: &str) -> Result<()> {
    if gold != hyp {
        return Err(Error::Data(format!(
            "{what}: reference has {gold} utterances, hypothesis has {hyp}"
        )));
    }
    Ok(())
}

fn pooled_f(
    gold: &[Vec<TagSet>],
    hyp: &[Vec<TagSet>],
    classes: &[TagClass],
) -> Result<FScore> {
    check_aligned(gold.len(), hyp.len(), "f-score")?;
    let mut counts = Counts::default();
    for (g, h) in gold.iter().zip(hyp) {
        if g.len() != h.len() {
            return Err(Error::Data(format!(
                "f-score: utterance length mismatch ({} reference words, {} hypothesis words)",
                g.len(),
                h.len()
            )));
        }
        for (gw, hw) in g.iter().zip(h) {
            counts.accumulate(gw, hw, classes);
        }
    }
    Ok(FScore::from_counts(counts))
}

/// Micro F-score over reparandum words.
pub fn f_score_rm(gold: &[Vec<TagSet>], hyp: &[Vec<TagSet>]) -> Result<FScore> {
    pooled_f(gold, hyp, &[TagClass::Rm])
}

/// Micro F-score over all repair components: reparandum, edit-term and
/// repair-phase words together.
pub fn f_score_structure(gold: &[Vec<TagSet>], hyp: &[Vec<TagSet>]) -> Result<FScore> {
    pooled_f(gold, hyp, &STRUCTURE_CLASSES)
}

/// How far behind the current word the labelling has settled: the F-score
/// of each word's labels `d` words after it arrived, for `d` in 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayedAccuracy {
    pub curve: [f64; 6],
    pub mean: f64,
}

/// For each distance `d` in 1..=6, pools the labels of word `t-d` in the
/// snapshot taken at word `t` against the final reference labels, over
/// every step of every run. Utterances shorter than `d+1` words contribute
/// nothing at that distance.
pub fn delayed_accuracy(runs: &[DetectorRun], gold: &[Vec<TagSet>]) -> Result<DelayedAccuracy> {
    check_aligned(gold.len(), runs.len(), "delayed accuracy")?;
    let mut pooled = [Counts::default(); 6];
    for (run, g) in runs.iter().zip(gold) {
        if run.history.len() != g.len() {
            return Err(Error::Data(format!(
                "delayed accuracy: {} snapshots for {} reference words",
                run.history.len(),
                g.len()
            )));
        }
        for (t, snapshot) in run.history.iter().enumerate() {
            for (d, counts) in pooled.iter_mut().enumerate() {
                let Some(w) = t.checked_sub(d + 1) else { break };
                counts.accumulate(&g[w], &snapshot[w], &STRUCTURE_CLASSES);
            }
        }
    }
    let curve = pooled.map(|c| FScore::from_counts(c).f);
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    Ok(DelayedAccuracy { curve, mean })
}

/// Number of multiset-matched edits between what was performed and what
/// was necessary this step.
fn matched_edits(performed: &[LabelEdit], necessary: &[LabelEdit]) -> usize {
    let mut remaining = necessary.to_vec();
    performed
        .iter()
        .filter(|e| {
            remaining
                .iter()
                .position(|n| n == *e)
                .map(|i| remaining.swap_remove(i))
                .is_some()
        })
        .count()
}

/// Fraction of performed label edits that an ideal strongly incremental
/// detector would not have made. At each step the necessary edits are the
/// minimal script from the previous incremental reference state to the
/// current one; everything unmatched is overhead.
pub fn edit_overhead(
    runs: &[DetectorRun],
    incremental_gold: &[Vec<Vec<TagSet>>],
) -> Result<f64> {
    check_aligned(incremental_gold.len(), runs.len(), "edit overhead")?;
    let mut total = 0u64;
    let mut unnecessary = 0u64;
    for (run, inc) in runs.iter().zip(incremental_gold) {
        if run.log.len() != inc.len() {
            return Err(Error::Data(format!(
                "edit overhead: {} scripts for {} reference steps",
                run.log.len(),
                inc.len()
            )));
        }
        let mut prev: &[TagSet] = &[];
        for (performed, next) in run.log.iter().zip(inc) {
            let necessary = diff_labels(prev, next);
            total += performed.len() as u64;
            unnecessary += (performed.len() - matched_edits(performed, &necessary)) as u64;
            prev = next;
        }
    }
    Ok(if total == 0 { 0.0 } else { unnecessary as f64 / total as f64 })
}

/// Classifier invocations per consumed word.
pub fn processing_overhead(invocations: u64, words: u64) -> f64 {
    if words == 0 {
        0.0
    } else {
        invocations as f64 / words as f64
    }
}

/// Mean words consumed before each correctly detected repair surfaced.
///
/// A repair counts as detected at the first snapshot that marks the
/// reference reparandum onset `rm_start` and — unless the repair is a bare
/// deletion — the reference repair onset `rp_start`. The distances count
/// inclusively from the respective onset word to the detecting word, so a
/// repair surfacing the moment its phase starts scores `td_rp` = 1.
/// Deletions have no phase and are excluded from `td_rp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdReport {
    pub td_rm: Option<f64>,
    pub td_rp: Option<f64>,
    pub detected: usize,
    pub total: usize,
}

pub fn time_to_detection(runs: &[DetectorRun], gold: &[Utterance]) -> Result<TdReport> {
    check_aligned(gold.len(), runs.len(), "time to detection")?;
    let mut rm_distances = Vec::new();
    let mut rp_distances = Vec::new();
    let mut total = 0usize;
    for (run, u) in runs.iter().zip(gold) {
        for r in &u.repairs {
            total += 1;
            let shows = |snapshot: &Vec<TagSet>, index: usize, class: TagClass| {
                snapshot.get(index).is_some_and(|s| s.has_class(class))
            };
            let hit = run.history.iter().position(|snap| {
                shows(snap, r.rm_start, TagClass::Rm)
                    && (r.is_delete() || shows(snap, r.rp_start, TagClass::Rp))
            });
            if let Some(t) = hit {
                rm_distances.push((t - r.rm_start + 1) as f64);
                if !r.is_delete() {
                    rp_distances.push((t - r.rp_start + 1) as f64);
                }
            }
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    Ok(TdReport {
        td_rm: mean(&rm_distances),
        td_rp: mean(&rp_distances),
        detected: rm_distances.len(),
        total,
    })
}

/// All metrics for one detector configuration on one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision_rm: f64,
    pub recall_rm: f64,
    pub f_rm: f64,
    pub f_s: f64,
    pub da: f64,
    pub da_curve: [f64; 6],
    pub eo: f64,
    pub po: f64,
    pub td_rm: Option<f64>,
    pub td_rp: Option<f64>,
    /// Share of the best setting's result, averaged over the five
    /// comparable metrics; 1.0 when evaluated in isolation.
    pub ts: f64,
}

/// Computes every metric from per-utterance detector runs against the
/// annotated reference. The total score is 1.0: it only discriminates
/// within a family of settings (see [`total_score`]).
pub fn evaluate_runs(gold: &[Utterance], runs: &[DetectorRun]) -> Result<MetricsReport> {
    check_aligned(gold.len(), runs.len(), "evaluation")?;
    let gold_labels: Vec<Vec<TagSet>> = gold.iter().map(gold::gold_labels).collect();
    let incremental: Vec<Vec<Vec<TagSet>>> = gold.iter().map(gold::incremental_gold).collect();
    let final_hyp: Vec<Vec<TagSet>> = runs
        .iter()
        .map(|r| r.history.last().cloned().unwrap_or_default())
        .collect();

    let rm = f_score_rm(&gold_labels, &final_hyp)?;
    let structure = f_score_structure(&gold_labels, &final_hyp)?;
    let da = delayed_accuracy(runs, &gold_labels)?;
    let eo = edit_overhead(runs, &incremental)?;
    let td = time_to_detection(runs, gold)?;
    let words: u64 = gold.iter().map(|u| u.tokens.len() as u64).sum();
    let invocations: u64 = runs.iter().map(|r| r.invocations).sum();
    Ok(MetricsReport {
        precision_rm: rm.precision,
        recall_rm: rm.recall,
        f_rm: rm.f,
        f_s: structure.f,
        da: da.mean,
        da_curve: da.curve,
        eo,
        po: processing_overhead(invocations, words),
        td_rm: td.td_rm,
        td_rp: td.td_rp,
        ts: 1.0,
    })
}

/// Each setting's mean share of the best result over the five comparable
/// metrics. F-scores and delayed accuracy count as fractions of the
/// highest value; edit and processing overhead are inverted (best divided
/// by own, lower is better). Shares cap at 1, so a setting leading every
/// metric scores exactly 1.0. Detection times are excluded.
pub fn total_score(reports: &[MetricsReport]) -> Vec<f64> {
    if reports.is_empty() {
        return Vec::new();
    }
    let best = |f: fn(&MetricsReport) -> f64, fold: fn(f64, f64) -> f64| {
        reports.iter().map(f).fold(f(&reports[0]), fold)
    };
    let best_f_rm = best(|r| r.f_rm, f64::max);
    let best_f_s = best(|r| r.f_s, f64::max);
    let best_da = best(|r| r.da, f64::max);
    let best_eo = best(|r| r.eo, f64::min);
    let best_po = best(|r| r.po, f64::min);
    let higher = |value: f64, best: f64| if best <= 0.0 { 1.0 } else { (value / best).min(1.0) };
    let lower = |value: f64, best: f64| if value <= best { 1.0 } else { best / value };
    reports
        .iter()
        .map(|r| {
            (higher(r.f_rm, best_f_rm)
                + higher(r.f_s, best_f_s)
                + higher(r.da, best_da)
                + lower(r.eo, best_eo)
                + lower(r.po, best_po))
                / 5.0
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "-".to_string(),
    }
}

/// Renders labelled reports as an aligned text table.
pub fn render_table<S: AsRef<str>>(rows: &[(S, MetricsReport)]) -> String {
    let mut out = String::new();
    let name_width = rows
        .iter()
        .map(|(n, _)| n.as_ref().len())
        .chain(std::iter::once("setting".len()))
        .max()
        .unwrap_or(7);
    out.push_str(&format!(
        "{:name_width$}  {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "setting", "f_rm", "f_s", "da", "eo", "po", "td_rm", "td_rp", "ts", "p/r",
    ));
    for (name, r) in rows {
        out.push_str(&format!(
            "{:name_width$}  {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6} {:>6} {:>6.3} {:>6}\n",
            name.as_ref(),
            r.f_rm,
            r.f_s,
            r.da,
            r.eo,
            r.po,
            fmt_opt(r.td_rm),
            fmt_opt(r.td_rp),
            r.ts,
            format!("{:.2}/{:.2}", r.precision_rm, r.recall_rm),
        ));
    }
    out
}

impl MetricsReport {
    /// One `key value` pair per line; absent detection times are omitted.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: f64| out.push_str(&format!("{k} {v:.6}\n"));
        line("precision_rm", self.precision_rm);
        line("recall_rm", self.recall_rm);
        line("f_rm", self.f_rm);
        line("f_s", self.f_s);
        line("da", self.da);
        for (i, v) in self.da_curve.iter().enumerate() {
            line(&format!("da_{}", i + 1), *v);
        }
        line("eo", self.eo);
        line("po", self.po);
        if let Some(v) = self.td_rm {
            line("td_rm", v);
        }
        if let Some(v) = self.td_rp {
            line("td_rp", v);
        }
        line("ts", self.ts);
        out
    }
}
