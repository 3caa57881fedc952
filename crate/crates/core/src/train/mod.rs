//! Training: cleaned language models, cross-fold feature annotation,
//! cost-sensitive stage classifiers, and bundle persistence.
//!
//! Training happens in three passes. First the corpus is split into
//! seeded folds; for each fold, language models trained on the other
//! folds supply the feature values for its utterances, so no classifier
//! ever learns from a feature computed by a model that memorised the
//! same sentence. Second, the four stage classifiers are trained on the
//! pooled feature rows under their cost matrices. Third, the runtime
//! language models are rebuilt from the full corpus — lexical and
//! part-of-speech trigrams on *cleaned* text with edit terms and
//! reparanda excised, and an edit bigram over the annotated edit-term
//! runs — and everything is bundled under one provenance hash.
//!
//! Decision instances are teacher-forced: the prefix graph is routed by
//! the gold annotation, and every question a stage would face at
//! runtime — had every earlier decision been correct — becomes one
//! labeled feature row. The edit stage is replayed in arrival order so
//! its features never see words that had not yet arrived when the
//! detector would ask; the later stages only look backward, so they
//! read one fully-routed graph per utterance.

use crate::corpus::folds::FoldAssignment;
use crate::corpus::gold::gold_labels;
use crate::corpus::{Corpus, Tag, Utterance};
use crate::error::{Error, Result};
use crate::features::extract::{
    edit_features, rm_start_features, rp_end_features, rp_start_features, RM_WINDOW, RP_WINDOW,
};
use crate::features::{FeatureVector, Stage};
use crate::forest::io::{forest_from_str, forest_to_string};
use crate::forest::{CostMatrix, Forest, ForestParams, TrainReport};
use crate::lm::{model_from_str, model_to_string, NGramModel, DEFAULT_DISCOUNT};
use crate::pipeline::dag::{PrefixDag, WhichModel};
use crate::pipeline::StageForests;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::path::Path;

/// N-gram order of the fluent lexical and part-of-speech models.
pub const FLUENT_ORDER: usize = 3;
/// N-gram order of the edit-term model.
pub const EDIT_ORDER: usize = 2;

/// Misclassification costs for each stage's classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCosts {
    pub edit: CostMatrix,
    pub rp_start: CostMatrix,
    pub rm_start: CostMatrix,
    pub rp_end: CostMatrix,
}

impl Default for StageCosts {
    /// Uniform costs for the edit stage; the structural stages default
    /// to a missed positive costing twice a false alarm, the setting
    /// the cost sweep's grids are centred on.
    fn default() -> Self {
        let lenient = CostMatrix::new(2.0, 1.0).expect("static costs");
        StageCosts {
            edit: CostMatrix::uniform(),
            rp_start: lenient,
            rm_start: lenient,
            rp_end: lenient,
        }
    }
}

impl StageCosts {
    pub fn get(&self, stage: Stage) -> CostMatrix {
        match stage {
            Stage::Edit => self.edit,
            Stage::RpStart => self.rp_start,
            Stage::RmStart => self.rm_start,
            Stage::RpEnd => self.rp_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Cross-validation folds for feature annotation; at least 2.
    pub folds: usize,
    /// Master seed: fold assignment and the per-stage forest seeds are
    /// all derived from it.
    pub seed: u64,
    pub costs: StageCosts,
    /// Forest shape and resampling schedule. The `seed` field here is
    /// ignored; each stage's seed is derived from the master seed.
    pub forest: ForestParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            folds: 10,
            seed: 0,
            costs: StageCosts::default(),
            forest: ForestParams::default(),
        }
    }
}

/// Labeled feature rows for one classifier.
#[derive(Debug, Clone, Default)]
pub struct InstanceSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl InstanceSet {
    fn push(&mut self, features: FeatureVector, label: bool) {
        self.rows.push(features.values);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn merge(&mut self, other: InstanceSet) {
        self.rows.extend(other.rows);
        self.labels.extend(other.labels);
    }
}

/// Pooled training instances for all four stages.
#[derive(Debug, Clone, Default)]
pub struct StageInstances {
    pub edit: InstanceSet,
    pub rp_start: InstanceSet,
    pub rm_start: InstanceSet,
    pub rp_end: InstanceSet,
}

impl StageInstances {
    fn merge(&mut self, other: StageInstances) {
        self.edit.merge(other.edit);
        self.rp_start.merge(other.rp_start);
        self.rm_start.merge(other.rm_start);
        self.rp_end.merge(other.rp_end);
    }
}

/// Word and tag sequences with edit terms and reparanda removed.
/// Utterances left empty by the cleaning are dropped.
pub fn cleaned_sequences(utterances: &[&Utterance]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for u in utterances {
        let kept = u.cleaned_tokens();
        if kept.is_empty() {
            continue;
        }
        words.push(kept.iter().map(|t| t.word.clone()).collect());
        tags.push(kept.iter().map(|t| t.pos.clone()).collect());
    }
    (words, tags)
}

/// Maximal runs of annotated edit terms, one training sequence per run.
pub fn edit_sequences(utterances: &[&Utterance]) -> Vec<Vec<String>> {
    utterances
        .iter()
        .flat_map(|u| u.edit_spans())
        .map(|span| span.iter().map(|t| t.word.clone()).collect())
        .collect()
}

/// The three language models backing feature extraction.
#[derive(Debug, Clone)]
pub struct ModelSet {
    pub lex: NGramModel,
    pub pos: NGramModel,
    pub edit: NGramModel,
}

/// Trains cleaned fluent models and the edit model on one slice of the
/// corpus; `what` names the slice in error messages.
pub fn train_models(utterances: &[&Utterance], what: &str) -> Result<ModelSet> {
    let (words, tags) = cleaned_sequences(utterances);
    if words.is_empty() {
        return Err(Error::Data(format!(
            "no fluent material left after cleaning the {what} utterances"
        )));
    }
    let lex = NGramModel::train(FLUENT_ORDER, DEFAULT_DISCOUNT, &words)?;
    let pos = NGramModel::train(FLUENT_ORDER, DEFAULT_DISCOUNT, &tags)?;
    let edits = edit_sequences(utterances);
    if edits.is_empty() {
        return Err(Error::Data(format!(
            "no edit terms annotated in the {what} utterances; \
             the edit model has nothing to learn from"
        )));
    }
    let edit = NGramModel::train(EDIT_ORDER, DEFAULT_DISCOUNT, &edits)?;
    Ok(ModelSet { lex, pos, edit })
}

/// Appends the teacher-forced decision instances for one utterance.
pub fn utterance_instances(
    models: &ModelSet,
    u: &Utterance,
    out: &mut StageInstances,
) -> Result<()> {
    let len = u.len();
    if len == 0 {
        return Ok(());
    }
    let labels = gold_labels(u);
    let ed: Vec<bool> = labels.iter().map(|s| s.contains(Tag::Ed)).collect();

    // Edit stage, in arrival order: an immediate question at each new
    // word, plus the one-word-back revisit whenever excising the
    // previous word makes the new one more predictable. A gold edit
    // term is unflagged while it is the revisit target — the revisit
    // only ever fires at runtime after the immediate pass missed, and
    // that miss is the situation these rows must teach.
    let mut dag = PrefixDag::new(&models.lex, &models.pos, &models.edit);
    for (i, token) in u.tokens.iter().enumerate() {
        dag.push(&token.word, &token.pos);
        out.edit.push(edit_features(&mut dag, i), ed[i]);
        if i >= 1 && !ed[i] {
            let target = i - 1;
            let was = dag.is_ed(target);
            dag.set_ed(target, false);
            let gain = dag.surprisal(WhichModel::Lex, i, &[])
                - dag.surprisal(WhichModel::Lex, i, &[(target, i)]);
            if gain > 0.0 {
                out.edit.push(edit_features(&mut dag, target), ed[target]);
            }
            dag.set_ed(target, was);
        }
        if ed[i] {
            dag.set_ed(i, true);
        }
    }

    // The dag now carries every gold edit flag; the remaining stages
    // only read backward context, so arrival order no longer matters.
    let onsets: BTreeSet<usize> = u
        .repairs
        .iter()
        .filter(|r| r.rp_start < len)
        .map(|r| r.rp_start)
        .collect();
    for (i, &is_ed) in ed.iter().enumerate() {
        if is_ed {
            continue;
        }
        out.rp_start.push(rp_start_features(&mut dag, i), onsets.contains(&i));
    }

    for r in &u.repairs {
        let n = r.rp_start;
        // Repairs whose onset word never arrives (an utterance-final
        // delete) or is itself routed out are unreachable at runtime.
        if n >= len || dag.is_ed(n) || dag.is_ed(r.rm_start) {
            continue;
        }

        // Reparandum-onset search over the same candidates the detector
        // walks: back from just before the interregnum, stopping at an
        // earlier edit term or the window edge.
        let mut interregnum_start = n;
        while interregnum_start > 0 && dag.is_ed(interregnum_start - 1) {
            interregnum_start -= 1;
        }
        let mut c = interregnum_start;
        while c > 0 {
            c -= 1;
            if dag.is_ed(c) || n - c > RM_WINDOW {
                break;
            }
            let features = rm_start_features(&mut dag, n, c)?;
            out.rm_start.push(features, c == r.rm_start);
        }

        // Phase-end questions: the empty-phase deletion reading at the
        // opening step, then one per phase word up to the gold close.
        if n - r.rm_start > RM_WINDOW {
            continue;
        }
        let features = rp_end_features(&mut dag, r.rm_start, n, None)?;
        out.rp_end.push(features, r.is_delete());
        let last = if r.is_delete() { n } else { r.rp_end.min(n + RP_WINDOW) };
        for p in n..=last {
            let features = rp_end_features(&mut dag, r.rm_start, n, Some(p))?;
            out.rp_end.push(features, !r.is_delete() && p == r.rp_end);
        }
    }
    Ok(())
}

/// Pools teacher-forced instances across folds, each fold's features
/// computed by models that never saw its utterances. Folds run in
/// parallel; rows are merged in fold order, so the pool is
/// deterministic for a fixed assignment.
pub fn crossfold_instances(
    corpus: &Corpus,
    assignment: &FoldAssignment,
) -> Result<StageInstances> {
    let per_fold: Vec<StageInstances> = (0..assignment.k)
        .into_par_iter()
        .map(|fold| {
            let training: Vec<&Utterance> = assignment
                .train_indices(fold)
                .iter()
                .map(|&i| &corpus.utterances[i])
                .collect();
            let models = train_models(&training, &format!("fold-{fold} training"))?;
            let mut pooled = StageInstances::default();
            for i in assignment.test_indices(fold) {
                utterance_instances(&models, &corpus.utterances[i], &mut pooled)?;
            }
            Ok(pooled)
        })
        .collect::<Result<_>>()?;
    let mut out = StageInstances::default();
    for fold in per_fold {
        out.merge(fold);
    }
    Ok(out)
}

/// MetaCost summaries from the four stage trainings.
#[derive(Debug, Clone)]
pub struct StageReports {
    pub edit: TrainReport,
    pub rp_start: TrainReport,
    pub rm_start: TrainReport,
    pub rp_end: TrainReport,
}

/// Everything detection needs: runtime language models, the four stage
/// forests, and the provenance hash tying them together.
#[derive(Debug, Clone)]
pub struct DetectorBundle {
    pub lex: NGramModel,
    pub pos: NGramModel,
    pub edit: NGramModel,
    pub forests: StageForests,
    pub provenance: u64,
}

impl DetectorBundle {
    /// Runs the detector over a batch of utterances.
    pub fn run_corpus(
        &self,
        utterances: &[Utterance],
        capacity: usize,
    ) -> Result<Vec<crate::pipeline::DetectorRun>> {
        crate::pipeline::run_corpus(
            &self.lex,
            &self.pos,
            &self.edit,
            &self.forests,
            capacity,
            utterances,
        )
    }
}

/// A freshly trained bundle plus its training by-products.
#[derive(Debug, Clone)]
pub struct TrainedBundle {
    pub bundle: DetectorBundle,
    pub reports: StageReports,
    pub assignment: FoldAssignment,
}

fn fnv1a(chunks: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in chunks {
        for &byte in *chunk {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// Deterministic per-stage forest seed derived from the master seed.
fn stage_seed(seed: u64, stage: Stage) -> u64 {
    fnv1a(&[&seed.to_le_bytes(), stage.name().as_bytes()])
}

/// Hash over the serialized models and forests; recomputed at load time
/// so a bundle directory with swapped or edited files is rejected.
fn provenance_of(serialized: &[String; 7]) -> u64 {
    let parts: Vec<&[u8]> = serialized.iter().map(|s| s.as_bytes()).collect();
    fnv1a(&parts)
}

fn serialize_parts(models: &ModelSet, forests: &StageForests) -> [String; 7] {
    [
        model_to_string(&models.lex),
        model_to_string(&models.pos),
        model_to_string(&models.edit),
        forest_to_string(&forests.edit),
        forest_to_string(&forests.rp_start),
        forest_to_string(&forests.rm_start),
        forest_to_string(&forests.rp_end),
    ]
}

/// Trains one stage's forest on pooled instances. The forest seed is
/// derived from `master_seed` and the stage name, so every stage gets
/// its own reproducible stream regardless of training order.
pub fn train_stage_forest(
    stage: Stage,
    instances: &InstanceSet,
    cost: CostMatrix,
    shape: ForestParams,
    master_seed: u64,
) -> Result<(Forest, TrainReport)> {
    let names: Vec<String> = stage.manifest().iter().map(|&n| n.to_string()).collect();
    let params = ForestParams { seed: stage_seed(master_seed, stage), ..shape };
    Forest::train(stage.name(), &names, &instances.rows, &instances.labels, cost, params)
}

fn train_stage(
    stage: Stage,
    instances: &InstanceSet,
    config: &TrainConfig,
) -> Result<(Forest, TrainReport)> {
    train_stage_forest(stage, instances, config.costs.get(stage), config.forest, config.seed)
}

/// Full training run: fold split, cross-fold feature annotation, stage
/// classifiers, runtime models, provenance.
pub fn train_bundle(corpus: &Corpus, config: &TrainConfig) -> Result<TrainedBundle> {
    let assignment = FoldAssignment::new(corpus.utterances.len(), config.folds, config.seed)?;
    let instances = crossfold_instances(corpus, &assignment)?;

    let (edit_forest, edit_report) = train_stage(Stage::Edit, &instances.edit, config)?;
    let (rp_start_forest, rp_start_report) =
        train_stage(Stage::RpStart, &instances.rp_start, config)?;
    let (rm_start_forest, rm_start_report) =
        train_stage(Stage::RmStart, &instances.rm_start, config)?;
    let (rp_end_forest, rp_end_report) = train_stage(Stage::RpEnd, &instances.rp_end, config)?;
    let forests = StageForests {
        edit: edit_forest,
        rp_start: rp_start_forest,
        rm_start: rm_start_forest,
        rp_end: rp_end_forest,
    };
    forests.validate()?;

    let everything: Vec<&Utterance> = corpus.utterances.iter().collect();
    let models = train_models(&everything, "corpus")?;
    let provenance = provenance_of(&serialize_parts(&models, &forests));
    Ok(TrainedBundle {
        bundle: DetectorBundle {
            lex: models.lex,
            pos: models.pos,
            edit: models.edit,
            forests,
            provenance,
        },
        reports: StageReports {
            edit: edit_report,
            rp_start: rp_start_report,
            rm_start: rm_start_report,
            rp_end: rp_end_report,
        },
        assignment,
    })
}

const MANIFEST_HEADER: &str = "repair-bundle v1";
const BUNDLE_FILES: [&str; 7] = [
    "lex.ngrams",
    "pos.ngrams",
    "edit.ngrams",
    "edit.forest",
    "rp_start.forest",
    "rm_start.forest",
    "rp_end.forest",
];

/// Writes a trained bundle as a directory of model, forest, manifest
/// and fold files. Retraining on the same corpus and seed reproduces
/// every file byte for byte.
pub fn write_bundle(dir: impl AsRef<Path>, trained: &TrainedBundle) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let models = ModelSet {
        lex: trained.bundle.lex.clone(),
        pos: trained.bundle.pos.clone(),
        edit: trained.bundle.edit.clone(),
    };
    let parts = serialize_parts(&models, &trained.bundle.forests);
    for (name, text) in BUNDLE_FILES.iter().zip(parts.iter()) {
        std::fs::write(dir.join(name), text)?;
    }
    let manifest = format!(
        "{MANIFEST_HEADER}\nprovenance {:016x}\nfolds {}\nseed {}\n",
        trained.bundle.provenance, trained.assignment.k, trained.assignment.seed,
    );
    std::fs::write(dir.join("bundle.manifest"), manifest)?;
    trained.assignment.write(dir.join("folds.txt"))?;
    Ok(())
}

/// Loads a bundle directory, recomputing the provenance hash from the
/// file contents and rejecting any mismatch with the manifest.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<DetectorBundle> {
    let dir = dir.as_ref();
    let manifest = std::fs::read_to_string(dir.join("bundle.manifest"))?;
    let mut lines = manifest.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(Error::Format(format!(
            "{} is not a detector bundle manifest",
            dir.display()
        )));
    }
    let recorded = lines
        .next()
        .and_then(|l| l.strip_prefix("provenance "))
        .and_then(|h| u64::from_str_radix(h, 16).ok())
        .ok_or_else(|| Error::Format("bundle manifest is missing its provenance line".into()))?;

    let mut parts: [String; 7] = Default::default();
    for (slot, name) in parts.iter_mut().zip(BUNDLE_FILES.iter()) {
        *slot = std::fs::read_to_string(dir.join(name))?;
    }
    if provenance_of(&parts) != recorded {
        return Err(Error::Provenance(format!(
            "bundle files in {} do not match the recorded provenance; \
             the directory has been edited or mixes training runs",
            dir.display()
        )));
    }
    let [lex, pos, edit, f_edit, f_rp_start, f_rm_start, f_rp_end] = parts;
    let forests = StageForests {
        edit: forest_from_str(&f_edit)?,
        rp_start: forest_from_str(&f_rp_start)?,
        rm_start: forest_from_str(&f_rm_start)?,
        rp_end: forest_from_str(&f_rp_end)?,
    };
    forests.validate()?;
    Ok(DetectorBundle {
        lex: model_from_str(&lex)?,
        pos: model_from_str(&pos)?,
        edit: model_from_str(&edit)?,
        forests,
        provenance: recorded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::markup::parse_utterance;
    use crate::corpus::synth::{generate, SynthConfig};

    fn utt(line: &str) -> Utterance {
        parse_utterance(line).expect("test markup")
    }

    fn refs(utterances: &[Utterance]) -> Vec<&Utterance> {
        utterances.iter().collect()
    }

    #[test]
    fn cleaning_drops_reparanda_and_edit_terms() {
        let u = utt("john/nnp [ likes/vbz + {uh/uh} loves/vbz ] mary/nnp");
        let (words, tags) = cleaned_sequences(&refs(std::slice::from_ref(&u)));
        assert_eq!(words, vec![vec!["john", "loves", "mary"]]);
        assert_eq!(tags, vec![vec!["nnp", "vbz", "nnp"]]);
    }

    #[test]
    fn fully_disfluent_utterances_vanish_from_cleaned_text() {
        let u = utt("{uh/uh} {um/uh}");
        let (words, tags) = cleaned_sequences(&refs(std::slice::from_ref(&u)));
        assert!(words.is_empty());
        assert!(tags.is_empty());
    }

    #[test]
    fn edit_runs_split_on_fluent_words() {
        let u = utt("{uh/uh} {um/uh} well/uh no/dt {uh/uh} yes/uh");
        // "well"/"yes" carry the uh tag but are plain words here; only
        // the braced tokens are edit terms.
        let sequences = edit_sequences(&refs(std::slice::from_ref(&u)));
        assert_eq!(sequences, vec![vec!["uh", "um"], vec!["uh"]]);
    }

    fn tiny_models() -> ModelSet {
        let sentences: Vec<Vec<String>> = [
            "john loves mary",
            "john likes mary",
            "mary loves john",
            "you know john",
        ]
        .iter()
        .map(|s| s.split(' ').map(str::to_string).collect())
        .collect();
        let tags: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| s.iter().map(|_| "w".to_string()).collect())
            .collect();
        ModelSet {
            lex: NGramModel::train(FLUENT_ORDER, DEFAULT_DISCOUNT, &sentences).unwrap(),
            pos: NGramModel::train(FLUENT_ORDER, DEFAULT_DISCOUNT, &tags).unwrap(),
            edit: NGramModel::train(EDIT_ORDER, DEFAULT_DISCOUNT, &[vec!["uh".to_string()]])
                .unwrap(),
        }
    }

    #[test]
    fn substitution_utterance_yields_expected_instances() {
        let models = tiny_models();
        let u = utt("john/nnp [ likes/vbz + {uh/uh} loves/vbz ] mary/nnp");
        let mut out = StageInstances::default();
        utterance_instances(&models, &u, &mut out).unwrap();

        // One onset question per non-edit word, exactly one positive.
        assert_eq!(out.rp_start.len(), 4);
        assert_eq!(out.rp_start.positives(), 1);
        // The backward search walks "likes" (gold) then "john".
        assert_eq!(out.rm_start.len(), 2);
        assert_eq!(out.rm_start.labels, vec![true, false]);
        // Delete reading at the opening step, then the phase close.
        assert_eq!(out.rp_end.len(), 2);
        assert_eq!(out.rp_end.labels, vec![false, true]);
        // Five immediate edit questions, one of them positive.
        assert!(out.edit.len() >= 5);
        assert_eq!(out.edit.positives(), 1);

        for row in &out.rp_start.rows {
            assert_eq!(row.len(), Stage::RpStart.arity());
        }
        for row in &out.edit.rows {
            assert_eq!(row.len(), Stage::Edit.arity());
        }
    }

    #[test]
    fn delete_repair_marks_the_empty_phase_reading() {
        let models = tiny_models();
        let u = utt("i/prp [ want/vbp + ] you/prp know/vbp");
        let mut out = StageInstances::default();
        utterance_instances(&models, &u, &mut out).unwrap();
        // The deletion reading is the positive; the overt-phase reading
        // at the same step is the negative.
        assert_eq!(out.rp_end.labels, vec![true, false]);
        // The continuation word "you" is still a structural onset.
        assert_eq!(out.rp_start.positives(), 1);
        assert_eq!(out.rm_start.labels, vec![true, false]);
    }

    #[test]
    fn repeat_with_long_phase_closes_at_gold_end() {
        let models = tiny_models();
        let u = utt("[ you/prp know/vbp + you/prp know/vbp ] john/nnp");
        let mut out = StageInstances::default();
        utterance_instances(&models, &u, &mut out).unwrap();
        // Phase-end questions: delete reading, then "you" (no), then
        // "know" (close).
        assert_eq!(out.rp_end.labels, vec![false, false, true]);
    }

    #[test]
    fn crossfold_pool_is_deterministic_and_complete() {
        let corpus = generate(&SynthConfig {
            n_utterances: 12,
            vocab_size: 30,
            repair_rate: 0.25,
            edit_rate: 0.15,
            seed: 9,
            ..SynthConfig::default()
        })
        .unwrap();
        let assignment = FoldAssignment::new(corpus.utterances.len(), 3, 7).unwrap();
        let a = crossfold_instances(&corpus, &assignment).unwrap();
        let b = crossfold_instances(&corpus, &assignment).unwrap();
        assert_eq!(a.rp_start.rows, b.rp_start.rows);
        assert_eq!(a.edit.rows, b.edit.rows);
        assert_eq!(a.rm_start.labels, b.rm_start.labels);

        // Every non-edit word of every utterance asks one onset question.
        let expected: usize = corpus
            .utterances
            .iter()
            .map(|u| {
                let labels = gold_labels(u);
                labels.iter().filter(|s| !s.contains(Tag::Ed)).count()
            })
            .sum();
        assert_eq!(a.rp_start.len(), expected);
    }

    fn small_corpus() -> Corpus {
        generate(&SynthConfig {
            n_utterances: 40,
            vocab_size: 40,
            repair_rate: 0.2,
            edit_rate: 0.1,
            seed: 3,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn training_is_reproducible_at_a_fixed_seed() {
        let corpus = small_corpus();
        let config = TrainConfig { folds: 4, seed: 11, ..TrainConfig::default() };
        let a = train_bundle(&corpus, &config).unwrap();
        let b = train_bundle(&corpus, &config).unwrap();
        assert_eq!(a.bundle.provenance, b.bundle.provenance);
        assert_eq!(a.bundle.forests.rp_start, b.bundle.forests.rp_start);
        assert!(a.reports.edit.n_examples > 0);
        assert!(a.reports.rp_start.n_positive > 0);

        let other = train_bundle(&corpus, &TrainConfig { seed: 12, ..config }).unwrap();
        assert_ne!(a.bundle.provenance, other.bundle.provenance);
    }

    #[test]
    fn single_fold_training_is_rejected() {
        let corpus = small_corpus();
        let config = TrainConfig { folds: 1, ..TrainConfig::default() };
        assert!(matches!(train_bundle(&corpus, &config), Err(Error::Config(_))));
    }

    #[test]
    fn corpus_smaller_than_fold_count_is_rejected() {
        let corpus = Corpus {
            utterances: vec![utt("john/nnp loves/vbz mary/nnp")],
            line_numbers: vec![1],
        };
        let config = TrainConfig { folds: 10, ..TrainConfig::default() };
        assert!(matches!(train_bundle(&corpus, &config), Err(Error::Config(_))));
    }

    #[test]
    fn corpus_without_edit_terms_is_rejected() {
        let lines = [
            "john/nnp loves/vbz mary/nnp",
            "mary/nnp likes/vbz john/nnp",
            "you/prp know/vbp john/nnp",
            "john/nnp knows/vbz you/prp",
        ];
        let corpus = Corpus {
            utterances: lines.iter().map(|l| utt(l)).collect(),
            line_numbers: (1..=lines.len()).collect(),
        };
        let config = TrainConfig { folds: 2, ..TrainConfig::default() };
        assert!(matches!(train_bundle(&corpus, &config), Err(Error::Data(_))));
    }

    #[test]
    fn bundle_round_trips_through_a_directory() {
        let corpus = small_corpus();
        let config = TrainConfig { folds: 4, seed: 5, ..TrainConfig::default() };
        let trained = train_bundle(&corpus, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &trained).unwrap();

        let loaded = read_bundle(dir.path()).unwrap();
        assert_eq!(loaded.provenance, trained.bundle.provenance);
        assert_eq!(loaded.forests.edit, trained.bundle.forests.edit);
        assert_eq!(loaded.forests.rp_end, trained.bundle.forests.rp_end);
        assert_eq!(model_to_string(&loaded.lex), model_to_string(&trained.bundle.lex));

        let runs = loaded.run_corpus(&corpus.utterances, 1).unwrap();
        assert_eq!(runs.len(), corpus.utterances.len());
    }

    #[test]
    fn rewriting_a_bundle_reproduces_identical_bytes() {
        let corpus = small_corpus();
        let config = TrainConfig { folds: 4, seed: 5, ..TrainConfig::default() };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        write_bundle(dir_a.path(), &train_bundle(&corpus, &config).unwrap()).unwrap();
        write_bundle(dir_b.path(), &train_bundle(&corpus, &config).unwrap()).unwrap();
        for name in BUNDLE_FILES.iter().chain(["bundle.manifest", "folds.txt"].iter()) {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical training runs");
        }
    }

    #[test]
    fn edited_bundle_files_are_rejected_at_load() {
        let corpus = small_corpus();
        let config = TrainConfig { folds: 4, seed: 5, ..TrainConfig::default() };
        let trained = train_bundle(&corpus, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &trained).unwrap();

        let lex_path = dir.path().join("lex.ngrams");
        let mut text = std::fs::read_to_string(&lex_path).unwrap();
        text.push('\n');
        std::fs::write(&lex_path, text).unwrap();
        assert!(matches!(read_bundle(dir.path()), Err(Error::Provenance(_))));
    }
}
