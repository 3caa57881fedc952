//! Cost-function sweep: evaluates the detector across a grid of
//! false-negative costs for the three structural stages, in both stack
//! capacities, and reports the settings that lead each metric.
//!
//! A sweep shares one set of cross-fold feature instances and one set
//! of runtime language models; only the stage classifiers change
//! between settings, and a classifier depends on just its own cost, so
//! each distinct cost per stage is trained exactly once and the grid is
//! assembled from the cache. Every setting's metrics are persisted as
//! one JSON file named after the setting, which makes an interrupted
//! sweep resumable: settings with a readable file are not re-run, and
//! the final table comes out identical either way because the total
//! score is always recomputed over the finished cohort.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::{evaluate_runs, render_table, total_score, MetricsReport};
use crate::features::Stage;
use crate::forest::{CostMatrix, Forest};
use crate::pipeline::{run_corpus, StageForests};
use crate::train::{
    crossfold_instances, train_models, train_stage_forest, InstanceSet, StageInstances,
    TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub rp_start_fn_costs: Vec<f64>,
    pub rm_start_fn_costs: Vec<f64>,
    pub rp_end_fn_costs: Vec<f64>,
    pub capacities: Vec<usize>,
    /// False-alarm cost, shared by every swept stage.
    pub fp_cost: f64,
    /// Fold count, master seed, forest shape, and the edit-stage cost,
    /// which the sweep does not vary.
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let doubling = |n: u32| (0..n).map(|i| f64::from(1u32 << i)).collect();
        SweepConfig {
            rp_start_fn_costs: doubling(8),
            rm_start_fn_costs: doubling(5),
            rp_end_fn_costs: doubling(8),
            capacities: vec![1, 2],
            fp_cost: 1.0,
            train: TrainConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("rp_start", &self.rp_start_fn_costs),
            ("rm_start", &self.rm_start_fn_costs),
            ("rp_end", &self.rp_end_fn_costs),
        ] {
            if grid.is_empty() {
                return Err(Error::Config(format!("empty {name} cost grid")));
            }
            if grid.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} costs must be positive and finite"
                )));
            }
        }
        if self.fp_cost <= 0.0 || !self.fp_cost.is_finite() {
            return Err(Error::Config("fp_cost must be positive and finite".into()));
        }
        if self.capacities.is_empty() {
            return Err(Error::Config("no stack capacities to sweep".into()));
        }
        if self.capacities.iter().any(|&c| !(1..=2).contains(&c)) {
            return Err(Error::Config("stack capacity must be 1 or 2".into()));
        }
        Ok(())
    }

    /// All settings in report order: capacity, then the three cost
    /// grids nested with rp_end varying fastest.
    pub fn settings(&self) -> Vec<SweepSetting> {
        let mut out = Vec::new();
        for &capacity in &self.capacities {
            for &rp_start_fn in &self.rp_start_fn_costs {
                for &rm_start_fn in &self.rm_start_fn_costs {
                    for &rp_end_fn in &self.rp_end_fn_costs {
                        out.push(SweepSetting {
                            capacity,
                            rp_start_fn,
                            rm_start_fn,
                            rp_end_fn,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSetting {
    pub capacity: usize,
    pub rp_start_fn: f64,
    pub rm_start_fn: f64,
    pub rp_end_fn: f64,
}

fn fmt_cost(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}").replace('.', "p").replace('-', "m")
    }
}

impl SweepSetting {
    /// Filename-safe identity, also used as the row label in reports.
    pub fn key(&self) -> String {
        format!(
            "cap{}_rps{}_rms{}_rpe{}",
            self.capacity,
            fmt_cost(self.rp_start_fn),
            fmt_cost(self.rm_start_fn),
            fmt_cost(self.rp_end_fn),
        )
    }
}

/// What gets persisted per finished setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepRecord {
    setting: SweepSetting,
    report: MetricsReport,
}

/// A finished sweep: one row per setting in enumeration order, with
/// total scores computed over this cohort.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<(SweepSetting, MetricsReport)>,
    /// Distinct stage-classifier trainings the sweep actually ran.
    pub forest_trainings: usize,
}

impl SweepReport {
    /// Index of the row leading `metric`; `lower` flips the direction.
    /// Ties keep the earliest row.
    fn best(&self, metric: fn(&MetricsReport) -> f64, lower: bool) -> Option<usize> {
        let score = |r: &MetricsReport| if lower { -metric(r) } else { metric(r) };
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, report)) in self.rows.iter().enumerate() {
            let s = score(report);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }

    /// The per-metric leaders plus the total-score leader, labelled.
    pub fn best_rows(&self) -> Vec<(String, SweepSetting, MetricsReport)> {
        type Pick = (&'static str, fn(&MetricsReport) -> f64, bool);
        let picks: [Pick; 6] = [
            ("best f_rm", |r| r.f_rm, false),
            ("best f_s", |r| r.f_s, false),
            ("best da", |r| r.da, false),
            ("best eo", |r| r.eo, true),
            ("best po", |r| r.po, true),
            ("best ts", |r| r.ts, false),
        ];
        picks
            .iter()
            .filter_map(|&(label, metric, lower)| {
                self.best(metric, lower).map(|i| {
                    let (setting, report) = &self.rows[i];
                    (format!("{label}: {}", setting.key()), *setting, report.clone())
                })
            })
            .collect()
    }

    /// The best-settings table.
    pub fn render(&self) -> String {
        let rows: Vec<(String, MetricsReport)> = self
            .best_rows()
            .into_iter()
            .map(|(label, _, report)| (label, report))
            .collect();
        render_table(&rows)
    }

    /// Every setting's row, in enumeration order.
    pub fn render_full(&self) -> String {
        let rows: Vec<(String, MetricsReport)> = self
            .rows
            .iter()
            .map(|(setting, report)| (setting.key(), report.clone()))
            .collect();
        render_table(&rows)
    }
}

/// Stage forests trained once per distinct cost, keyed by cost bits.
struct ForestCache {
    edit: Forest,
    rp_start: BTreeMap<u64, Forest>,
    rm_start: BTreeMap<u64, Forest>,
    rp_end: BTreeMap<u64, Forest>,
    trainings: usize,
}

impl ForestCache {
    fn build(
        instances: &StageInstances,
        config: &SweepConfig,
    ) -> Result<ForestCache> {
        let train = &config.train;
        let grid = |stage: Stage, costs: &[f64], rows: &InstanceSet| -> Result<BTreeMap<u64, Forest>> {
            let mut distinct: Vec<f64> = costs.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            distinct
                .par_iter()
                .map(|&fn_cost| {
                    let cost = CostMatrix::new(fn_cost, config.fp_cost)?;
                    let (forest, _) =
                        train_stage_forest(stage, rows, cost, train.forest, train.seed)?;
                    Ok((fn_cost.to_bits(), forest))
                })
                .collect()
        };
        let (edit, _) = train_stage_forest(
            Stage::Edit,
            &instances.edit,
            train.costs.edit,
            train.forest,
            train.seed,
        )?;
        let rp_start = grid(Stage::RpStart, &config.rp_start_fn_costs, &instances.rp_start)?;
        let rm_start = grid(Stage::RmStart, &config.rm_start_fn_costs, &instances.rm_start)?;
        let rp_end = grid(Stage::RpEnd, &config.rp_end_fn_costs, &instances.rp_end)?;
        let trainings = 1 + rp_start.len() + rm_start.len() + rp_end.len();
        Ok(ForestCache { edit, rp_start, rm_start, rp_end, trainings })
    }

    fn assemble(&self, setting: &SweepSetting) -> StageForests {
        let pick = |map: &BTreeMap<u64, Forest>, cost: f64| {
            map.get(&cost.to_bits()).expect("cached cost").clone()
        };
        StageForests {
            edit: self.edit.clone(),
            rp_start: pick(&self.rp_start, setting.rp_start_fn),
            rm_start: pick(&self.rm_start, setting.rm_start_fn),
            rp_end: pick(&self.rp_end, setting.rp_end_fn),
        }
    }
}

fn record_path(dir: &Path, setting: &SweepSetting) -> std::path::PathBuf {
    dir.join(format!("{}.json", setting.key()))
}

/// A persisted record for `setting`, if a readable one exists.
fn load_record(dir: &Path, setting: &SweepSetting) -> Option<MetricsReport> {
    let text = std::fs::read_to_string(record_path(dir, setting)).ok()?;
    let record: SweepRecord = serde_json::from_str(&text).ok()?;
    (record.setting == *setting).then_some(record.report)
}

fn store_record(dir: &Path, setting: &SweepSetting, report: &MetricsReport) -> Result<()> {
    let record = SweepRecord { setting: *setting, report: report.clone() };
    let text = serde_json::to_string_pretty(&record).map_err(|e| {
        Error::Data(format!("could not serialize sweep record: {e}"))
    })?;
    // Write-then-rename so an interrupt never leaves a half-written
    // record under the name resumption trusts.
    let path = record_path(dir, setting);
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, &path)?;
    Ok(())
}

/// Trains the distinct-cost classifier cache on `train_corpus`, then
/// evaluates every setting on `eval_corpus`, persisting one record per
/// setting under `out_dir` and skipping settings already recorded
/// there. Total scores are recomputed over the whole cohort at the
/// end, so a resumed sweep renders the same table as a clean one.
pub fn run_sweep(
    train_corpus: &Corpus,
    eval_corpus: &Corpus,
    config: &SweepConfig,
    out_dir: impl AsRef<Path>,
) -> Result<SweepReport> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let settings = config.settings();

    // Resume pass: anything already on disk is settled.
    let mut reports: Vec<Option<MetricsReport>> = settings
        .iter()
        .map(|s| load_record(out_dir, s))
        .collect();

    let mut trainings = 0;
    if reports.iter().any(Option::is_none) {
        let assignment = crate::corpus::folds::FoldAssignment::new(
            train_corpus.utterances.len(),
            config.train.folds,
            config.train.seed,
        )?;
        let instances = crossfold_instances(train_corpus, &assignment)?;
        let cache = ForestCache::build(&instances, config)?;
        trainings = cache.trainings;
        let everything: Vec<&crate::corpus::Utterance> =
            train_corpus.utterances.iter().collect();
        let models = train_models(&everything, "sweep training")?;

        let fresh: Vec<(usize, MetricsReport)> = settings
            .par_iter()
            .enumerate()
            .filter(|(i, _)| reports[*i].is_none())
            .map(|(i, setting)| {
                let forests = cache.assemble(setting);
                let runs = run_corpus(
                    &models.lex,
                    &models.pos,
                    &models.edit,
                    &forests,
                    setting.capacity,
                    &eval_corpus.utterances,
                )?;
                let report = evaluate_runs(&eval_corpus.utterances, &runs)?;
                store_record(out_dir, setting, &report)?;
                Ok((i, report))
            })
            .collect::<Result<_>>()?;
        for (i, report) in fresh {
            reports[i] = Some(report);
        }
    }

    let mut rows: Vec<(SweepSetting, MetricsReport)> = settings
        .into_iter()
        .zip(reports)
        .map(|(s, r)| (s, r.expect("all settings settled")))
        .collect();
    let cohort: Vec<MetricsReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    for (row, ts) in rows.iter_mut().zip(total_score(&cohort)) {
        row.1.ts = ts;
    }
    Ok(SweepReport { rows, forest_trainings: trainings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{generate, SynthConfig};

    #[test]
    fn default_grid_enumerates_320_settings_per_capacity() {
        let config = SweepConfig::default();
        config.validate().unwrap();
        let settings = config.settings();
        assert_eq!(settings.len(), 640);
        for capacity in [1, 2] {
            let n = settings.iter().filter(|s| s.capacity == capacity).count();
            assert_eq!(n, 320);
        }
        let keys: std::collections::BTreeSet<String> =
            settings.iter().map(SweepSetting::key).collect();
        assert_eq!(keys.len(), 640, "setting keys must be distinct");
    }

    #[test]
    fn setting_keys_are_filename_safe() {
        let setting = SweepSetting {
            capacity: 2,
            rp_start_fn: 0.5,
            rm_start_fn: 16.0,
            rp_end_fn: 128.0,
        };
        assert_eq!(setting.key(), "cap2_rps0p5_rms16_rpe128");
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        let mut config = SweepConfig { capacities: vec![3], ..SweepConfig::default() };
        assert!(config.validate().is_err());
        config.capacities = vec![1];
        config.rm_start_fn_costs = vec![];
        assert!(config.validate().is_err());
        config.rm_start_fn_costs = vec![-1.0];
        assert!(config.validate().is_err());
        config.rm_start_fn_costs = vec![1.0];
        config.fp_cost = 0.0;
        assert!(config.validate().is_err());
    }

    fn sweep_fixture() -> (Corpus, SweepConfig) {
        let corpus = generate(&SynthConfig {
            n_utterances: 30,
            vocab_size: 30,
            repair_rate: 0.2,
            edit_rate: 0.1,
            seed: 17,
            ..SynthConfig::default()
        })
        .unwrap();
        let config = SweepConfig {
            rp_start_fn_costs: vec![1.0, 4.0],
            rm_start_fn_costs: vec![1.0, 4.0],
            rp_end_fn_costs: vec![1.0, 4.0],
            capacities: vec![1],
            fp_cost: 1.0,
            train: TrainConfig { folds: 3, seed: 2, ..TrainConfig::default() },
        };
        (corpus, config)
    }

    #[test]
    fn small_sweep_covers_grid_and_reuses_forests() {
        let (corpus, config) = sweep_fixture();
        let dir = tempfile::tempdir().unwrap();
        let report = run_sweep(&corpus, &corpus, &config, dir.path()).unwrap();
        assert_eq!(report.rows.len(), 8);
        // One edit forest plus two per swept stage.
        assert_eq!(report.forest_trainings, 7);
        for (_, row) in &report.rows {
            assert!(row.ts.is_finite());
            assert!((0.0..=1.0).contains(&row.ts));
        }
        let table = report.render();
        assert!(table.contains("best f_rm"));
        assert!(table.contains("best ts"));
        assert_eq!(report.best_rows().len(), 6);
        assert_eq!(report.render_full().lines().count(), 9);
    }

    #[test]
    fn interrupted_sweep_resumes_to_the_identical_table() {
        let (corpus, config) = sweep_fixture();
        let full_dir = tempfile::tempdir().unwrap();
        let full = run_sweep(&corpus, &corpus, &config, full_dir.path()).unwrap();

        // Simulate an interruption by dropping some finished records.
        let mut names: Vec<_> = std::fs::read_dir(full_dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for path in names.iter().step_by(2) {
            std::fs::remove_file(path).unwrap();
        }
        let resumed = run_sweep(&corpus, &corpus, &config, full_dir.path()).unwrap();
        assert_eq!(full.render_full(), resumed.render_full());
        assert_eq!(full.render(), resumed.render());

        // A sweep with everything already settled trains nothing.
        let settled = run_sweep(&corpus, &corpus, &config, full_dir.path()).unwrap();
        assert_eq!(settled.forest_trainings, 0);
        assert_eq!(full.render_full(), settled.render_full());
    }

    #[test]
    fn persisted_records_are_trusted_on_resume() {
        let (corpus, config) = sweep_fixture();
        let dir = tempfile::tempdir().unwrap();
        let baseline_dir = tempfile::tempdir().unwrap();
        let baseline = run_sweep(&corpus, &corpus, &config, baseline_dir.path()).unwrap();

        // Pre-seed one setting with a sentinel report; the sweep must
        // keep it rather than recompute.
        let (sentinel_setting, mut sentinel_report) = baseline.rows[3].clone();
        sentinel_report.po = 99.0;
        std::fs::create_dir_all(dir.path()).unwrap();
        store_record(dir.path(), &sentinel_setting, &sentinel_report).unwrap();

        let report = run_sweep(&corpus, &corpus, &config, dir.path()).unwrap();
        assert_eq!(report.rows[3].1.po, 99.0);
    }
}
