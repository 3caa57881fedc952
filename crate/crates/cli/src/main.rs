//! Command-line toolkit for incremental speech-repair detection:
//! corpus synthesis, training, streaming detection, evaluation,
//! feature ranking, and the stage-cost sweep.

mod config;
mod stream;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::FileConfig;
use disfluency::corpus::markup::{read_corpus, serialize_corpus, write_corpus};
use disfluency::corpus::synth::{generate, SynthConfig};
use disfluency::corpus::Corpus;
use disfluency::error::Error as CoreError;
use disfluency::eval::evaluate_runs;
use disfluency::features::{information_gain_ranking, Stage};
use disfluency::forest::{CostMatrix, ForestParams, TrainReport};
use disfluency::sweep::{run_sweep, SweepConfig};
use disfluency::train::{
    crossfold_instances, read_bundle, train_bundle, write_bundle, StageCosts, TrainConfig,
};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "disfluency",
    version,
    about = "Incremental speech-repair and edit-term detection over POS-tagged words"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus
    Synth(SynthArgs),
    /// Train a detector bundle from an annotated corpus
    Train(TrainArgs),
    /// Stream word/tag lines through a trained detector
    Detect(DetectArgs),
    /// Score a trained detector against an annotated corpus
    Evaluate(EvaluateArgs),
    /// Evaluate a grid of stage-cost settings and report the leaders
    Sweep(SweepArgs),
    /// Rank one stage's features by cross-validated information gain
    RankFeatures(RankArgs),
}

/// Command-line misuse that clap cannot catch itself.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 1 for misuse (bad flag values, impossible configuration), 2 for
/// everything that goes wrong with data or files.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if matches!(cause.downcast_ref::<CoreError>(), Some(CoreError::Config(_))) {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Detect(args) => run_detect(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::RankFeatures(args) => run_rank(args),
    }
}

fn load_corpus(path: &PathBuf) -> Result<Corpus> {
    read_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

#[derive(Args)]
struct SynthArgs {
    /// Destination file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of utterances
    #[arg(long)]
    utterances: Option<usize>,
    /// Open-class vocabulary size per word pool
    #[arg(long)]
    vocab: Option<usize>,
    /// Target fraction of reparandum words
    #[arg(long)]
    repair_rate: Option<f64>,
    /// Per-boundary chance of an isolated edit term
    #[arg(long)]
    edit_rate: Option<f64>,
    /// Relative weights of repeat, substitute, delete repairs
    #[arg(long, value_delimiter = ',')]
    kind_mix: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let d = SynthConfig::default();
    let kind_mix = file.resolve_list(args.kind_mix, "kind_mix", d.kind_mix.to_vec())?;
    let [repeat, substitute, delete]: [f64; 3] = kind_mix
        .try_into()
        .map_err(|_| usage("--kind-mix needs exactly three weights"))?;
    let config = SynthConfig {
        n_utterances: file.resolve(args.utterances, "utterances", d.n_utterances)?,
        vocab_size: file.resolve(args.vocab, "vocab", d.vocab_size)?,
        repair_rate: file.resolve(args.repair_rate, "repair_rate", d.repair_rate)?,
        kind_mix: [repeat, substitute, delete],
        edit_rate: file.resolve(args.edit_rate, "edit_rate", d.edit_rate)?,
        seed: file.resolve(args.seed, "seed", d.seed)?,
    };
    let corpus = generate(&config)?;
    match args.out {
        Some(path) => {
            write_corpus(&path, &corpus)?;
            eprintln!("wrote {} utterances to {}", corpus.utterances.len(), path.display());
        }
        None => print!("{}", serialize_corpus(&corpus)),
    }
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// Annotated corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Bundle directory to create
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation folds for feature annotation
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trees per stage classifier
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum decisions on any root-to-leaf path
    #[arg(long)]
    depth: Option<usize>,
    /// Cost-resampling iterations per classifier
    #[arg(long)]
    iterations: Option<usize>,
    /// Fraction of the data drawn per resample
    #[arg(long)]
    resample: Option<f64>,
    /// False-negative cost of the edit stage
    #[arg(long)]
    edit_fn_cost: Option<f64>,
    /// False-negative cost of the repair-onset stage
    #[arg(long)]
    rp_start_fn_cost: Option<f64>,
    /// False-negative cost of the reparandum-onset stage
    #[arg(long)]
    rm_start_fn_cost: Option<f64>,
    /// False-negative cost of the phase-end stage
    #[arg(long)]
    rp_end_fn_cost: Option<f64>,
    /// False-alarm cost shared by every stage
    #[arg(long)]
    fp_cost: Option<f64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn train_config(args: &TrainArgs, file: &FileConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let dc = StageCosts::default();
    let fp = file.resolve(args.fp_cost, "fp_cost", 1.0)?;
    let cost = |flag: Option<f64>, key: &str, default: f64| -> Result<CostMatrix> {
        Ok(CostMatrix::new(file.resolve(flag, key, default)?, fp)?)
    };
    Ok(TrainConfig {
        folds: file.resolve(args.folds, "folds", d.folds)?,
        seed: file.resolve(args.seed, "seed", d.seed)?,
        costs: StageCosts {
            edit: cost(args.edit_fn_cost, "edit_fn_cost", dc.edit.false_negative)?,
            rp_start: cost(
                args.rp_start_fn_cost,
                "rp_start_fn_cost",
                dc.rp_start.false_negative,
            )?,
            rm_start: cost(
                args.rm_start_fn_cost,
                "rm_start_fn_cost",
                dc.rm_start.false_negative,
            )?,
            rp_end: cost(args.rp_end_fn_cost, "rp_end_fn_cost", dc.rp_end.false_negative)?,
        },
        forest: ForestParams {
            n_trees: file.resolve(args.trees, "trees", d.forest.n_trees)?,
            max_depth: file.resolve(args.depth, "depth", d.forest.max_depth)?,
            metacost_iterations: file.resolve(
                args.iterations,
                "iterations",
                d.forest.metacost_iterations,
            )?,
            resample_fraction: file.resolve(
                args.resample,
                "resample",
                d.forest.resample_fraction,
            )?,
            seed: 0,
        },
    })
}

fn report_line(out: &mut impl Write, stage: &str, r: &TrainReport) -> Result<()> {
    writeln!(
        out,
        "{stage:<9} {:>9} {:>9} {:>10} {:>10} {:>6}",
        r.n_examples, r.n_positive, r.relabeled_to_positive, r.relabeled_to_negative,
        r.max_tree_depth,
    )?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let config = train_config(&args, &file)?;
    let corpus = load_corpus(&args.corpus)?;
    let trained = train_bundle(&corpus, &config)?;
    write_bundle(&args.out, &trained)
        .with_context(|| format!("writing bundle to {}", args.out.display()))?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "trained bundle {}", args.out.display())?;
    writeln!(out, "provenance {:016x}", trained.bundle.provenance)?;
    writeln!(
        out,
        "{:<9} {:>9} {:>9} {:>10} {:>10} {:>6}",
        "stage", "examples", "positive", "relabeled+", "relabeled-", "depth"
    )?;
    report_line(&mut out, "edit", &trained.reports.edit)?;
    report_line(&mut out, "rp_start", &trained.reports.rp_start)?;
    report_line(&mut out, "rm_start", &trained.reports.rm_start)?;
    report_line(&mut out, "rp_end", &trained.reports.rp_end)?;
    Ok(())
}

#[derive(Args)]
struct DetectArgs {
    /// Trained bundle directory
    #[arg(long)]
    bundle: PathBuf,
    /// Parallel repair hypotheses held per onset (1 or 2)
    #[arg(long)]
    capacity: Option<usize>,
    /// Read from a file instead of stdin
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write to a file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Accepted for interface uniformity; detection is deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run_detect(args: DetectArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let capacity = file.resolve(args.capacity, "capacity", 1)?;
    let bundle = read_bundle(&args.bundle)
        .with_context(|| format!("loading bundle {}", args.bundle.display()))?;

    let mut input: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(BufReader::new(
            std::fs::File::open(path)
                .with_context(|| format!("opening input {}", path.display()))?,
        )),
        None => Box::new(std::io::stdin().lock()),
    };
    let mut output: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .with_context(|| format!("creating output {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    stream::stream_detect(&bundle, capacity, &mut input, &mut output)
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained bundle directory
    #[arg(long)]
    bundle: PathBuf,
    /// Annotated corpus to score against
    #[arg(long)]
    corpus: PathBuf,
    /// Parallel repair hypotheses held per onset (1 or 2)
    #[arg(long)]
    capacity: Option<usize>,
    /// Print the report as JSON instead of key-value lines
    #[arg(long)]
    json: bool,
    /// Accepted for interface uniformity; evaluation is deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let capacity = file.resolve(args.capacity, "capacity", 1)?;
    let bundle = read_bundle(&args.bundle)
        .with_context(|| format!("loading bundle {}", args.bundle.display()))?;
    let corpus = load_corpus(&args.corpus)?;
    let runs = bundle.run_corpus(&corpus.utterances, capacity)?;
    let report = evaluate_runs(&corpus.utterances, &runs)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_key_values());
    }
    Ok(())
}

#[derive(Args)]
struct SweepArgs {
    /// Training corpus
    #[arg(long)]
    corpus: PathBuf,
    /// Held-out corpus to score; defaults to the training corpus
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Directory for per-setting records and the final table
    #[arg(long)]
    out: PathBuf,
    /// False-negative costs for the repair-onset stage
    #[arg(long, value_delimiter = ',')]
    rp_start_costs: Option<Vec<f64>>,
    /// False-negative costs for the reparandum-onset stage
    #[arg(long, value_delimiter = ',')]
    rm_start_costs: Option<Vec<f64>>,
    /// False-negative costs for the phase-end stage
    #[arg(long, value_delimiter = ',')]
    rp_end_costs: Option<Vec<f64>>,
    /// Hypothesis stack capacities to sweep
    #[arg(long, value_delimiter = ',')]
    capacities: Option<Vec<usize>>,
    /// False-alarm cost shared by every setting
    #[arg(long)]
    fp_cost: Option<f64>,
    /// False-negative cost of the edit stage, which the sweep fixes
    #[arg(long)]
    edit_fn_cost: Option<f64>,
    /// Cross-validation folds for feature annotation
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trees per stage classifier
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum decisions on any root-to-leaf path
    #[arg(long)]
    depth: Option<usize>,
    /// Cost-resampling iterations per classifier
    #[arg(long)]
    iterations: Option<usize>,
    /// Fraction of the data drawn per resample
    #[arg(long)]
    resample: Option<f64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run_sweep_cmd(args: SweepArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let d = SweepConfig::default();
    let dt = TrainConfig::default();
    let fp = file.resolve(args.fp_cost, "fp_cost", d.fp_cost)?;
    let edit_fn = file.resolve(
        args.edit_fn_cost,
        "edit_fn_cost",
        dt.costs.edit.false_negative,
    )?;
    let config = SweepConfig {
        rp_start_fn_costs: file.resolve_list(
            args.rp_start_costs,
            "rp_start_costs",
            d.rp_start_fn_costs,
        )?,
        rm_start_fn_costs: file.resolve_list(
            args.rm_start_costs,
            "rm_start_costs",
            d.rm_start_fn_costs,
        )?,
        rp_end_fn_costs: file.resolve_list(args.rp_end_costs, "rp_end_costs", d.rp_end_fn_costs)?,
        capacities: file.resolve_list(args.capacities, "capacities", d.capacities)?,
        fp_cost: fp,
        train: TrainConfig {
            folds: file.resolve(args.folds, "folds", dt.folds)?,
            seed: file.resolve(args.seed, "seed", dt.seed)?,
            costs: StageCosts {
                edit: CostMatrix::new(edit_fn, fp)?,
                ..StageCosts::default()
            },
            forest: ForestParams {
                n_trees: file.resolve(args.trees, "trees", dt.forest.n_trees)?,
                max_depth: file.resolve(args.depth, "depth", dt.forest.max_depth)?,
                metacost_iterations: file.resolve(
                    args.iterations,
                    "iterations",
                    dt.forest.metacost_iterations,
                )?,
                resample_fraction: file.resolve(
                    args.resample,
                    "resample",
                    dt.forest.resample_fraction,
                )?,
                seed: 0,
            },
        },
    };

    let corpus = load_corpus(&args.corpus)?;
    let eval_corpus = match &args.eval {
        Some(path) => Some(load_corpus(path)?),
        None => None,
    };
    let report = run_sweep(
        &corpus,
        eval_corpus.as_ref().unwrap_or(&corpus),
        &config,
        &args.out,
    )?;
    std::fs::write(args.out.join("table.txt"), report.render_full())?;
    print!("{}", report.render());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Edit,
    RpStart,
    RmStart,
    RpEnd,
}

impl From<StageArg> for Stage {
    fn from(arg: StageArg) -> Stage {
        match arg {
            StageArg::Edit => Stage::Edit,
            StageArg::RpStart => Stage::RpStart,
            StageArg::RmStart => Stage::RmStart,
            StageArg::RpEnd => Stage::RpEnd,
        }
    }
}

#[derive(Args)]
struct RankArgs {
    /// Annotated corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Stage whose features to rank
    #[arg(long, value_enum)]
    stage: StageArg,
    /// Cross-validation folds, for feature annotation and ranking both
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional `key = value` defaults file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run_rank(args: RankArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let folds = file.resolve(args.folds, "folds", 10)?;
    let seed = file.resolve(args.seed, "seed", 0)?;
    let corpus = load_corpus(&args.corpus)?;
    let assignment = disfluency::corpus::folds::FoldAssignment::new(
        corpus.utterances.len(),
        folds,
        seed,
    )?;
    let instances = crossfold_instances(&corpus, &assignment)?;
    let stage: Stage = args.stage.into();
    let set = match stage {
        Stage::Edit => &instances.edit,
        Stage::RpStart => &instances.rp_start,
        Stage::RmStart => &instances.rm_start,
        Stage::RpEnd => &instances.rp_end,
    };
    if set.is_empty() {
        bail!(CoreError::Data(format!(
            "no {} instances could be extracted from this corpus",
            stage.name()
        )));
    }
    let names: Vec<String> = stage.manifest().iter().map(|&n| n.to_string()).collect();
    let ranking = information_gain_ranking(&names, &set.rows, &set.labels, folds, seed)?;
    if ranking.single_class {
        eprintln!("note: every instance has the same label; merits are all zero");
    }
    println!(
        "{:<5} {:<28} {:>8} {:>8} {:>9}",
        "rank", "feature", "merit", "sd", "mean_rank"
    );
    for (i, feature) in ranking.features.iter().enumerate() {
        println!(
            "{:<5} {:<28} {:>8.4} {:>8.4} {:>9.2}",
            i + 1,
            feature.name,
            feature.merit,
            feature.merit_sd,
            feature.mean_rank,
        );
    }
    Ok(())
}
