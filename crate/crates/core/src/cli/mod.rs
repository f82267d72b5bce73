//! Command-line front end. Every subcommand reads and writes the line-delimited
//! artifacts of [`crate::data::io`] and leaves a `<output>.manifest.json`
//! next to its main output.

mod config;
mod manifest;
mod pipeline;

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{load_config, parse_config, Config, LoadedConfig};
pub use manifest::{manifest_path, FileDigest, RunManifest, StageRecord};
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutput, PipelineSummary};

use crate::data::io::{group_scores, join_quality, load_dataset_all, load_scores, read_records, save_dataset, write_records};
use crate::data::{load_candidates, load_labels, save_candidates, save_scores, CandidateSet, IdentifierMap, LogicalForm, Split};
use crate::error::{Error, Result};
use crate::evaluation::{
    annotate, evaluate_alignment, evaluate_pipeline, nbest_sweep, render_pipeline_table, write_sweep_tsv,
    LabelStore, PipelineEvalConfig, SweepConfig, COMBINED_METRIC, LABELING_GUIDE,
};
use crate::genclient::{build_variable_dataset, BudgetBuilderConfig, CandidateGenerator};
use crate::reranker::{Optimizer, RerankerModel, WeightMode};
use crate::scoring::protocol::serve_lines;
use crate::scoring::{CandidateLengthScorer, MetricChoice, ScorerKind};
use crate::selection::{select_all, tune_lambda, LambdaConfig, SelectionContext, SelectionResult, Strategy};
use crate::util::{derive_seed, parse_grid};

#[derive(Debug, Parser)]
#[command(name = "lfrerank", version, about = "Generate, score and rerank utterances for logical forms")]
pub struct Cli {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel workers; overrides the config file.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML config. Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample unique candidates for every LF of a dataset.
    Generate(GenerateArgs),
    /// Fixed sampling budget per LF, keeping sets with enough unique texts.
    BudgetBuild(BudgetArgs),
    /// Score candidates with one or more metrics.
    Score(ScoreArgs),
    /// Train a reranker on scored candidates.
    Train(TrainArgs),
    /// Choose one candidate per set.
    Select(SelectArgs),
    /// Grid-search the blend weight on dev sets.
    TuneLambda(TuneArgs),
    /// Agreement of metrics with binary human labels.
    EvalAlignment(AlignArgs),
    /// Mean quality of selections per strategy, with significance.
    EvalPipeline(EvalPipelineArgs),
    /// Train/test n-best size sweep.
    Sweep(SweepArgs),
    /// Label candidates interactively.
    Annotate(AnnotateArgs),
    /// Full pipeline from the config file.
    Run(RunArgs),
    /// Check a config file and report every problem.
    ValidateConfig,
    /// Rewrite Freebase identifiers in a dataset.
    MapIds(MapIdsArgs),
    /// Line-protocol scorer reporting candidate length (for testing).
    #[command(hide = true)]
    MockScorer(MockScorerArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Only LFs of this split (default: all).
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub out: PathBuf,
    /// Use the offline mock generator regardless of the config.
    #[arg(long, conflicts_with = "endpoint")]
    pub mock: bool,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Unique candidates per LF.
    #[arg(long = "n", alias = "target-n")]
    pub target_n: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long)]
    pub map_ids: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BudgetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mock: bool,
    #[arg(long = "samples", alias = "samples-per-lf", default_value_t = 30)]
    pub samples_per_lf: usize,
    #[arg(long, default_value_t = 2)]
    pub min_unique: usize,
    /// Wall-clock budget such as `10m` or `90s`.
    #[arg(long, value_parser = humantime::parse_duration)]
    #[serde(skip)]
    pub budget: Option<Duration>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long = "in", alias = "candidates")]
    pub candidates: PathBuf,
    /// `bleu`, `toy-parser` or `ext:<command-or-url>`; repeatable. Defaults
    /// to the config's metrics.
    #[arg(long = "metric")]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long = "quality", alias = "scores")]
    pub scores: PathBuf,
    /// Dev sets for early stopping; carved from the training sets if absent.
    #[arg(long)]
    pub dev_candidates: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dev_frac: Option<f64>,
    #[arg(long)]
    pub weight_mode: Option<WeightMode>,
    #[arg(long)]
    pub optimizer: Option<Optimizer>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long = "in", alias = "candidates")]
    pub candidates: PathBuf,
    /// Repeatable.
    #[arg(long = "strategy", required = true)]
    pub strategies: Vec<Strategy>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Blend weight for `combined`; a `lambda.json` from tune-lambda also works.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Needed by `oracle`.
    #[arg(long = "quality", alias = "scores")]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Print each choice with its score breakdown.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[arg(long = "dev", alias = "candidates")]
    pub candidates: PathBuf,
    #[arg(long = "quality", alias = "scores")]
    pub scores: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Average ranking accuracy per set instead of pooling pairs.
    #[arg(long)]
    pub per_set_mean: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalPipelineArgs {
    #[arg(long)]
    pub selections: PathBuf,
    /// Candidate sets, to check the quality vectors against.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long = "quality", alias = "scores")]
    pub scores: PathBuf,
    #[arg(long)]
    pub baseline: Option<Strategy>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long = "in", alias = "candidates")]
    pub candidates: PathBuf,
    #[arg(long = "quality", alias = "scores")]
    pub scores: PathBuf,
    /// Comma-separated n-best sizes used for training.
    #[arg(long, value_delimiter = ',', required = true)]
    pub train_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub test_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnotateArgs {
    #[arg(long = "in", alias = "candidates")]
    pub candidates: PathBuf,
    /// Appended to as sets are finished; existing labels are skipped.
    #[arg(long = "out", alias = "labels")]
    pub labels: PathBuf,
    /// Print the labeling guide and exit.
    #[arg(long)]
    pub guide: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Reuse artifacts already present in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MapIdsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Two-column TSV replacing the built-in table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MockScorerArgs {
    #[arg(long, default_value = "external-reference")]
    pub kind: String,
}

/// Parse arguments and run. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

struct Ctx {
    loaded: LoadedConfig,
    seed: u64,
    workers: usize,
}

fn context(cli: &Cli) -> Result<Ctx> {
    let loaded = match &cli.config {
        Some(p) => load_config(p)?,
        None => LoadedConfig {
            config: Config::default(),
            raw: toml::Table::new(),
            base_dir: PathBuf::from("."),
        },
    };
    let seed = cli.seed.unwrap_or(loaded.config.seed);
    let workers = cli.workers.unwrap_or(loaded.config.workers).max(1);
    Ok(Ctx { loaded, seed, workers })
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Command::MockScorer(a) = &cli.command {
        return mock_scorer(a);
    }
    let ctx = context(&cli)?;
    match &cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::BudgetBuild(a) => budget_build(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Select(a) => select(&ctx, a),
        Command::TuneLambda(a) => tune(&ctx, a),
        Command::EvalAlignment(a) => eval_alignment(a),
        Command::EvalPipeline(a) => eval_pipeline(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::Run(a) => {
            if cli.config.is_none() {
                return Err(Error::InvalidArgument("`run` needs --config".into()));
            }
            let summary = run_pipeline(
                &ctx.loaded,
                &PipelineOptions {
                    resume: a.resume,
                    seed: cli.seed,
                    workers: cli.workers,
                },
            )?;
            println!("{}", render_pipeline_table(&summary.output.reports));
            println!("lambda* = {}", summary.output.lambda.best_lambda);
            println!("artifacts in {}", summary.out_dir.display());
            Ok(())
        }
        Command::ValidateConfig => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("validate-config needs --config".into()))?;
            println!("{}: ok", path.display());
            Ok(())
        }
        Command::MapIds(a) => map_ids(a),
        Command::MockScorer(_) => unreachable!("handled above"),
    }
}

/// Write the manifest for `output` recording `args`, inputs and seeds.
fn record<A: Serialize>(args: &A, inputs: &[&Path], output: &Path, seeds: &[(&str, u64)]) -> Result<()> {
    let mut m = RunManifest::start(serde_json::to_value(args)?);
    for (name, s) in seeds {
        m.seeds.insert(name.to_string(), *s);
    }
    for p in inputs {
        m.input(p)?;
    }
    m.output(output)?;
    m.finish();
    m.write(&manifest_path(output))
}

fn select_split(records: Vec<LogicalForm>, split: Option<Split>) -> Vec<LogicalForm> {
    match split {
        Some(s) => records.into_iter().filter(|r| r.split == s).collect(),
        None => records,
    }
}

fn generator_section(ctx: &Ctx, mock: bool, endpoint: &Option<String>) -> config::GeneratorSection {
    let mut g = ctx.loaded.config.generator.clone();
    if mock {
        g.mode = "mock".into();
    }
    if let Some(e) = endpoint {
        g.mode = "http".into();
        g.endpoint = Some(e.clone());
    }
    g
}

fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<()> {
    let mut records = load_dataset_all(&a.dataset)?;
    if a.map_ids || ctx.loaded.config.data.map_freebase_ids {
        pipeline::apply_id_map(&mut records);
    }
    let exemplars: Vec<LogicalForm> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let lfs = select_split(records, a.split);
    let mut g = generator_section(ctx, a.mock, &a.endpoint);
    if let Some(n) = a.target_n {
        g.target_n = n;
    }
    if let Some(t) = a.temperature {
        g.temperature = t;
    }
    if let Some(m) = a.max_attempts {
        g.max_attempts = m;
    }
    let seed = derive_seed(ctx.seed, "generate", 0);
    let client = pipeline::build_client(&g, seed)?;
    let gen = CandidateGenerator::new(&*client, pipeline::prompt_template(&g), &exemplars, pipeline::generator_config(&g, seed))
        .with_workers(ctx.workers);
    let outcomes = gen.generate_all(&lfs)?;
    let truncated = outcomes.iter().filter(|o| o.truncated).count();
    let sets: Vec<CandidateSet> = outcomes.into_iter().map(|o| o.set).collect();
    save_candidates(&sets, &a.out)?;
    record(a, &[&a.dataset], &a.out, &[("generate", seed)])?;
    eprintln!("{} sets written to {} ({truncated} short of {})", sets.len(), a.out.display(), g.target_n);
    Ok(())
}

fn budget_build(ctx: &Ctx, a: &BudgetArgs) -> Result<()> {
    let records = load_dataset_all(&a.dataset)?;
    let exemplars: Vec<LogicalForm> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let lfs = select_split(records, a.split);
    let g = generator_section(ctx, a.mock, &None);
    let seed = derive_seed(ctx.seed, "generate", 0);
    let client = pipeline::build_client(&g, seed)?;
    let gen = CandidateGenerator::new(&*client, pipeline::prompt_template(&g), &exemplars, pipeline::generator_config(&g, seed))
        .with_workers(ctx.workers);
    let cfg = BudgetBuilderConfig {
        samples_per_lf: a.samples_per_lf,
        min_unique: a.min_unique,
        wall_clock_budget: a.budget,
    };
    let outcome = build_variable_dataset(&lfs, &cfg, &gen)?;
    save_candidates(&outcome.sets, &a.out)?;
    record(a, &[&a.dataset], &a.out, &[("generate", seed)])?;
    eprintln!(
        "{} sets kept, {} dropped, {} of {} LFs processed{}; mean set size {:.2}",
        outcome.sets.len(),
        outcome.dropped.len(),
        outcome.processed,
        lfs.len(),
        if outcome.budget_exhausted { " (budget exhausted)" } else { "" },
        outcome.mean_set_size()
    );
    Ok(())
}

fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<()> {
    let sets = load_candidates(&a.candidates)?;
    let names = if a.metrics.is_empty() { &ctx.loaded.config.scoring.metrics } else { &a.metrics };
    let metrics: Vec<MetricChoice> = names.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let s = &ctx.loaded.config.scoring;
    let lines = pipeline::score_with(
        &sets,
        &metrics,
        a.batch_size.unwrap_or(s.batch_size),
        Duration::from_secs(a.timeout_secs.unwrap_or(s.timeout_secs)),
    )?;
    save_scores(&lines, &a.out)?;
    record(a, &[&a.candidates], &a.out, &[])
}

/// Candidate sets, their tables and combined quality vectors.
fn scored(ctx: &Ctx, candidates: &Path, scores: &Path) -> Result<(Vec<CandidateSet>, Vec<crate::data::QualityTable>, Vec<Vec<f64>>)> {
    let sets = load_candidates(candidates)?;
    let tables = group_scores(load_scores(scores)?)?;
    let metrics: Vec<String> = tables.first().map(|t| t.per_metric.keys().cloned().collect()).unwrap_or_default();
    let q = pipeline::quality_vectors(&sets, &tables, &metrics, ctx.loaded.config.scoring.normalization)?;
    Ok((sets, tables, q))
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let (sets, tables, q) = scored(ctx, &a.candidates, &a.scores)?;
    let mut tcfg = ctx.loaded.config.training.train_config(derive_seed(ctx.seed, "train", 0));
    if let Some(e) = a.epochs {
        tcfg.max_epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        tcfg.learning_rate = lr;
    }
    if let Some(g) = a.gamma {
        tcfg.gamma = g;
    }
    if let Some(w) = a.weight_mode {
        tcfg.weight_mode = w;
    }
    if let Some(o) = a.optimizer {
        tcfg.optimizer = o;
    }
    let dev_frac = a.dev_frac.unwrap_or(ctx.loaded.config.training.dev_frac);
    let train_pairs = pipeline::trainable(&sets, &q);
    let dev_sets;
    let dev_q;
    let inputs = match &a.dev_candidates {
        Some(p) => {
            dev_sets = load_candidates(p)?;
            let metrics: Vec<String> = tables.first().map(|t| t.per_metric.keys().cloned().collect()).unwrap_or_default();
            dev_q = pipeline::quality_vectors(&dev_sets, &tables, &metrics, ctx.loaded.config.scoring.normalization)?;
            pipeline::TrainInputs {
                train: train_pairs,
                dev: pipeline::trainable(&dev_sets, &dev_q),
            }
        }
        None => pipeline::carve_dev(train_pairs, dev_frac, derive_seed(ctx.seed, "dev-split", 0))?,
    };
    let model = pipeline::fit(&inputs, &ctx.loaded.config.features, &tcfg)?;
    model.save(&a.out)?;
    let mut inputs_paths: Vec<&Path> = vec![&a.candidates, &a.scores];
    if let Some(p) = &a.dev_candidates {
        inputs_paths.push(p);
    }
    record(a, &inputs_paths, &a.out, &[("train", tcfg.seed)])?;
    let meta = &model.train_meta;
    eprintln!(
        "trained {} epoch(s), best epoch {} (dev loss {:.6}), {} nonzero weights",
        meta.epochs_run,
        meta.best_epoch,
        meta.best_dev_loss,
        model.nonzero_weights()
    );
    Ok(())
}

fn parse_lambda(arg: &str) -> Result<f64> {
    if let Ok(v) = arg.parse::<f64>() {
        return Ok(v);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::io(format!("reading lambda file {arg}"), e))?;
    let t: crate::selection::LambdaTuning = serde_json::from_str(&text)?;
    Ok(t.best_lambda)
}

fn select(ctx: &Ctx, a: &SelectArgs) -> Result<()> {
    let sets = load_candidates(&a.candidates)?;
    let model = a.model.as_deref().map(RerankerModel::load).transpose()?;
    let quality = match &a.scores {
        Some(p) => scored(ctx, &a.candidates, p)?.2,
        None => Vec::new(),
    };
    let lambda = a.lambda.as_deref().map(parse_lambda).transpose()?;
    let seed = derive_seed(ctx.seed, "select", 0);
    let sctx = SelectionContext {
        model: model.as_ref(),
        lambda,
        quality: a.scores.as_ref().map(|_| quality.as_slice()),
        seed,
        standardize_blend: ctx.loaded.config.selection.standardize_blend,
    };
    let mut all: Vec<SelectionResult> = Vec::new();
    for s in &a.strategies {
        all.extend(select_all(&sets, *s, &sctx)?);
    }
    write_records(&a.out, &all)?;
    if a.explain {
        for r in &all {
            println!("{}\t{}\t#{}\t{}", r.lf_id, r.strategy, r.chosen_index, r.text);
            if let Some(b) = &r.score_breakdown {
                for (name, v) in b {
                    let shown: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
                    println!("    {name}: [{}]", shown.join(", "));
                }
            }
        }
    }
    let mut inputs: Vec<&Path> = vec![&a.candidates];
    inputs.extend(a.model.as_deref());
    inputs.extend(a.scores.as_deref());
    record(a, &inputs, &a.out, &[("select", seed)])
}

fn tune(ctx: &Ctx, a: &TuneArgs) -> Result<()> {
    let (sets, _, q) = scored(ctx, &a.candidates, &a.scores)?;
    let model = RerankerModel::load(&a.model)?;
    let grid = a.grid.as_deref().unwrap_or(&ctx.loaded.config.selection.lambda_grid);
    let cfg = LambdaConfig {
        grid: parse_grid(grid).map_err(Error::InvalidArgument)?,
        objective_metrics: Vec::new(),
        standardize_blend: ctx.loaded.config.selection.standardize_blend,
    };
    let t = tune_lambda(&sets, &q, &model, &cfg)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&t)? + "\n")
        .map_err(|e| Error::io(format!("writing {}", a.out.display()), e))?;
    record(a, &[&a.candidates, &a.scores, &a.model], &a.out, &[])?;
    println!("lambda* = {} (objective {:.6})", t.best_lambda, t.best_objective);
    Ok(())
}

fn eval_alignment(a: &AlignArgs) -> Result<()> {
    let scores = load_scores(&a.scores)?;
    let labels = load_labels(&a.labels)?;
    let reports = evaluate_alignment(&scores, &labels, a.per_set_mean)?;
    println!("{:<28} {:>8} {:>8} {:>6} {:>9}", "metric", "top1", "ranking", "sets", "excluded");
    for r in &reports {
        println!(
            "{:<28} {:>8.4} {:>8.4} {:>6} {:>9}",
            r.metric, r.top1_accuracy, r.ranking_accuracy, r.sets_used, r.sets_excluded
        );
    }
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&reports)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
        record(a, &[&a.scores, &a.labels], out, &[])?;
    }
    Ok(())
}

fn eval_pipeline(ctx: &Ctx, a: &EvalPipelineArgs) -> Result<()> {
    let tables = group_scores(load_scores(&a.scores)?)?;
    let selections: Vec<SelectionResult> = read_records(&a.selections, &["lf_id", "chosen_index", "strategy"])?;
    let mut own: Vec<crate::data::QualityTable> = match &a.candidates {
        Some(p) => {
            let sets = load_candidates(p)?;
            join_quality(&sets, &tables)?.into_iter().map(|(_, t)| t.clone()).collect()
        }
        None => tables,
    };
    let mut metrics: Vec<String> = own.first().map(|t| t.per_metric.keys().cloned().collect()).unwrap_or_default();
    crate::scoring::combine_tables(&mut own, &metrics, ctx.loaded.config.scoring.normalization)?;
    metrics.push(COMBINED_METRIC.to_string());
    let baseline = match a.baseline {
        Some(b) => Some(b),
        None => Some(ctx.loaded.config.evaluation.baseline.parse()?),
    }
    .filter(|b| selections.iter().any(|s| s.strategy == *b));
    let seed = derive_seed(ctx.seed, "bootstrap", 0);
    let reports = evaluate_pipeline(
        &selections,
        &own,
        &PipelineEvalConfig {
            metrics,
            baseline,
            resamples: a.resamples.unwrap_or(ctx.loaded.config.evaluation.resamples),
            seed,
        },
    )?;
    println!("{}", render_pipeline_table(&reports));
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&reports)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
        let mut inputs: Vec<&Path> = vec![&a.selections, &a.scores];
        inputs.extend(a.candidates.as_deref());
        record(a, &inputs, out, &[("bootstrap", seed)])?;
    }
    Ok(())
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let sets = load_candidates(&a.candidates)?;
    let tables = group_scores(load_scores(&a.scores)?)?;
    let own: Vec<crate::data::QualityTable> = join_quality(&sets, &tables)?.into_iter().map(|(_, t)| t.clone()).collect();
    let c = &ctx.loaded.config;
    let seed = derive_seed(ctx.seed, "sweep", 0);
    let cfg = SweepConfig {
        feature_config: c.features.clone(),
        train_config: c.training.train_config(derive_seed(ctx.seed, "train", 0)),
        dev_frac: c.training.dev_frac,
        test_frac: a.test_frac,
        seed,
        metrics: Vec::new(),
    };
    let cells = nbest_sweep(&sets, &own, &a.train_sizes, &a.test_sizes, &cfg)?;
    let file = std::fs::File::create(&a.out).map_err(|e| Error::io(format!("creating {}", a.out.display()), e))?;
    write_sweep_tsv(&cells, std::io::BufWriter::new(file))?;
    write_sweep_tsv(&cells, std::io::stdout().lock())?;
    record(a, &[&a.candidates, &a.scores], &a.out, &[("sweep", seed)])
}

fn annotate_cmd(a: &AnnotateArgs) -> Result<()> {
    if a.guide {
        for (i, rule) in LABELING_GUIDE.iter().enumerate() {
            println!("{}. {rule}", i + 1);
        }
        return Ok(());
    }
    let sets = load_candidates(&a.candidates)?;
    let mut store = LabelStore::open(&a.labels)?;
    let stdin = std::io::stdin();
    let summary = annotate(&sets, stdin.lock(), std::io::stderr(), &mut store)?;
    eprintln!(
        "labeled {} set(s) now, {} already done{}",
        summary.labeled_now,
        summary.skipped,
        if summary.interrupted { "; input ended early" } else { "" }
    );
    if a.labels.exists() {
        record(a, &[&a.candidates], &a.labels, &[])?;
    }
    Ok(())
}

fn map_ids(a: &MapIdsArgs) -> Result<()> {
    let table;
    let map: &IdentifierMap = match &a.table {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
            table = IdentifierMap::from_tsv(&text)?;
            &table
        }
        None => IdentifierMap::builtin(),
    };
    let mut records = load_dataset_all(&a.dataset)?;
    for r in &mut records {
        r.lf = map.apply(&r.lf);
    }
    save_dataset(&a.out, &records)?;
    let mut inputs: Vec<&Path> = vec![&a.dataset];
    inputs.extend(a.table.as_deref());
    record(a, &inputs, &a.out, &[])
}

fn mock_scorer(a: &MockScorerArgs) -> Result<()> {
    let kind: ScorerKind = serde_json::from_value(serde_json::Value::String(a.kind.clone()))
        .map_err(|_| Error::InvalidArgument(format!("unknown scorer kind `{}`", a.kind)))?;
    let scorer = CandidateLengthScorer::new(kind);
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_lines(&scorer, stdin.lock(), stdout.lock())
}
