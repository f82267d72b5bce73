//! Stage helpers shared by the subcommands, and the end-to-end run.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{GeneratorSection, LoadedConfig};
use super::manifest::{FileDigest, RunManifest, StageRecord};
use crate::data::io::{join_quality, load_dataset_all, load_quality, read_records, write_records};
use crate::data::{load_candidates, save_candidates, save_scores, CandidateSet, IdentifierMap, LogicalForm, MetricScores, QualityTable, Split};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_pipeline, PipelineEvalConfig, PipelineReport, COMBINED_METRIC};
use crate::genclient::{CandidateGenerator, Endpoint, GenerationOutcome, Generator, GeneratorConfig, HttpGenerator, MockGenerator, PromptTemplate};
use crate::reranker::{prepare_sets, split_dev, train, FeatureConfig, RerankerModel, TrainConfig};
use crate::scoring::{combine_tables, score_sets, MetricChoice, NormalizationScope, Scorer};
use crate::selection::{select_all, tune_lambda, LambdaConfig, LambdaTuning, SelectionContext, SelectionResult, Strategy};
use crate::util::{derive_seed, parse_grid};

pub fn build_client(g: &GeneratorSection, seed: u64) -> Result<Box<dyn Generator>> {
    match g.mode.as_str() {
        "mock" => Ok(Box::new(MockGenerator::new(seed))),
        "http" => {
            let endpoint = g
                .endpoint
                .clone()
                .ok_or_else(|| Error::InvalidArgument("http generator needs an endpoint".into()))?;
            let token = std::env::var(&g.api_token_env).ok();
            if token.is_none() {
                log::warn!("{} is not set; calling the generator without a token", g.api_token_env);
            }
            Ok(Box::new(
                HttpGenerator::new(endpoint)
                    .with_token(token)
                    .with_timeout(Duration::from_secs(g.timeout_secs))
                    .splitting_numbered_lists(g.prompt_style == "instruction"),
            ))
        }
        other => Err(Error::InvalidArgument(format!("unknown generator mode `{other}`"))),
    }
}

pub fn prompt_template(g: &GeneratorSection) -> PromptTemplate {
    let t = if g.prompt_style == "instruction" {
        PromptTemplate::instruction(&g.dataset_name, g.target_n)
    } else {
        PromptTemplate::completion(&g.dataset_name)
    };
    t.with_exemplars(g.num_exemplars)
}

pub fn generator_config(g: &GeneratorSection, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        endpoint: match g.mode.as_str() {
            "http" => Endpoint::Url(g.endpoint.clone().unwrap_or_default()),
            _ => Endpoint::Mock,
        },
        temperature: g.temperature,
        max_attempts: g.max_attempts,
        target_n: g.target_n,
        seed,
        max_tokens: g.max_tokens,
        redraw_exemplars: g.redraw_exemplars,
    }
}

pub fn apply_id_map(records: &mut [LogicalForm]) {
    let map = IdentifierMap::builtin();
    for r in records {
        r.lf = map.apply(&r.lf);
    }
}

/// Run every scorer over `sets`, returning score lines grouped per scorer.
pub fn score_with(
    sets: &[CandidateSet],
    metrics: &[MetricChoice],
    batch_size: usize,
    timeout: Duration,
) -> Result<Vec<MetricScores>> {
    let mut out = Vec::new();
    for m in metrics {
        let scorer: Box<dyn Scorer> = m.open(timeout)?;
        log::info!("scoring {} sets with `{}`", sets.len(), scorer.name());
        out.extend(score_sets(sets, &scorer, batch_size)?);
    }
    Ok(out)
}

/// Combined quality per set, aligned with `sets`.
pub fn quality_vectors(
    sets: &[CandidateSet],
    tables: &[QualityTable],
    metrics: &[String],
    scope: NormalizationScope,
) -> Result<Vec<Vec<f64>>> {
    let joined = join_quality(sets, tables)?;
    let mut own: Vec<QualityTable> = joined.iter().map(|(_, t)| (*t).clone()).collect();
    let names: Vec<String> = if metrics.is_empty() {
        own.first().map(|t| t.per_metric.keys().cloned().collect()).unwrap_or_default()
    } else {
        metrics.to_vec()
    };
    if own.is_empty() {
        return Ok(Vec::new());
    }
    combine_tables(&mut own, &names, scope)?;
    Ok(own.into_iter().map(|t| t.combined.expect("combined just set")).collect())
}

pub struct TrainInputs<'a> {
    pub train: Vec<(&'a CandidateSet, &'a [f64])>,
    pub dev: Vec<(&'a CandidateSet, &'a [f64])>,
}

/// Keep sets usable for training (two or more candidates).
pub fn trainable<'a>(sets: &'a [CandidateSet], q: &'a [Vec<f64>]) -> Vec<(&'a CandidateSet, &'a [f64])> {
    let all: Vec<_> = sets.iter().zip(q).filter(|(s, _)| s.len() >= 2).map(|(s, q)| (s, q.as_slice())).collect();
    let skipped = sets.len() - all.len();
    if skipped > 0 {
        log::info!("skipping {skipped} single-candidate set(s) for training");
    }
    all
}

/// Split `pairs` into train and dev with a seeded fraction.
pub fn carve_dev<'a>(pairs: Vec<(&'a CandidateSet, &'a [f64])>, dev_frac: f64, seed: u64) -> Result<TrainInputs<'a>> {
    let (tr, dv) = split_dev(pairs.len(), dev_frac, seed)?;
    Ok(TrainInputs {
        train: tr.iter().map(|&i| pairs[i]).collect(),
        dev: dv.iter().map(|&i| pairs[i]).collect(),
    })
}

pub fn fit(inputs: &TrainInputs<'_>, features: &FeatureConfig, cfg: &TrainConfig) -> Result<RerankerModel> {
    let tr = prepare_sets(&inputs.train, features)?;
    let dv = prepare_sets(&inputs.dev, features)?;
    log::info!("training on {} sets, early stopping on {}", tr.len(), dv.len());
    train(&tr, &dv, features.clone(), cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub lambda: LambdaTuning,
    pub reports: Vec<PipelineReport>,
}

pub struct PipelineOptions {
    pub resume: bool,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

pub struct PipelineSummary {
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub selections: PathBuf,
    pub output: PipelineOutput,
    pub stages: Vec<StageRecord>,
}

struct Stages<'a> {
    resume: bool,
    records: &'a mut Vec<StageRecord>,
}

impl Stages<'_> {
    /// Produce `outputs` with `run` unless resuming and they all exist.
    fn run(&mut self, name: &str, outputs: &[&Path], run: impl FnOnce() -> Result<()>) -> Result<()> {
        let reuse = self.resume && outputs.iter().all(|p| p.exists());
        if reuse {
            log::info!("stage {name}: reusing existing artifacts");
        } else {
            log::info!("stage {name}: running");
            run()?;
        }
        self.records.push(StageRecord {
            name: name.to_string(),
            status: if reuse { "reused" } else { "ran" }.to_string(),
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        });
        Ok(())
    }
}

fn by_split(sets: &[CandidateSet], split_of: &std::collections::HashMap<&str, Split>, split: Split) -> Vec<CandidateSet> {
    sets.iter().filter(|s| split_of.get(s.lf_id()) == Some(&split)).cloned().collect()
}

/// generate -> score -> train -> select -> evaluate, all artifacts under the
/// configured output directory.
pub fn run_pipeline(loaded: &LoadedConfig, opts: &PipelineOptions) -> Result<PipelineSummary> {
    let cfg = &loaded.config;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let workers = opts.workers.unwrap_or(cfg.workers).max(1);
    let out_dir = loaded.out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let dataset_path = loaded.resolve(&cfg.data.dataset);
    let mut records = load_dataset_all(&dataset_path)?;
    if cfg.data.map_freebase_ids {
        apply_id_map(&mut records);
    }
    if let Some(r) = records.iter().find(|r| r.reference.is_none()) {
        return Err(Error::MissingReference(format!("record `{}` has no reference; the pipeline scores against references", r.id)));
    }
    let split_of: std::collections::HashMap<&str, Split> = records.iter().map(|r| (r.id.as_str(), r.split)).collect();
    let train_lfs: Vec<LogicalForm> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    if train_lfs.is_empty() {
        return Err(Error::InvalidArgument("dataset has no train split".into()));
    }

    let metrics: Vec<MetricChoice> = cfg.scoring.metrics.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let strategies: Vec<Strategy> = cfg.selection.strategies.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let baseline: Strategy = cfg.evaluation.baseline.parse()?;
    let grid = parse_grid(&cfg.selection.lambda_grid).map_err(Error::InvalidArgument)?;

    let seeds = [
        ("generate", derive_seed(seed, "generate", 0)),
        ("train", derive_seed(seed, "train", 0)),
        ("dev-split", derive_seed(seed, "dev-split", 0)),
        ("select", derive_seed(seed, "select", 0)),
        ("bootstrap", derive_seed(seed, "bootstrap", 0)),
    ];
    let seed_of = |name: &str| seeds.iter().find(|s| s.0 == name).unwrap().1;

    let candidates_path = out_dir.join("candidates.jsonl");
    let scores_path = out_dir.join("scores.jsonl");
    let model_path = out_dir.join("model.json");
    let lambda_path = out_dir.join("lambda.json");
    let selections_path = out_dir.join("selections.jsonl");
    let report_path = out_dir.join("report.json");

    let mut manifest = RunManifest::start(serde_json::to_value(&loaded.raw)?);
    manifest.seeds.insert("run".into(), seed);
    for (k, v) in seeds {
        manifest.seeds.insert(k.into(), v);
    }
    manifest.input(&dataset_path)?;
    let mut records_log = Vec::new();
    let mut stages = Stages { resume: opts.resume, records: &mut records_log };

    stages.run("generate", &[&candidates_path], || {
        let client = build_client(&cfg.generator, seed_of("generate"))?;
        let gen = CandidateGenerator::new(
            &*client,
            prompt_template(&cfg.generator),
            &train_lfs,
            generator_config(&cfg.generator, seed_of("generate")),
        )
        .with_workers(workers);
        let outcomes = gen.generate_all(&records)?;
        let truncated = outcomes.iter().filter(|o| o.truncated).count();
        if truncated > 0 {
            log::warn!("{truncated} set(s) stopped short of {} unique candidates", cfg.generator.target_n);
        }
        let sets: Vec<CandidateSet> = outcomes.into_iter().map(|o: GenerationOutcome| o.set).collect();
        save_candidates(&sets, &candidates_path)
    })?;
    let sets = load_candidates(&candidates_path)?;

    stages.run("score", &[&scores_path], || {
        let lines = score_with(
            &sets,
            &metrics,
            cfg.scoring.batch_size,
            Duration::from_secs(cfg.scoring.timeout_secs),
        )?;
        save_scores(&lines, &scores_path)
    })?;
    let tables = load_quality(&scores_path)?;
    let metric_names: Vec<String> = tables.first().map(|t| t.per_metric.keys().cloned().collect()).unwrap_or_default();

    let train_sets = by_split(&sets, &split_of, Split::Train);
    let dev_sets = by_split(&sets, &split_of, Split::Dev);
    let test_sets = by_split(&sets, &split_of, Split::Test);
    let q_train = quality_vectors(&train_sets, &tables, &metric_names, cfg.scoring.normalization)?;
    let q_dev = quality_vectors(&dev_sets, &tables, &metric_names, cfg.scoring.normalization)?;

    stages.run("train", &[&model_path], || {
        let train_pairs = trainable(&train_sets, &q_train);
        let dev_pairs = trainable(&dev_sets, &q_dev);
        let inputs = if dev_pairs.is_empty() {
            carve_dev(train_pairs, cfg.training.dev_frac, seed_of("dev-split"))?
        } else {
            TrainInputs { train: train_pairs, dev: dev_pairs }
        };
        let model = fit(&inputs, &cfg.features, &cfg.training.train_config(seed_of("train")))?;
        model.save(&model_path)
    })?;
    let model = RerankerModel::load(&model_path)?;

    // lambda is tuned on the dev split, or on the training sets when there is none
    let (tune_sets, tune_q) = if dev_sets.is_empty() { (&train_sets, &q_train) } else { (&dev_sets, &q_dev) };
    let (eval_sets, eval_label) = if test_sets.is_empty() { (&dev_sets, "dev") } else { (&test_sets, "test") };
    if eval_sets.is_empty() {
        return Err(Error::InvalidArgument("dataset has neither a test nor a dev split to evaluate on".into()));
    }
    let q_eval = quality_vectors(eval_sets, &tables, &metric_names, cfg.scoring.normalization)?;

    stages.run("select", &[&lambda_path, &selections_path], || {
        let lcfg = LambdaConfig {
            grid: grid.clone(),
            objective_metrics: metric_names.clone(),
            standardize_blend: cfg.selection.standardize_blend,
        };
        let tuning = tune_lambda(tune_sets, tune_q, &model, &lcfg)?;
        log::info!("lambda* = {} (dev objective {:.4})", tuning.best_lambda, tuning.best_objective);
        std::fs::write(&lambda_path, serde_json::to_string_pretty(&tuning)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", lambda_path.display()), e))?;
        let ctx = SelectionContext {
            model: Some(&model),
            lambda: Some(tuning.best_lambda),
            quality: Some(&q_eval),
            seed: seed_of("select"),
            standardize_blend: cfg.selection.standardize_blend,
        };
        let mut all = Vec::new();
        for s in &strategies {
            all.extend(select_all(eval_sets, *s, &ctx)?);
        }
        write_records(&selections_path, &all)
    })?;
    let lambda: LambdaTuning = serde_json::from_str(
        &std::fs::read_to_string(&lambda_path).map_err(|e| Error::io(format!("reading {}", lambda_path.display()), e))?,
    )?;
    let selections: Vec<SelectionResult> = read_records(&selections_path, &["lf_id", "chosen_index", "strategy"])?;

    let mut eval_tables: Vec<QualityTable> = join_quality(eval_sets, &tables)?.into_iter().map(|(_, t)| t.clone()).collect();
    combine_tables(&mut eval_tables, &metric_names, cfg.scoring.normalization)?;
    let mut eval_metrics = metric_names.clone();
    eval_metrics.push(COMBINED_METRIC.to_string());
    let base = strategies.contains(&baseline).then_some(baseline);
    let reports = evaluate_pipeline(
        &selections,
        &eval_tables,
        &PipelineEvalConfig {
            metrics: eval_metrics,
            baseline: base,
            resamples: cfg.evaluation.resamples,
            seed: seed_of("bootstrap"),
        },
    )?;
    let output = PipelineOutput { lambda, reports };
    std::fs::write(&report_path, serde_json::to_string_pretty(&output)? + "\n")
        .map_err(|e| Error::io(format!("writing {}", report_path.display()), e))?;
    stages.records.push(StageRecord {
        name: "evaluate".into(),
        status: "ran".into(),
        outputs: vec![FileDigest::of(&report_path)?],
    });
    log::info!("evaluated {} {eval_label} sets", eval_sets.len());

    for p in [&candidates_path, &scores_path, &model_path, &lambda_path, &selections_path, &report_path] {
        manifest.output(p)?;
    }
    manifest.stages = records_log;
    manifest.finish();
    let manifest_path = out_dir.join("run_manifest.json");
    manifest.write(&manifest_path)?;
    Ok(PipelineSummary {
        out_dir,
        manifest: manifest_path,
        selections: selections_path,
        stages: manifest.stages.clone(),
        output,
    })
}
