//! Train-size by test-size grid over n-best list sizes.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CandidateSet, QualityTable};
use crate::error::{Error, Result};
use crate::reranker::{prepare_sets, split_dev, train, FeatureConfig, RerankerModel, TrainConfig};
use crate::scoring::combine_metrics;
use crate::util::{argmax_first, derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub feature_config: FeatureConfig,
    pub train_config: TrainConfig,
    pub dev_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    /// Metrics combined into the quality signal; empty means all metrics of
    /// the first table.
    pub metrics: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            feature_config: FeatureConfig::default(),
            train_config: TrainConfig::default(),
            dev_frac: 0.1,
            test_frac: 0.2,
            seed: 0,
            metrics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub train_size: usize,
    pub test_size: usize,
    /// Mean combined quality of the reranker's picks on the test split. The
    /// combination is normalized over each full candidate set so cells are
    /// comparable.
    pub quality: f64,
    pub metric_means: BTreeMap<String, f64>,
    pub epochs_run: usize,
}

fn subsample(n: usize, k: usize, seed: u64, lf_id: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(derive_seed(seed, lf_id, k as u64)));
    let mut pick = idx[..k].to_vec();
    pick.sort_unstable();
    pick
}

struct Item<'a> {
    set: &'a CandidateSet,
    table: &'a QualityTable,
    full_quality: Vec<f64>,
}

fn as_pairs(v: &[(CandidateSet, Vec<f64>)]) -> Vec<(&CandidateSet, &[f64])> {
    v.iter().map(|(s, q)| (s, q.as_slice())).collect()
}

fn train_for_size(items: &[&Item<'_>], dev: &[&Item<'_>], size: usize, cfg: &SweepConfig, metrics: &[String]) -> Result<RerankerModel> {
    let shrink = |group: &[&Item<'_>]| -> Result<Vec<(CandidateSet, Vec<f64>)>> {
        group
            .iter()
            .map(|it| {
                let pick = subsample(it.set.len(), size, cfg.seed, it.set.lf_id());
                let q = combine_metrics(&it.table.subset(&pick).per_metric, metrics)?;
                Ok((it.set.subset(&pick)?, q))
            })
            .collect()
    };
    let tr = shrink(items)?;
    let dv = shrink(dev)?;
    let tr = prepare_sets(&as_pairs(&tr), &cfg.feature_config)?;
    let dv = prepare_sets(&as_pairs(&dv), &cfg.feature_config)?;
    let mut tc = cfg.train_config.clone();
    tc.seed = derive_seed(cfg.seed, "sweep-train", size as u64);
    train(&tr, &dv, cfg.feature_config.clone(), &tc)
}

/// For every train size, fit a reranker on subsampled sets; evaluate it on
/// test sets subsampled to every test size. Cells come back ordered by
/// (train_size, test_size) as given.
pub fn nbest_sweep(
    sets: &[CandidateSet],
    tables: &[QualityTable],
    train_sizes: &[usize],
    test_sizes: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<SweepCell>> {
    if sets.len() != tables.len() {
        return Err(Error::InvalidArgument(format!("{} sets but {} quality tables", sets.len(), tables.len())));
    }
    if train_sizes.is_empty() || test_sizes.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one train and one test size".into()));
    }
    if let Some(s) = train_sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidArgument(format!("train size {s} is below 2")));
    }
    if let Some(s) = test_sizes.iter().find(|&&s| s < 1) {
        return Err(Error::InvalidArgument(format!("test size {s} is below 1")));
    }
    let metrics: Vec<String> = if cfg.metrics.is_empty() {
        tables
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty corpus".into()))?
            .per_metric
            .keys()
            .cloned()
            .collect()
    } else {
        cfg.metrics.clone()
    };
    let items: Vec<Item<'_>> = sets
        .iter()
        .zip(tables)
        .map(|(set, table)| {
            table.check_against(set)?;
            Ok(Item { set, table, full_quality: combine_metrics(&table.per_metric, &metrics)? })
        })
        .collect::<Result<_>>()?;

    let (rest, test) = split_dev(items.len(), cfg.test_frac, derive_seed(cfg.seed, "sweep-test", 0))?;
    let (tr_idx, dev_idx) = split_dev(rest.len(), cfg.dev_frac, derive_seed(cfg.seed, "sweep-dev", 0))?;
    let train_items: Vec<&Item<'_>> = tr_idx.iter().map(|&i| &items[rest[i]]).collect();
    let dev_items: Vec<&Item<'_>> = dev_idx.iter().map(|&i| &items[rest[i]]).collect();
    let test_items: Vec<&Item<'_>> = test.iter().map(|&i| &items[i]).collect();

    let max_train = *train_sizes.iter().max().unwrap();
    if let Some(it) = train_items.iter().chain(&dev_items).find(|it| it.set.len() < max_train) {
        return Err(Error::InvalidArgument(format!(
            "set `{}` has {} candidates; train size {max_train} is not available",
            it.set.lf_id(),
            it.set.len()
        )));
    }
    let max_test = *test_sizes.iter().max().unwrap();
    if let Some(it) = test_items.iter().find(|it| it.set.len() < max_test) {
        return Err(Error::InvalidArgument(format!(
            "set `{}` has {} candidates; test size {max_test} is not available",
            it.set.lf_id(),
            it.set.len()
        )));
    }

    let rows: Vec<Vec<SweepCell>> = train_sizes
        .par_iter()
        .map(|&train_size| {
            let model = train_for_size(&train_items, &dev_items, train_size, cfg, &metrics)?;
            test_sizes
                .iter()
                .map(|&test_size| {
                    let mut quality = 0.0;
                    let mut sums: BTreeMap<String, f64> = metrics.iter().map(|m| (m.clone(), 0.0)).collect();
                    for it in &test_items {
                        let pick = subsample(it.set.len(), test_size, cfg.seed ^ 0x7e57, it.set.lf_id());
                        let scores = pick
                            .iter()
                            .map(|&i| model.score(it.set.lf(), &it.set.candidates()[i].text))
                            .collect::<Result<Vec<_>>>()?;
                        let chosen = pick[argmax_first(&scores).expect("non-empty")];
                        quality += it.full_quality[chosen];
                        for (m, s) in sums.iter_mut() {
                            *s += it.table.metric(m)?[chosen];
                        }
                    }
                    let n = test_items.len() as f64;
                    Ok(SweepCell {
                        train_size,
                        test_size,
                        quality: quality / n,
                        metric_means: sums.into_iter().map(|(m, s)| (m, s / n)).collect(),
                        epochs_run: model.train_meta.epochs_run,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Tab-separated grid, one row per cell, for plotting.
pub fn write_sweep_tsv<W: Write>(cells: &[SweepCell], mut out: W) -> Result<()> {
    let metrics: Vec<&String> = cells.first().map(|c| c.metric_means.keys().collect()).unwrap_or_default();
    let mut header = String::from("train_size\ttest_size\tquality");
    for m in &metrics {
        header.push('\t');
        header.push_str(m);
    }
    let io = |e| Error::io("writing sweep grid", e);
    writeln!(out, "{header}").map_err(io)?;
    for c in cells {
        let mut line = format!("{}\t{}\t{}", c.train_size, c.test_size, c.quality);
        for m in &metrics {
            line.push('\t');
            line.push_str(&c.metric_means[*m].to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}
