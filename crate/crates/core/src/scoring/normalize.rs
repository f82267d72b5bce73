//! Per-metric standardization and combination into a single quality signal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::QualityTable;
use crate::error::{Error, Result};

/// Population mean and standard deviation of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
}

impl NormalizationStats {
    /// Zero variance: the metric carries no ranking information.
    pub fn is_degenerate(&self) -> bool {
        self.stddev == 0.0
    }
}

/// Population of scores a normalization is fitted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationScope {
    /// Within each candidate set (used to build training targets).
    #[default]
    PerSet,
    /// Across every candidate of every set.
    Corpus,
}

/// Deviations from the mean, computed as averaged pairwise differences.
/// Only differences between scores enter, so whenever those differences are
/// exact in floating point a shift of the input cannot change the output.
fn centered(scores: &[f64]) -> Vec<f64> {
    let n = scores.len() as f64;
    scores
        .iter()
        .map(|&xi| scores.iter().map(|&xj| xi - xj).sum::<f64>() / n)
        .collect()
}

fn population_sd(deviations: &[f64]) -> f64 {
    let n = deviations.len() as f64;
    (deviations.iter().map(|d| d * d).sum::<f64>() / n).sqrt()
}

pub fn fit_normalization(metric: &str, scores: &[f64]) -> Result<NormalizationStats> {
    if scores.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 scores to fit normalization for `{metric}`, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite score for `{metric}`"
        )));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let dev: Vec<f64> = scores.iter().map(|s| s - mean).collect();
    Ok(NormalizationStats {
        metric: metric.to_string(),
        mean,
        stddev: population_sd(&dev),
    })
}

/// `(x - mean) / stddev`; all zeros when the stats are degenerate.
pub fn apply_normalization(scores: &[f64], stats: &NormalizationStats) -> Vec<f64> {
    if stats.is_degenerate() {
        log::warn!("metric `{}` has zero variance; contributing zeros", stats.metric);
        return vec![0.0; scores.len()];
    }
    scores
        .iter()
        .map(|s| (s - stats.mean) / stats.stddev)
        .collect()
}

/// Standardize one vector to mean 0 and population standard deviation 1.
/// Returns zeros and `true` when the vector is constant or has one element.
pub fn standardize(scores: &[f64]) -> (Vec<f64>, bool) {
    if scores.len() < 2 {
        return (vec![0.0; scores.len()], true);
    }
    let dev = centered(scores);
    let sd = population_sd(&dev);
    if sd == 0.0 {
        return (vec![0.0; scores.len()], true);
    }
    (dev.into_iter().map(|d| d / sd).collect(), false)
}

/// Sum of the standardized vectors of `names`, in the order given.
pub fn combine_metrics(tables: &BTreeMap<String, Vec<f64>>, names: &[String]) -> Result<Vec<f64>> {
    let first = names
        .first()
        .ok_or_else(|| Error::InvalidArgument("no metrics to combine".into()))?;
    let n = tables
        .get(first)
        .ok_or_else(|| Error::InvalidArgument(format!("metric `{first}` missing")))?
        .len();
    let mut combined = vec![0.0; n];
    for name in names {
        let v = tables
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("metric `{name}` missing")))?;
        if v.len() != n {
            return Err(Error::InvalidArgument(format!(
                "metric `{name}` has {} scores, expected {n}",
                v.len()
            )));
        }
        let (z, degenerate) = standardize(v);
        if degenerate && n > 1 {
            log::debug!("metric `{name}` is constant within a set; contributing zeros");
        }
        for (c, zi) in combined.iter_mut().zip(z) {
            *c += zi;
        }
    }
    Ok(combined)
}

/// Fill `combined` on every table from `names`, normalized over `scope`.
pub fn combine_tables(
    tables: &mut [QualityTable],
    names: &[String],
    scope: NormalizationScope,
) -> Result<()> {
    match scope {
        NormalizationScope::PerSet => {
            for t in tables.iter_mut() {
                let combined = combine_metrics(&t.per_metric, names).map_err(|e| {
                    Error::InvalidArgument(format!("set `{}`: {e}", t.lf_id))
                })?;
                t.combined = Some(combined);
            }
        }
        NormalizationScope::Corpus => {
            let mut stats = Vec::with_capacity(names.len());
            for name in names {
                let mut all = Vec::new();
                for t in tables.iter() {
                    all.extend_from_slice(t.metric(name)?);
                }
                stats.push(fit_normalization(name, &all)?);
            }
            for t in tables.iter_mut() {
                let n = t.metric(&names[0])?.len();
                let mut combined = vec![0.0; n];
                for (name, st) in names.iter().zip(&stats) {
                    let v = t.metric(name)?;
                    if v.len() != n {
                        return Err(Error::InvalidArgument(format!(
                            "set `{}`: metric `{name}` has {} scores, expected {n}",
                            t.lf_id,
                            v.len()
                        )));
                    }
                    for (c, z) in combined.iter_mut().zip(apply_normalization(v, st)) {
                        *c += z;
                    }
                }
                t.combined = Some(combined);
            }
        }
    }
    Ok(())
}
