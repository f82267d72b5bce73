//! Agreement between metric scores and binary human labels, plus graded
//! counterparts for continuous gold qualities.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, MetricScores};
use crate::error::{Error, Result};
use crate::scoring::standardize;
use crate::util::argmax_first;

/// Scores and 0/1 labels for one candidate set.
#[derive(Debug, Clone, Copy)]
pub struct ScoredSet<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [u8],
}

impl<'a> ScoredSet<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [u8]) -> Self {
        ScoredSet { scores, labels }
    }

    fn single_class(&self) -> bool {
        self.labels.iter().all(|&l| l == 1) || self.labels.iter().all(|&l| l == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub sets_used: usize,
    pub sets_excluded: usize,
}

fn check(sets: &[ScoredSet<'_>]) -> Result<()> {
    for (k, s) in sets.iter().enumerate() {
        if s.scores.len() != s.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "set {k}: {} scores for {} labels",
                s.scores.len(),
                s.labels.len()
            )));
        }
        if s.labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument(format!("set {k}: labels must be 0 or 1")));
        }
        if s.scores.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument(format!("set {k}: NaN score")));
        }
    }
    Ok(())
}

/// Fraction of mixed-label sets whose top-scored candidate is labeled 1.
/// When several candidates share the top score the set counts as a hit only
/// if all of them are labeled 1. Single-class sets are skipped.
pub fn top1_accuracy(sets: &[ScoredSet<'_>]) -> Result<Accuracy> {
    check(sets)?;
    let (mut hits, mut used, mut excluded) = (0usize, 0usize, 0usize);
    for s in sets {
        if s.labels.is_empty() || s.single_class() {
            excluded += 1;
            continue;
        }
        used += 1;
        let top = s.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let all_correct = s
            .scores
            .iter()
            .zip(s.labels)
            .filter(|(x, _)| **x == top)
            .all(|(_, &l)| l == 1);
        if all_correct {
            hits += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument("every set is single-class; top-1 accuracy is undefined".into()));
    }
    Ok(Accuracy {
        value: hits as f64 / used as f64,
        numerator: hits as f64,
        denominator: used as f64,
        sets_used: used,
        sets_excluded: excluded,
    })
}

/// Fraction of (correct, incorrect) pairs in which the correct candidate
/// scores higher; ties count one half. Pairs are pooled over sets unless
/// `per_set_mean`, which averages each set's fraction instead.
pub fn ranking_accuracy(sets: &[ScoredSet<'_>], per_set_mean: bool) -> Result<Accuracy> {
    check(sets)?;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut mean_sum, mut used, mut excluded) = (0.0, 0usize, 0usize);
    for s in sets {
        if s.labels.is_empty() || s.single_class() {
            excluded += 1;
            continue;
        }
        used += 1;
        let (mut good, mut pairs) = (0.0, 0.0);
        for (i, &li) in s.labels.iter().enumerate() {
            if li != 1 {
                continue;
            }
            for (j, &lj) in s.labels.iter().enumerate() {
                if lj != 0 {
                    continue;
                }
                pairs += 1.0;
                if s.scores[i] > s.scores[j] {
                    good += 1.0;
                } else if s.scores[i] == s.scores[j] {
                    good += 0.5;
                }
            }
        }
        num += good;
        den += pairs;
        mean_sum += good / pairs;
    }
    if used == 0 {
        return Err(Error::InvalidArgument("no set mixes correct and incorrect candidates".into()));
    }
    let value = if per_set_mean { mean_sum / used as f64 } else { num / den };
    Ok(Accuracy { value, numerator: num, denominator: den, sets_used: used, sets_excluded: excluded })
}

/// Pooled fraction of pairs with distinct gold quality that `pred` orders
/// the same way; prediction ties count one half.
pub fn pairwise_agreement(sets: &[(&[f64], &[f64])]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (pred, gold) in sets {
        if pred.len() != gold.len() {
            return Err(Error::InvalidArgument(format!("{} predictions for {} gold scores", pred.len(), gold.len())));
        }
        for i in 0..gold.len() {
            for j in 0..gold.len() {
                if gold[i] > gold[j] {
                    den += 1.0;
                    if pred[i] > pred[j] {
                        num += 1.0;
                    } else if pred[i] == pred[j] {
                        num += 0.5;
                    }
                }
            }
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("no pair with distinct gold quality".into()));
    }
    Ok(num / den)
}

/// Fraction of sets where the top prediction (first index on ties) has the
/// maximum gold quality.
pub fn top1_agreement(sets: &[(&[f64], &[f64])]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("no sets".into()));
    }
    let mut hits = 0usize;
    for (pred, gold) in sets {
        if pred.len() != gold.len() || pred.is_empty() {
            return Err(Error::InvalidArgument(format!("{} predictions for {} gold scores", pred.len(), gold.len())));
        }
        let best = gold.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if gold[argmax_first(pred).expect("non-empty")] == best {
            hits += 1;
        }
    }
    Ok(hits as f64 / sets.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub metric: String,
    pub top1_accuracy: f64,
    pub ranking_accuracy: f64,
    pub sets_used: usize,
    pub sets_excluded: usize,
}

pub fn alignment_report(metric: &str, sets: &[ScoredSet<'_>], per_set_mean: bool) -> Result<AlignmentReport> {
    let top1 = top1_accuracy(sets)?;
    let rank = ranking_accuracy(sets, per_set_mean)?;
    Ok(AlignmentReport {
        metric: metric.to_string(),
        top1_accuracy: top1.value,
        ranking_accuracy: rank.value,
        sets_used: top1.sets_used,
        sets_excluded: top1.sets_excluded,
    })
}

/// Alignment of every metric in `scores` with `labels`, joined by LF id,
/// followed by the combination of all metrics when there is more than one.
/// Label sets without scores are an error; scores without labels are ignored.
pub fn evaluate_alignment(
    scores: &[MetricScores],
    labels: &[LabeledSet],
    per_set_mean: bool,
) -> Result<Vec<AlignmentReport>> {
    let mut by_metric: BTreeMap<&str, HashMap<&str, &[f64]>> = BTreeMap::new();
    for s in scores {
        by_metric.entry(&s.metric).or_default().insert(&s.lf_id, &s.scores);
    }
    if by_metric.is_empty() {
        return Err(Error::InvalidArgument("no scores to evaluate".into()));
    }
    let mut reports = Vec::new();
    let mut combined: Vec<Vec<f64>> = labels.iter().map(|l| vec![0.0; l.labels.len()]).collect();
    for (metric, table) in &by_metric {
        let mut rows = Vec::with_capacity(labels.len());
        for (k, l) in labels.iter().enumerate() {
            let s = table.get(l.lf_id.as_str()).ok_or_else(|| {
                Error::InvalidArgument(format!("labeled set `{}` has no `{metric}` scores", l.lf_id))
            })?;
            if s.len() != l.labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "set `{}`: {} `{metric}` scores for {} labels",
                    l.lf_id,
                    s.len(),
                    l.labels.len()
                )));
            }
            for (c, z) in combined[k].iter_mut().zip(standardize(s).0) {
                *c += z;
            }
            rows.push(ScoredSet::new(s, &l.labels));
        }
        reports.push(alignment_report(metric, &rows, per_set_mean)?);
    }
    if by_metric.len() > 1 {
        let rows: Vec<ScoredSet<'_>> = combined
            .iter()
            .zip(labels)
            .map(|(c, l)| ScoredSet::new(c, &l.labels))
            .collect();
        let name = by_metric.keys().copied().collect::<Vec<_>>().join("+");
        reports.push(alignment_report(&name, &rows, per_set_mean)?);
    }
    Ok(reports)
}
