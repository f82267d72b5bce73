//! Picking one candidate per set.
//!
//! Argmax strategies break ties toward the first index. Random choices
//! (the random baseline and self-consistency ties) draw from a stream keyed
//! by the run seed and the set id, so results do not depend on set order or
//! worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CandidateSet;
use crate::error::{Error, Result};
use crate::reranker::RerankerModel;
use crate::scoring::standardize;
use crate::util::{argmax_first, derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    SelfConsistency,
    Generator,
    Reranker,
    Combined,
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Random,
        Strategy::SelfConsistency,
        Strategy::Generator,
        Strategy::Reranker,
        Strategy::Combined,
        Strategy::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::SelfConsistency => "self-consistency",
            Strategy::Generator => "generator",
            Strategy::Reranker => "reranker",
            Strategy::Combined => "combined",
            Strategy::Oracle => "oracle",
        }
    }

    pub fn allowed() -> String {
        Strategy::ALL.map(Strategy::as_str).join(", ")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}` (allowed: {})", Strategy::allowed())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub lf_id: String,
    pub chosen_index: usize,
    pub strategy: Strategy,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_breakdown: Option<BTreeMap<String, Vec<f64>>>,
}

impl SelectionResult {
    fn new(set: &CandidateSet, index: usize, strategy: Strategy) -> Self {
        SelectionResult {
            lf_id: set.lf_id().to_string(),
            chosen_index: index,
            strategy,
            text: set.candidates()[index].text.clone(),
            score_breakdown: None,
        }
    }

    fn with_scores(mut self, name: &str, scores: Vec<f64>) -> Self {
        self.score_breakdown
            .get_or_insert_with(BTreeMap::new)
            .insert(name.to_string(), scores);
        self
    }
}

fn nonempty(set: &CandidateSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("set `{}` is empty", set.lf_id())));
    }
    Ok(())
}

pub fn select_random<R: Rng>(set: &CandidateSet, rng: &mut R) -> Result<SelectionResult> {
    nonempty(set)?;
    Ok(SelectionResult::new(set, rng.gen_range(0..set.len()), Strategy::Random))
}

/// Most frequently sampled candidate; ties are broken uniformly at random.
pub fn select_self_consistency<R: Rng>(set: &CandidateSet, rng: &mut R) -> Result<SelectionResult> {
    nonempty(set)?;
    let counts: Vec<u32> = set.candidates().iter().map(|c| c.raw_count).collect();
    let top = *counts.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] == top).collect();
    let index = tied[rng.gen_range(0..tied.len())];
    Ok(SelectionResult::new(set, index, Strategy::SelfConsistency)
        .with_scores("raw_count", counts.iter().map(|&c| f64::from(c)).collect()))
}

pub fn generator_scores(set: &CandidateSet) -> Result<Vec<f64>> {
    set.candidates()
        .iter()
        .map(|c| {
            c.gen_logprob.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "set `{}`: candidate `{}` has no generator log-probability",
                    set.lf_id(),
                    c.text
                ))
            })
        })
        .collect()
}

pub fn select_generator(set: &CandidateSet) -> Result<SelectionResult> {
    nonempty(set)?;
    let g = generator_scores(set)?;
    let index = argmax_first(&g).expect("non-empty");
    Ok(SelectionResult::new(set, index, Strategy::Generator).with_scores("generator", g))
}

pub fn reranker_scores(set: &CandidateSet, model: &RerankerModel) -> Result<Vec<f64>> {
    model.score_all(set.lf(), set.texts())
}

pub fn select_reranker(set: &CandidateSet, model: &RerankerModel) -> Result<SelectionResult> {
    nonempty(set)?;
    let r = reranker_scores(set, model)?;
    let index = argmax_first(&r).expect("non-empty");
    Ok(SelectionResult::new(set, index, Strategy::Reranker).with_scores("reranker", r))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must be in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// `lambda * R + (1 - lambda) * G`, optionally after standardizing R and G
/// within the set.
pub fn blend(r: &[f64], g: &[f64], lambda: f64, standardize_first: bool) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if r.len() != g.len() {
        return Err(Error::InvalidArgument(format!("{} reranker scores vs {} generator scores", r.len(), g.len())));
    }
    let (r, g) = if standardize_first {
        (standardize(r).0, standardize(g).0)
    } else {
        (r.to_vec(), g.to_vec())
    };
    // exact endpoints, so lambda 0 and 1 reproduce the single-score strategies
    Ok(if lambda == 1.0 {
        r
    } else if lambda == 0.0 {
        g
    } else {
        r.iter().zip(&g).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect()
    })
}

pub fn select_combined(
    set: &CandidateSet,
    model: &RerankerModel,
    lambda: f64,
    standardize_first: bool,
) -> Result<SelectionResult> {
    check_lambda(lambda)?;
    nonempty(set)?;
    let r = reranker_scores(set, model)?;
    let g = generator_scores(set)?;
    let blended = blend(&r, &g, lambda, standardize_first)?;
    let index = argmax_first(&blended).expect("non-empty");
    Ok(SelectionResult::new(set, index, Strategy::Combined)
        .with_scores("reranker", r)
        .with_scores("generator", g)
        .with_scores("combined", blended))
}

pub fn select_oracle(set: &CandidateSet, quality: &[f64]) -> Result<SelectionResult> {
    nonempty(set)?;
    if quality.len() != set.len() {
        return Err(Error::InvalidArgument(format!(
            "set `{}` has {} candidates but {} quality scores",
            set.lf_id(),
            set.len(),
            quality.len()
        )));
    }
    let index = argmax_first(quality).expect("non-empty");
    Ok(SelectionResult::new(set, index, Strategy::Oracle).with_scores("quality", quality.to_vec()))
}

/// Inputs a corpus-level selection may need, depending on the strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelectionContext<'a> {
    pub model: Option<&'a RerankerModel>,
    pub lambda: Option<f64>,
    /// Combined quality per set, aligned with the sets.
    pub quality: Option<&'a [Vec<f64>]>,
    pub seed: u64,
    pub standardize_blend: bool,
}

impl<'a> SelectionContext<'a> {
    fn model(&self, s: Strategy) -> Result<&'a RerankerModel> {
        self.model
            .ok_or_else(|| Error::InvalidArgument(format!("strategy `{s}` needs a reranker model")))
    }
}

/// Apply `strategy` to every set, in parallel, preserving order.
pub fn select_all(sets: &[CandidateSet], strategy: Strategy, ctx: &SelectionContext<'_>) -> Result<Vec<SelectionResult>> {
    if let Some(q) = ctx.quality {
        if q.len() != sets.len() {
            return Err(Error::InvalidArgument(format!("{} quality vectors for {} sets", q.len(), sets.len())));
        }
    }
    let lambda = match strategy {
        Strategy::Combined => {
            let l = ctx
                .lambda
                .ok_or_else(|| Error::InvalidArgument("strategy `combined` needs a lambda".into()))?;
            check_lambda(l)?;
            l
        }
        _ => 0.0,
    };
    let model = match strategy {
        Strategy::Reranker | Strategy::Combined => Some(ctx.model(strategy)?),
        _ => None,
    };
    if let Some(m) = model {
        m.validate()?;
    }
    sets.par_iter()
        .enumerate()
        .map(|(k, set)| {
            let rng = || seeded_rng(derive_seed(ctx.seed, set.lf_id(), strategy as u64));
            match strategy {
                Strategy::Random => select_random(set, &mut rng()),
                Strategy::SelfConsistency => select_self_consistency(set, &mut rng()),
                Strategy::Generator => select_generator(set),
                Strategy::Reranker => select_reranker(set, model.unwrap()),
                Strategy::Combined => select_combined(set, model.unwrap(), lambda, ctx.standardize_blend),
                Strategy::Oracle => {
                    let q = ctx
                        .quality
                        .ok_or_else(|| Error::InvalidArgument("strategy `oracle` needs quality scores".into()))?;
                    select_oracle(set, &q[k])
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaConfig {
    pub grid: Vec<f64>,
    /// Metrics whose standardized sum is the tuning objective; empty means
    /// all available metrics.
    #[serde(default)]
    pub objective_metrics: Vec<String>,
    #[serde(default)]
    pub standardize_blend: bool,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        LambdaConfig {
            grid: (0..=20).map(|k| k as f64 / 20.0).collect(),
            objective_metrics: Vec::new(),
            standardize_blend: false,
        }
    }
}

impl LambdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("lambda grid is empty".into()));
        }
        if let Some(bad) = self.grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidArgument(format!("lambda grid value {bad} is outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTuning {
    pub best_lambda: f64,
    pub best_objective: f64,
    /// `(lambda, mean quality of selections)` for every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Pick the grid value whose blended selections have the highest mean
/// quality on `dev`; ties go to the smallest lambda.
pub fn tune_lambda(
    dev: &[CandidateSet],
    quality: &[Vec<f64>],
    model: &RerankerModel,
    cfg: &LambdaConfig,
) -> Result<LambdaTuning> {
    cfg.validate()?;
    if dev.is_empty() {
        return Err(Error::InvalidArgument("no dev sets to tune lambda on".into()));
    }
    if dev.len() != quality.len() {
        return Err(Error::InvalidArgument(format!("{} quality vectors for {} dev sets", quality.len(), dev.len())));
    }
    let scored: Vec<(Vec<f64>, Vec<f64>)> = dev
        .par_iter()
        .zip(quality)
        .map(|(set, q)| {
            if q.len() != set.len() {
                return Err(Error::InvalidArgument(format!(
                    "dev set `{}` has {} candidates but {} quality scores",
                    set.lf_id(),
                    set.len(),
                    q.len()
                )));
            }
            Ok((reranker_scores(set, model)?, generator_scores(set)?))
        })
        .collect::<Result<_>>()?;
    let mut curve = Vec::with_capacity(cfg.grid.len());
    for &lambda in &cfg.grid {
        let mut total = 0.0;
        for ((r, g), q) in scored.iter().zip(quality) {
            let b = blend(r, g, lambda, cfg.standardize_blend)?;
            total += q[argmax_first(&b).expect("non-empty")];
        }
        curve.push((lambda, total / dev.len() as f64));
    }
    let (best_lambda, best_objective) = curve
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (l, v)| match best {
            Some((bl, bv)) if v < bv || (v == bv && l >= bl) => Some((bl, bv)),
            _ => Some((l, v)),
        })
        .expect("grid is non-empty");
    Ok(LambdaTuning { best_lambda, best_objective, curve })
}
