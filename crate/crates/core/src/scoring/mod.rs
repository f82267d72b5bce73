//! Quality scorers for candidate utterances.
//!
//! Native scorers run in-process. External scorers (neural metrics, parsers)
//! are reached through [`protocol`] over a subprocess pipe or HTTP.

pub mod bleu;
mod normalize;
pub mod protocol;
pub mod toy_parser;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::{CandidateSet, MetricScores};
use crate::error::{Error, Result};

pub use bleu::{bleu, bleu_with, Smoothing};
pub use normalize::{
    apply_normalization, combine_metrics, combine_tables, fit_normalization, standardize,
    NormalizationScope, NormalizationStats,
};
pub use protocol::{HttpScorer, SubprocessScorer};

/// What a scorer needs to see besides the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    /// Candidate vs. reference, computed here.
    NativeOverlap,
    /// Candidate vs. reference, computed elsewhere.
    ExternalReference,
    /// Candidate vs. logical form (e.g. parser probability).
    ExternalLf,
}

impl ScorerKind {
    pub fn needs_reference(self) -> bool {
        !matches!(self, ScorerKind::ExternalLf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    InProcess,
    Subprocess(String),
    Http(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub name: String,
    pub kind: ScorerKind,
    pub transport: Transport,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreItem<'a> {
    pub candidate: &'a str,
    pub reference: Option<&'a str>,
    pub lf: Option<&'a str>,
}

pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> ScorerKind;
    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>>;

    fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            name: self.name().to_string(),
            kind: self.kind(),
            transport: Transport::InProcess,
        }
    }

    /// How many batches may be outstanding at once.
    fn max_in_flight(&self) -> usize {
        1
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn kind(&self) -> ScorerKind {
        (**self).kind()
    }
    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        (**self).score_batch(items)
    }
    fn spec(&self) -> ScorerSpec {
        (**self).spec()
    }
    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }
}

fn require_reference<'a>(item: &ScoreItem<'a>) -> Result<&'a str> {
    item.reference.ok_or_else(|| {
        Error::MissingReference(format!("candidate `{}` has no reference", item.candidate))
    })
}

#[derive(Debug, Clone, Default)]
pub struct BleuScorer {
    pub max_order: Option<usize>,
    pub smoothing: Smoothing,
}

impl Scorer for BleuScorer {
    fn name(&self) -> &str {
        "bleu"
    }

    fn kind(&self) -> ScorerKind {
        ScorerKind::NativeOverlap
    }

    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        items
            .iter()
            .map(|it| {
                bleu_with(
                    it.candidate,
                    require_reference(it)?,
                    self.max_order.unwrap_or(4),
                    self.smoothing,
                )
            })
            .collect()
    }
}

/// In-process stand-in for a semantic parser: scores how well a candidate
/// covers the logical form's content words.
#[derive(Debug, Clone, Default)]
pub struct ToyParserScorer;

impl Scorer for ToyParserScorer {
    fn name(&self) -> &str {
        "toy-parser"
    }

    fn kind(&self) -> ScorerKind {
        ScorerKind::ExternalLf
    }

    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        items
            .iter()
            .map(|it| {
                let lf = it.lf.ok_or_else(|| {
                    Error::InvalidArgument(format!("candidate `{}` has no logical form", it.candidate))
                })?;
                Ok(toy_parser::toy_parser_probability(lf, it.candidate))
            })
            .collect()
    }
}

/// Scores each candidate by its length in characters. Used to exercise the
/// external protocol without a real model.
#[derive(Debug, Clone)]
pub struct CandidateLengthScorer {
    kind: ScorerKind,
}

impl CandidateLengthScorer {
    pub fn new(kind: ScorerKind) -> Self {
        CandidateLengthScorer { kind }
    }
}

impl Scorer for CandidateLengthScorer {
    fn name(&self) -> &str {
        "candidate-length"
    }

    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        Ok(items.iter().map(|it| it.candidate.chars().count() as f64).collect())
    }
}

/// A `--metric` argument: a native scorer name or `ext:<command-or-url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricChoice {
    Bleu,
    ToyParser,
    External(Transport),
}

impl FromStr for MetricChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bleu" => Ok(MetricChoice::Bleu),
            "toy-parser" => Ok(MetricChoice::ToyParser),
            _ => {
                let target = s.strip_prefix("ext:").ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown metric `{s}` (expected bleu, toy-parser or ext:<command-or-url>)"
                    ))
                })?;
                let target = target.trim();
                if target.is_empty() {
                    return Err(Error::InvalidArgument("empty external scorer target".into()));
                }
                if target.starts_with("http://") || target.starts_with("https://") {
                    Ok(MetricChoice::External(Transport::Http(target.to_string())))
                } else {
                    Ok(MetricChoice::External(Transport::Subprocess(target.to_string())))
                }
            }
        }
    }
}

impl fmt::Display for MetricChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricChoice::Bleu => f.write_str("bleu"),
            MetricChoice::ToyParser => f.write_str("toy-parser"),
            MetricChoice::External(Transport::Http(u)) | MetricChoice::External(Transport::Subprocess(u)) => {
                write!(f, "ext:{u}")
            }
            MetricChoice::External(Transport::InProcess) => f.write_str("ext:"),
        }
    }
}

impl MetricChoice {
    /// Instantiate the scorer, performing the handshake for external ones.
    pub fn open(&self, timeout: Duration) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            MetricChoice::Bleu => Box::new(BleuScorer::default()),
            MetricChoice::ToyParser => Box::new(ToyParserScorer),
            MetricChoice::External(Transport::Subprocess(cmd)) => {
                Box::new(SubprocessScorer::spawn(cmd, timeout)?)
            }
            MetricChoice::External(Transport::Http(url)) => Box::new(HttpScorer::connect(url, timeout)?),
            MetricChoice::External(Transport::InProcess) => {
                return Err(Error::InvalidArgument("no external scorer target".into()))
            }
        })
    }
}

/// Score every candidate of every set with `scorer`, `batch_size` items per
/// call. Sets lacking a reference fail before any call when the scorer needs
/// one.
pub fn score_sets<S: Scorer + ?Sized>(
    sets: &[CandidateSet],
    scorer: &S,
    batch_size: usize,
) -> Result<Vec<MetricScores>> {
    let kind = scorer.kind();
    if kind.needs_reference() {
        for set in sets {
            set.reference().map_err(|_| {
                Error::MissingReference(format!(
                    "set `{}` has no reference but `{}` needs one",
                    set.lf_id(),
                    scorer.name()
                ))
            })?;
        }
    }
    let items: Vec<ScoreItem<'_>> = sets
        .iter()
        .flat_map(|set| {
            set.texts().map(move |c| ScoreItem {
                candidate: c,
                reference: set.reference_opt(),
                lf: Some(set.lf()),
            })
        })
        .collect();
    let batch_size = batch_size.max(1);
    let batches: Vec<&[ScoreItem<'_>]> = items.chunks(batch_size).collect();
    let mut flat = Vec::with_capacity(items.len());
    let in_flight = scorer.max_in_flight().max(1);
    for group in batches.chunks(in_flight) {
        let results: Vec<Result<Vec<f64>>> = if group.len() == 1 {
            vec![scorer.score_batch(group[0])]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|b| s.spawn(move || scorer.score_batch(b)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("scorer thread panicked".into()))))
                    .collect()
            })
        };
        for (batch, res) in group.iter().zip(results) {
            let scores = res?;
            if scores.len() != batch.len() {
                return Err(Error::Protocol(format!(
                    "`{}` returned {} scores for {} items",
                    scorer.name(),
                    scores.len(),
                    batch.len()
                )));
            }
            if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
                return Err(Error::Protocol(format!("`{}` returned non-finite score {bad}", scorer.name())));
            }
            flat.extend(scores);
        }
    }
    let mut out = Vec::with_capacity(sets.len());
    let mut rest = flat.as_slice();
    for set in sets {
        let (head, tail) = rest.split_at(set.len());
        out.push(MetricScores {
            lf_id: set.lf_id().to_string(),
            metric: scorer.name().to_string(),
            scores: head.to_vec(),
        });
        rest = tail;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Candidate;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn set(id: &str, reference: Option<&str>, texts: &[&str]) -> CandidateSet {
        CandidateSet::new(
            id,
            "( answer ( x ) )",
            reference.map(str::to_string),
            texts.iter().map(|t| Candidate::new(*t, 1, None).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn metric_choice_parsing() {
        assert_eq!("bleu".parse::<MetricChoice>().unwrap(), MetricChoice::Bleu);
        assert_eq!(
            "ext:python3 -m scorer".parse::<MetricChoice>().unwrap(),
            MetricChoice::External(Transport::Subprocess("python3 -m scorer".into()))
        );
        assert_eq!(
            "ext:http://localhost:9000".parse::<MetricChoice>().unwrap(),
            MetricChoice::External(Transport::Http("http://localhost:9000".into()))
        );
        assert!("rouge".parse::<MetricChoice>().is_err());
        assert!("ext:".parse::<MetricChoice>().is_err());
    }

    #[test]
    fn kind_serializes_kebab() {
        assert_eq!(serde_json::to_string(&ScorerKind::ExternalLf).unwrap(), "\"external-lf\"");
    }

    #[test]
    fn scores_split_back_per_set() {
        let sets = vec![set("a", Some("r"), &["x", "yy", "zzz"]), set("b", Some("r"), &["four"])];
        let got = score_sets(&sets, &CandidateLengthScorer::new(ScorerKind::ExternalReference), 2).unwrap();
        assert_eq!(got[0].scores, vec![1.0, 2.0, 3.0]);
        assert_eq!(got[1].scores, vec![4.0]);
        assert_eq!(got[1].metric, "candidate-length");
    }

    #[test]
    fn missing_reference_fails_before_scoring() {
        struct Counting(AtomicUsize);
        impl Scorer for Counting {
            fn name(&self) -> &str {
                "counting"
            }
            fn kind(&self) -> ScorerKind {
                ScorerKind::ExternalReference
            }
            fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(vec![0.0; items.len()])
            }
        }
        let sets = vec![set("a", Some("r"), &["x"]), set("b", None, &["y"])];
        let c = Counting(AtomicUsize::new(0));
        assert!(matches!(score_sets(&sets, &c, 8), Err(Error::MissingReference(_))));
        assert_eq!(c.0.load(Ordering::SeqCst), 0);
        // an LF scorer does not need references
        assert!(score_sets(&sets, &ToyParserScorer, 8).is_ok());
    }

    #[test]
    fn wrong_length_is_rejected() {
        struct Short;
        impl Scorer for Short {
            fn name(&self) -> &str {
                "short"
            }
            fn kind(&self) -> ScorerKind {
                ScorerKind::ExternalLf
            }
            fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
                Ok(vec![0.0; items.len() - 1])
            }
        }
        let sets = vec![set("a", None, &["x", "y"])];
        assert!(matches!(score_sets(&sets, &Short, 8), Err(Error::Protocol(_))));
    }

    #[test]
    fn concurrent_batches_keep_order() {
        struct Parallel;
        impl Scorer for Parallel {
            fn name(&self) -> &str {
                "p"
            }
            fn kind(&self) -> ScorerKind {
                ScorerKind::ExternalLf
            }
            fn max_in_flight(&self) -> usize {
                3
            }
            fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
                Ok(items.iter().map(|i| i.candidate.parse::<f64>().unwrap()).collect())
            }
        }
        let texts: Vec<String> = (0..23).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let sets = vec![set("a", None, &refs)];
        let got = score_sets(&sets, &Parallel, 2).unwrap();
        assert_eq!(got[0].scores, (0..23).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn bleu_scorer_matches_function() {
        let sets = vec![set("a", Some("what is the capital of m0"), &["what is the capital of m0", "capital"])];
        let got = score_sets(&sets, &BleuScorer::default(), 8).unwrap();
        assert_eq!(got[0].scores[0], 1.0);
        assert_eq!(got[0].scores[1], 0.0);
    }
}
