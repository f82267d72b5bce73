use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!(
                "unknown split `{other}` (expected train, dev or test)"
            ))),
        }
    }
}

/// A logical form with its gold utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLogicalForm")]
pub struct LogicalForm {
    pub id: String,
    pub lf: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub split: Split,
}

#[derive(Deserialize)]
struct RawLogicalForm {
    id: String,
    lf: String,
    #[serde(default)]
    reference: Option<String>,
    split: Split,
}

impl TryFrom<RawLogicalForm> for LogicalForm {
    type Error = Error;

    fn try_from(raw: RawLogicalForm) -> Result<Self> {
        LogicalForm::new(raw.id, raw.lf, raw.reference, raw.split)
    }
}

impl LogicalForm {
    pub fn new(
        id: impl Into<String>,
        lf: impl Into<String>,
        reference: Option<String>,
        split: Split,
    ) -> Result<Self> {
        let id = id.into();
        let lf = lf.into();
        if id.is_empty() {
            return Err(Error::Invariant("logical form id is empty".into()));
        }
        if lf.trim().is_empty() {
            return Err(Error::Invariant(format!("logical form `{id}` has empty lf text")));
        }
        Ok(Self {
            id,
            lf,
            reference,
            split,
        })
    }

    /// The gold utterance, or an error naming this LF when it is absent.
    pub fn reference(&self) -> Result<&str> {
        self.reference
            .as_deref()
            .ok_or_else(|| Error::MissingReference(self.id.clone()))
    }
}

/// One unique generated utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidate")]
pub struct Candidate {
    pub text: String,
    /// Times the generator emitted this text before deduplication.
    pub raw_count: u32,
    /// Mean per-token log-probability under the generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen_logprob: Option<f64>,
}

#[derive(Deserialize)]
struct RawCandidate {
    text: String,
    raw_count: u32,
    #[serde(default)]
    gen_logprob: Option<f64>,
}

impl TryFrom<RawCandidate> for Candidate {
    type Error = Error;

    fn try_from(raw: RawCandidate) -> Result<Self> {
        Candidate::new(raw.text, raw.raw_count, raw.gen_logprob)
    }
}

impl Candidate {
    pub fn new(text: impl Into<String>, raw_count: u32, gen_logprob: Option<f64>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Invariant("candidate text is empty".into()));
        }
        if raw_count == 0 {
            return Err(Error::Invariant(format!(
                "candidate `{text}` has raw_count 0 (must be >= 1)"
            )));
        }
        if let Some(lp) = gen_logprob {
            if !lp.is_finite() {
                return Err(Error::Invariant(format!(
                    "candidate `{text}` has non-finite gen_logprob"
                )));
            }
        }
        Ok(Self {
            text,
            raw_count,
            gen_logprob,
        })
    }
}

/// The n-best list for one logical form. Candidate texts are distinct and
/// the list is never empty; every constructor checks both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidateSet")]
pub struct CandidateSet {
    lf_id: String,
    lf: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    candidates: Vec<Candidate>,
}

#[derive(Deserialize)]
struct RawCandidateSet {
    lf_id: String,
    lf: String,
    #[serde(default)]
    reference: Option<String>,
    candidates: Vec<Candidate>,
}

impl TryFrom<RawCandidateSet> for CandidateSet {
    type Error = Error;

    fn try_from(raw: RawCandidateSet) -> Result<Self> {
        CandidateSet::new(raw.lf_id, raw.lf, raw.reference, raw.candidates)
    }
}

impl CandidateSet {
    pub fn new(
        lf_id: impl Into<String>,
        lf: impl Into<String>,
        reference: Option<String>,
        candidates: Vec<Candidate>,
    ) -> Result<Self> {
        let lf_id = lf_id.into();
        if candidates.is_empty() {
            return Err(Error::Invariant(format!("candidate set `{lf_id}` is empty")));
        }
        let mut seen = HashSet::with_capacity(candidates.len());
        for c in &candidates {
            if !seen.insert(c.text.as_str()) {
                return Err(Error::Invariant(format!(
                    "candidate set `{lf_id}` repeats text `{}`",
                    c.text
                )));
            }
        }
        Ok(Self {
            lf_id,
            lf: lf.into(),
            reference,
            candidates,
        })
    }

    /// Build a set for `lf`, carrying over its id, text and reference.
    pub fn for_lf(lf: &LogicalForm, candidates: Vec<Candidate>) -> Result<Self> {
        Self::new(lf.id.clone(), lf.lf.clone(), lf.reference.clone(), candidates)
    }

    pub fn lf_id(&self) -> &str {
        &self.lf_id
    }

    pub fn lf(&self) -> &str {
        &self.lf
    }

    pub fn reference(&self) -> Result<&str> {
        self.reference
            .as_deref()
            .ok_or_else(|| Error::MissingReference(self.lf_id.clone()))
    }

    pub fn reference_opt(&self) -> Option<&str> {
        self.reference.as_deref()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.text.as_str())
    }

    /// A new set holding the candidates at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut picked = Vec::with_capacity(indices.len());
        for &i in indices {
            let c = self.candidates.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "index {i} out of bounds for set `{}` of size {}",
                    self.lf_id,
                    self.len()
                ))
            })?;
            picked.push(c.clone());
        }
        Self::new(self.lf_id.clone(), self.lf.clone(), self.reference.clone(), picked)
    }
}

/// Per-candidate quality scores for one set, keyed by metric name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityTable {
    pub lf_id: String,
    pub per_metric: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<Vec<f64>>,
}

impl QualityTable {
    pub fn new(lf_id: impl Into<String>) -> Self {
        Self {
            lf_id: lf_id.into(),
            ..Default::default()
        }
    }

    pub fn insert(&mut self, metric: impl Into<String>, scores: Vec<f64>) -> Result<()> {
        let metric = metric.into();
        if self.per_metric.contains_key(&metric) {
            return Err(Error::Invariant(format!(
                "metric `{metric}` appears twice for `{}`",
                self.lf_id
            )));
        }
        if let Some(existing) = self.per_metric.values().next() {
            if existing.len() != scores.len() {
                return Err(Error::Invariant(format!(
                    "metric `{metric}` for `{}` has {} scores, other metrics have {}",
                    self.lf_id,
                    scores.len(),
                    existing.len()
                )));
            }
        }
        self.per_metric.insert(metric, scores);
        Ok(())
    }

    pub fn metric(&self, name: &str) -> Result<&[f64]> {
        self.per_metric.get(name).map(Vec::as_slice).ok_or_else(|| {
            Error::InvalidArgument(format!("metric `{name}` missing for `{}`", self.lf_id))
        })
    }

    pub fn combined(&self) -> Result<&[f64]> {
        self.combined.as_deref().ok_or_else(|| {
            Error::InvalidArgument(format!("combined quality not computed for `{}`", self.lf_id))
        })
    }

    /// Check every vector against the size of the matching candidate set.
    pub fn check_against(&self, set: &CandidateSet) -> Result<()> {
        if self.lf_id != set.lf_id() {
            return Err(Error::Invariant(format!(
                "quality table `{}` paired with candidate set `{}`",
                self.lf_id,
                set.lf_id()
            )));
        }
        let n = set.len();
        for (name, v) in &self.per_metric {
            if v.len() != n {
                return Err(Error::Invariant(format!(
                    "metric `{name}` for `{}` has {} scores but the set has {n} candidates",
                    self.lf_id,
                    v.len()
                )));
            }
        }
        if let Some(c) = &self.combined {
            if c.len() != n {
                return Err(Error::Invariant(format!(
                    "combined quality for `{}` has {} scores but the set has {n} candidates",
                    self.lf_id,
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Restrict every vector to `indices`.
    pub fn subset(&self, indices: &[usize]) -> QualityTable {
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        QualityTable {
            lf_id: self.lf_id.clone(),
            per_metric: self
                .per_metric
                .iter()
                .map(|(k, v)| (k.clone(), pick(v)))
                .collect(),
            combined: self.combined.as_ref().map(pick),
        }
    }
}

/// Binary human judgements for one candidate set (1 = correct).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabeledSet")]
pub struct LabeledSet {
    pub lf_id: String,
    pub labels: Vec<u8>,
}

#[derive(Deserialize)]
struct RawLabeledSet {
    lf_id: String,
    labels: Vec<u8>,
}

impl TryFrom<RawLabeledSet> for LabeledSet {
    type Error = Error;

    fn try_from(raw: RawLabeledSet) -> Result<Self> {
        LabeledSet::new(raw.lf_id, raw.labels)
    }
}

impl LabeledSet {
    pub fn new(lf_id: impl Into<String>, labels: Vec<u8>) -> Result<Self> {
        let lf_id = lf_id.into();
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Invariant(format!(
                "label {bad} for `{lf_id}` is not 0 or 1"
            )));
        }
        Ok(Self { lf_id, labels })
    }

    /// True when every label is the same (all correct or all incorrect).
    pub fn is_single_class(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] == w[1])
    }
}
