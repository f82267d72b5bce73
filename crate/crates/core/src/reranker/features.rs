//! Hashed sparse features for (logical form, candidate) pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::toy_parser::lf_keywords;
use crate::util::{fnv1a, mix64};

/// Dense length features appended after the hashed block.
pub const LENGTH_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub char_ngram_orders: BTreeSet<usize>,
    pub word_ngram_orders: BTreeSet<usize>,
    pub hash_dim: usize,
    pub include_length_feats: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            char_ngram_orders: [2, 3, 4].into_iter().collect(),
            word_ngram_orders: [1, 2].into_iter().collect(),
            hash_dim: 1 << 18,
            include_length_feats: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim < 2 || !self.hash_dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "hash_dim must be a power of two >= 2, got {}",
                self.hash_dim
            )));
        }
        if self.hash_dim > u32::MAX as usize / 2 {
            return Err(Error::InvalidArgument(format!("hash_dim {} is too large", self.hash_dim)));
        }
        if self.char_ngram_orders.contains(&0) || self.word_ngram_orders.contains(&0) {
            return Err(Error::InvalidArgument("n-gram orders must be >= 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        if self.include_length_feats {
            LENGTH_FEATURES
        } else {
            0
        }
    }

    /// Length of the weight vector (bias excluded).
    pub fn num_weights(&self) -> usize {
        self.hash_dim + self.head_dim()
    }

    /// Whether `index` belongs to the hashed block rather than the dense head.
    pub fn is_hashed(&self, index: usize) -> bool {
        index < self.hash_dim
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatures {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseFeatures {
    fn from_unsorted(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseFeatures::default();
        for (i, v) in pairs {
            match out.indices.last() {
                Some(&last) if last == i => *out.values.last_mut().unwrap() += v,
                _ => {
                    out.indices.push(i);
                    out.values.push(v);
                }
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Dot product with `weights`; `None` if an index is out of range.
    pub fn dot(&self, weights: &[f64]) -> Option<f64> {
        let mut s = 0.0;
        for (i, v) in self.iter() {
            s += weights.get(i)? * v;
        }
        Some(s)
    }
}

fn candidate_tokens(candidate: &str) -> Vec<String> {
    candidate.split_whitespace().map(str::to_lowercase).collect()
}

fn lf_tokens(lf: &str) -> Vec<&str> {
    let mut toks: Vec<&str> = lf
        .split(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | ','))
        .filter(|t| !t.is_empty())
        .collect();
    toks.sort_unstable();
    toks.dedup();
    toks
}

/// The named features of a pair before hashing, with their values. Hashed
/// features repeat when an n-gram occurs more than once.
pub fn feature_keys(lf: &str, candidate: &str, cfg: &FeatureConfig) -> Result<Vec<(String, f64)>> {
    if lf.trim().is_empty() {
        return Err(Error::InvalidArgument("cannot featurize an empty logical form".into()));
    }
    if candidate.trim().is_empty() {
        return Err(Error::InvalidArgument("cannot featurize an empty candidate".into()));
    }
    let tokens = candidate_tokens(candidate);
    let mut keys = Vec::new();

    let padded: Vec<char> = format!(" {} ", tokens.join(" ")).chars().collect();
    for &n in &cfg.char_ngram_orders {
        for w in padded.windows(n) {
            keys.push((format!("c{n}:{}", w.iter().collect::<String>()), 1.0));
        }
    }
    for &n in &cfg.word_ngram_orders {
        for w in tokens.windows(n) {
            keys.push((format!("w{n}:{}", w.join("\u{1f}")), 1.0));
        }
    }
    let mut distinct: Vec<&str> = tokens.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    for l in lf_tokens(lf) {
        for c in &distinct {
            keys.push((format!("x:{l}\u{1f}{c}"), 1.0));
        }
    }
    Ok(keys)
}

fn length_features(lf: &str, candidate: &str) -> [f64; LENGTH_FEATURES] {
    let words = candidate.split_whitespace().count() as f64;
    let lf_words = lf_keywords(lf).len().max(1) as f64;
    [
        words.ln_1p(),
        words / lf_words,
        (candidate.chars().count() as f64).ln_1p(),
    ]
}

/// Hashed index of a named feature. FNV-1a alone leaves the low bits poorly
/// mixed for short, similar keys, so the hash is finalized before masking.
pub fn feature_bucket(key: &str, hash_dim: usize) -> u32 {
    (mix64(fnv1a(key.as_bytes())) & (hash_dim as u64 - 1)) as u32
}

pub fn featurize(lf: &str, candidate: &str, cfg: &FeatureConfig) -> Result<SparseFeatures> {
    let mut pairs: Vec<(u32, f64)> = feature_keys(lf, candidate, cfg)?
        .into_iter()
        .map(|(k, v)| (feature_bucket(&k, cfg.hash_dim), v))
        .collect();
    if cfg.include_length_feats {
        for (j, v) in length_features(lf, candidate).into_iter().enumerate() {
            pairs.push(((cfg.hash_dim + j) as u32, v));
        }
    }
    Ok(SparseFeatures::from_unsorted(pairs))
}
