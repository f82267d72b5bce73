//! Sentence-level BLEU over whitespace tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    /// Any zero n-gram precision makes the score 0.
    #[default]
    None,
    /// Replace zero matched counts by `epsilon` before taking precisions.
    AddEpsilon(f64),
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Unsmoothed 4-gram BLEU of `candidate` against a single `reference`.
pub fn bleu(candidate: &str, reference: &str) -> Result<f64> {
    bleu_with(candidate, reference, 4, Smoothing::None)
}

/// BLEU with uniform weights over orders `1..=max_order`: geometric mean of
/// clipped n-gram precisions times the brevity penalty.
pub fn bleu_with(
    candidate: &str,
    reference: &str,
    max_order: usize,
    smoothing: Smoothing,
) -> Result<f64> {
    if max_order == 0 {
        return Err(Error::InvalidArgument("max_order must be >= 1".into()));
    }
    let hyp: Vec<&str> = candidate.split_whitespace().collect();
    let refs: Vec<&str> = reference.split_whitespace().collect();
    if hyp.is_empty() {
        return Err(Error::InvalidArgument("BLEU candidate is empty".into()));
    }
    if refs.is_empty() {
        return Err(Error::InvalidArgument("BLEU reference is empty".into()));
    }

    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let hyp_counts = ngram_counts(&hyp, n);
        let ref_counts = ngram_counts(&refs, n);
        let matched: usize = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let total = hyp.len().saturating_sub(n - 1).max(1);
        let numerator = match (matched, smoothing) {
            (0, Smoothing::None) => return Ok(0.0),
            (0, Smoothing::AddEpsilon(eps)) => eps,
            (m, _) => m as f64,
        };
        log_sum += (numerator / total as f64).ln();
    }
    let (c, r) = (hyp.len() as f64, refs.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / max_order as f64).exp())
}
