//! Deterministic stand-in for a semantic-parser probability scorer.
//!
//! Scores how well a candidate covers the LF's content words and whether it
//! mentions them in the LF's order, squashed into (0, 1). It needs no model
//! and keeps the LF-conditioned scoring path testable offline.

/// Lowercased alphanumeric LF words, split on punctuation and underscores,
/// dropping pure numbers, in first-appearance order without repeats.
pub fn lf_keywords(lf: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in lf.split(|c: char| !c.is_alphanumeric()) {
        if w.is_empty() || w.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let w = w.to_lowercase();
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Score in (0, 1); higher means the candidate looks more faithful to `lf`.
pub fn toy_parser_probability(lf: &str, candidate: &str) -> f64 {
    let keywords = lf_keywords(lf);
    let tokens: Vec<String> = candidate
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    if keywords.is_empty() || tokens.is_empty() {
        return logistic(-3.0);
    }
    // first position of each matched keyword, in LF order
    let positions: Vec<usize> = keywords
        .iter()
        .filter_map(|k| tokens.iter().position(|t| t == k))
        .collect();
    let coverage = positions.len() as f64 / keywords.len() as f64;
    let order = if positions.len() < 2 {
        0.5
    } else {
        let mut agree = 0usize;
        let mut pairs = 0usize;
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                pairs += 1;
                if positions[i] < positions[j] {
                    agree += 1;
                }
            }
        }
        agree as f64 / pairs as f64
    };
    logistic(4.0 * (coverage + 0.5 * order - 0.75))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
