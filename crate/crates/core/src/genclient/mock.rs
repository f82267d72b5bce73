//! Offline generators. Both are deterministic so the whole pipeline can be
//! exercised without network access.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::client::{Completion, GenerationRequest, Generator};
use crate::data::LogicalForm;
use crate::error::{Error, Result};
use crate::util::{derive_seed, fnv1a, mix64, seeded_rng};

/// Replays a fixed script of texts, cycling forever. Every LF shares the
/// same cursor, so this is meant for single-LF tests.
#[derive(Debug)]
pub struct ScriptedGenerator {
    script: Vec<String>,
    cursor: Mutex<usize>,
}

impl ScriptedGenerator {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let script: Vec<String> = script.into_iter().map(Into::into).collect();
        assert!(!script.is_empty(), "script must not be empty");
        Self {
            script,
            cursor: Mutex::new(0),
        }
    }

    /// Number of samples handed out so far.
    pub fn emitted(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }
}

impl Generator for ScriptedGenerator {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let out = (0..request.n)
            .map(|_| {
                let text = self.script[*cursor % self.script.len()].clone();
                *cursor += 1;
                let token_logprobs = synthetic_logprobs(&text, 1.0, 0);
                Completion {
                    text,
                    token_logprobs,
                }
            })
            .collect();
        Ok(out)
    }
}

/// Seeded sampler over a weighted candidate pool per LF.
///
/// Pools are either registered explicitly or derived from the LF's reference
/// (or, lacking one, its keywords) by applying increasing numbers of word
/// drops, swaps, insertions and substitutions. Fewer edits get higher weight,
/// so emission frequency and synthetic log-probability both correlate with
/// closeness to the reference.
///
/// The RNG for each call is derived from `(seed, lf id, attempt)`, so results
/// do not depend on call interleaving across threads.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    pool_size: usize,
    pools: HashMap<String, Vec<(String, f64)>>,
}

const FILLERS: &[&str] = &["the", "all", "some", "please", "exactly", "of", "there"];

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            pool_size: 12,
            pools: HashMap::new(),
        }
    }

    /// Number of variants in derived pools.
    pub fn with_pool_size(mut self, size: usize) -> Self {
        self.pool_size = size.max(1);
        self
    }

    /// Register an explicit `(text, weight)` pool for `lf_id`.
    pub fn with_pool<S: Into<String>>(
        mut self,
        lf_id: impl Into<String>,
        pool: impl IntoIterator<Item = (S, f64)>,
    ) -> Self {
        self.pools.insert(
            lf_id.into(),
            pool.into_iter().map(|(t, w)| (t.into(), w)).collect(),
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The pool the mock samples from for `lf`.
    pub fn pool_for(&self, lf: &LogicalForm) -> Vec<(String, f64)> {
        if let Some(p) = self.pools.get(&lf.id) {
            return p.clone();
        }
        let base: Vec<String> = match &lf.reference {
            Some(r) if !r.trim().is_empty() => r.split_whitespace().map(String::from).collect(),
            _ => lf_keywords(&lf.lf),
        };
        let keywords = lf_keywords(&lf.lf);
        let mut seen = HashSet::new();
        let mut pool = Vec::with_capacity(self.pool_size);
        for k in 0..self.pool_size as u64 * 3 {
            if pool.len() >= self.pool_size {
                break;
            }
            let mut rng = seeded_rng(derive_seed(self.seed, &format!("pool:{}", lf.id), k));
            let edits = if k == 0 { 0 } else { 1 + (k as usize - 1) / 3 };
            let mut tokens = base.clone();
            for _ in 0..edits {
                perturb(&mut tokens, &keywords, &mut rng);
            }
            if tokens.is_empty() {
                continue;
            }
            let text = tokens.join(" ");
            if !seen.insert(text.clone()) {
                continue;
            }
            let weight = (-0.6 * edits as f64).exp() * rng.gen_range(0.6..1.4);
            pool.push((text, weight));
        }
        pool
    }
}

fn perturb<R: Rng>(tokens: &mut Vec<String>, keywords: &[String], rng: &mut R) {
    let n = tokens.len();
    match rng.gen_range(0..4) {
        0 if n > 1 => {
            tokens.remove(rng.gen_range(0..n));
        }
        1 if n > 1 => {
            let i = rng.gen_range(0..n - 1);
            tokens.swap(i, i + 1);
        }
        2 => {
            let w = FILLERS[rng.gen_range(0..FILLERS.len())];
            tokens.insert(rng.gen_range(0..=n), w.to_string());
        }
        _ if n > 0 => {
            let w = if !keywords.is_empty() && rng.gen_bool(0.5) {
                keywords[rng.gen_range(0..keywords.len())].clone()
            } else {
                FILLERS[rng.gen_range(0..FILLERS.len())].to_string()
            };
            tokens[rng.gen_range(0..n)] = w;
        }
        _ => tokens.push(FILLERS[0].to_string()),
    }
}

/// Alphanumeric words of an LF, split on punctuation and underscores.
fn lf_keywords(lf: &str) -> Vec<String> {
    lf.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !w.chars().all(|c| c.is_ascii_digit()))
        .map(str::to_lowercase)
        .collect()
}

/// Per-token log-probs for `text`: a shared level set by `prob` plus a small
/// deterministic per-token jitter. Depends only on the text and `salt`.
fn synthetic_logprobs(text: &str, prob: f64, salt: u64) -> Vec<f64> {
    let level = 0.3 * prob.max(1e-12).ln();
    let h = fnv1a(text.as_bytes()) ^ salt;
    text.split_whitespace()
        .enumerate()
        .map(|(j, _)| {
            let u = (mix64(h ^ j as u64) >> 11) as f64 / (1u64 << 53) as f64;
            level - 0.2 * u
        })
        .collect()
}

impl Generator for MockGenerator {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>> {
        let pool = self.pool_for(request.lf);
        if pool.is_empty() {
            return Err(Error::Generator(format!(
                "mock has no candidates for `{}`",
                request.lf.id
            )));
        }
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let weights: Vec<f64> = if request.temperature <= 0.0 {
            let best = crate::util::argmax_first(&pool.iter().map(|p| p.1).collect::<Vec<_>>())
                .unwrap_or(0);
            (0..pool.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
        } else {
            pool.iter()
                .map(|(_, w)| (w / total).powf(1.0 / request.temperature))
                .collect()
        };
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Generator(format!("mock pool weights: {e}")))?;
        let mut rng = seeded_rng(derive_seed(
            self.seed,
            &request.lf.id,
            request.attempt as u64,
        ));
        Ok((0..request.n)
            .map(|_| {
                let (text, w) = &pool[dist.sample(&mut rng)];
                Completion {
                    text: text.clone(),
                    token_logprobs: synthetic_logprobs(text, w / total, self.seed),
                }
            })
            .collect())
    }
}
