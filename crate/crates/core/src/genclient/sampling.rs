use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::{Completion, GenerationRequest, Generator};
use super::prompt::{build_prompt, draw_exemplars, PromptTemplate};
use crate::data::{Candidate, CandidateSet, LogicalForm};
use crate::error::{Error, Result};
use crate::util::{derive_seed, seeded_rng};

/// Where candidates come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Endpoint {
    Mock,
    Url(String),
}

impl From<String> for Endpoint {
    fn from(s: String) -> Self {
        if s == "mock" {
            Endpoint::Mock
        } else {
            Endpoint::Url(s)
        }
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> Self {
        match e {
            Endpoint::Mock => "mock".into(),
            Endpoint::Url(u) => u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub endpoint: Endpoint,
    pub temperature: f64,
    /// Cap on raw samples drawn per LF.
    pub max_attempts: usize,
    pub target_n: usize,
    pub seed: u64,
    pub max_tokens: usize,
    /// Draw fresh exemplars for every prompting call instead of once per LF.
    pub redraw_exemplars: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            endpoint: Endpoint::Mock,
            temperature: 0.7,
            max_attempts: 40,
            target_n: 8,
            seed: 0,
            max_tokens: 64,
            redraw_exemplars: false,
        }
    }
}

impl GeneratorConfig {
    /// Default config for `target_n` candidates, with the attempt cap at 5×.
    pub fn with_target(target_n: usize) -> Self {
        Self {
            target_n,
            max_attempts: 5 * target_n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.target_n == 0 {
            return Err(Error::InvalidArgument("target_n must be >= 1".into()));
        }
        if self.max_attempts < self.target_n {
            return Err(Error::InvalidArgument(format!(
                "max_attempts ({}) must be >= target_n ({})",
                self.max_attempts, self.target_n
            )));
        }
        Ok(())
    }
}

/// Result of [`generate_until_unique`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub set: CandidateSet,
    /// Fewer than `target_n` unique texts were found within `max_attempts`.
    pub truncated: bool,
    /// Raw samples counted into the set (equals the sum of `raw_count`).
    pub samples_drawn: usize,
    /// Samples dropped because their text was empty.
    pub discarded_empty: usize,
}

/// Texts are compared after trimming trailing whitespace.
pub fn dedup_key(text: &str) -> &str {
    text.trim_end()
}

/// Arithmetic mean of per-token log-probabilities.
pub fn mean_token_logprob(token_logprobs: &[f64]) -> Result<f64> {
    if token_logprobs.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot average an empty list of token log-probabilities".into(),
        ));
    }
    Ok(token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64)
}

/// Accumulates raw samples into unique candidates in first-seen order.
#[derive(Default)]
struct Dedup {
    order: Vec<String>,
    stats: HashMap<String, (u32, Option<f64>)>,
    drawn: usize,
    discarded: usize,
}

impl Dedup {
    fn unique(&self) -> usize {
        self.order.len()
    }

    fn push(&mut self, c: Completion) {
        let key = dedup_key(&c.text);
        if key.trim().is_empty() {
            self.discarded += 1;
            return;
        }
        self.drawn += 1;
        if let Some(entry) = self.stats.get_mut(key) {
            entry.0 += 1;
            return;
        }
        let lp = mean_token_logprob(&c.token_logprobs).ok();
        self.order.push(key.to_string());
        self.stats.insert(key.to_string(), (1, lp));
    }

    fn into_set(self, lf: &LogicalForm) -> Result<(CandidateSet, usize, usize)> {
        if self.order.is_empty() {
            return Err(Error::Generator(format!(
                "generator produced no candidates for `{}`",
                lf.id
            )));
        }
        let mut stats = self.stats;
        let candidates = self
            .order
            .into_iter()
            .map(|t| {
                let (count, lp) = stats.remove(&t).expect("every ordered text has stats");
                Candidate::new(t, count, lp)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((CandidateSet::for_lf(lf, candidates)?, self.drawn, self.discarded))
    }
}

fn generate_with<G, P>(
    lf: &LogicalForm,
    cfg: &GeneratorConfig,
    client: &G,
    mut prompt_for: P,
) -> Result<GenerationOutcome>
where
    G: Generator + ?Sized,
    P: FnMut(usize) -> Result<String>,
{
    cfg.validate()?;
    let mut acc = Dedup::default();
    let mut calls = 0;
    while acc.unique() < cfg.target_n
        && acc.drawn + acc.discarded < cfg.max_attempts
        && calls < cfg.max_attempts
    {
        let need = (cfg.target_n - acc.unique()).min(cfg.max_attempts - acc.drawn - acc.discarded);
        let prompt = prompt_for(calls)?;
        let request = GenerationRequest {
            lf,
            prompt: &prompt,
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            n: need,
            attempt: calls,
        };
        let completions = client.sample(&request)?;
        calls += 1;
        // a batch of `need` samples can add at most `need` new texts, so the
        // set never overshoots target_n
        for c in completions.into_iter().take(need) {
            acc.push(c);
        }
    }
    let truncated = acc.unique() < cfg.target_n;
    let (set, drawn, discarded) = acc.into_set(lf)?;
    if truncated {
        log::warn!(
            "`{}`: only {} of {} unique candidates after {} samples",
            lf.id,
            set.len(),
            cfg.target_n,
            drawn
        );
    }
    Ok(GenerationOutcome {
        set,
        truncated,
        samples_drawn: drawn,
        discarded_empty: discarded,
    })
}

/// Prompt `client` with a fixed `prompt` until `cfg.target_n` unique texts
/// are collected or `cfg.max_attempts` samples have been drawn.
pub fn generate_until_unique<G: Generator + ?Sized>(
    lf: &LogicalForm,
    prompt: &str,
    cfg: &GeneratorConfig,
    client: &G,
) -> Result<GenerationOutcome> {
    generate_with(lf, cfg, client, |_| Ok(prompt.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetBuilderConfig {
    pub samples_per_lf: usize,
    pub min_unique: usize,
    #[serde(default, with = "humantime_opt", skip_serializing_if = "Option::is_none")]
    pub wall_clock_budget: Option<Duration>,
}

mod humantime_opt {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_str(&humantime::format_duration(*d).to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| humantime::parse_duration(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl Default for BudgetBuilderConfig {
    fn default() -> Self {
        Self {
            samples_per_lf: 10,
            min_unique: 2,
            wall_clock_budget: None,
        }
    }
}

impl BudgetBuilderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_unique < 2 {
            return Err(Error::InvalidArgument("min_unique must be >= 2".into()));
        }
        if self.samples_per_lf < self.min_unique {
            return Err(Error::InvalidArgument(format!(
                "samples_per_lf ({}) must be >= min_unique ({})",
                self.samples_per_lf, self.min_unique
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetOutcome {
    pub sets: Vec<CandidateSet>,
    /// LFs dropped for having fewer than `min_unique` distinct samples.
    pub dropped: Vec<String>,
    pub processed: usize,
    pub budget_exhausted: bool,
}

impl BudgetOutcome {
    pub fn mean_set_size(&self) -> f64 {
        if self.sets.is_empty() {
            return 0.0;
        }
        self.sets.iter().map(CandidateSet::len).sum::<usize>() as f64 / self.sets.len() as f64
    }

    pub fn total_candidates(&self) -> usize {
        self.sets.iter().map(CandidateSet::len).sum()
    }
}

/// A generator client bundled with its prompt template and exemplar pool.
pub struct CandidateGenerator<'a, G: ?Sized> {
    pub client: &'a G,
    pub template: PromptTemplate,
    pub exemplars: &'a [LogicalForm],
    pub config: GeneratorConfig,
    /// Upper bound on LFs processed concurrently.
    pub workers: usize,
}

impl<'a, G: Generator + ?Sized> CandidateGenerator<'a, G> {
    pub fn new(
        client: &'a G,
        template: PromptTemplate,
        exemplars: &'a [LogicalForm],
        config: GeneratorConfig,
    ) -> Self {
        Self {
            client,
            template,
            exemplars,
            config,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Prompt for `lf` on call number `call`. Exemplars are fixed per LF
    /// unless `redraw_exemplars` is set.
    pub fn prompt(&self, lf: &LogicalForm, call: usize) -> Result<String> {
        let stream = if self.config.redraw_exemplars { call as u64 } else { 0 };
        let mut rng = seeded_rng(derive_seed(
            self.config.seed,
            &format!("exemplars:{}", lf.id),
            stream,
        ));
        let chosen = draw_exemplars(self.exemplars, lf, self.template.num_exemplars, &mut rng);
        build_prompt(lf, &chosen, &self.template)
    }

    pub fn generate_until_unique(&self, lf: &LogicalForm) -> Result<GenerationOutcome> {
        generate_with(lf, &self.config, self.client, |call| self.prompt(lf, call))
    }

    /// Generate for every LF, `workers` at a time, preserving input order.
    pub fn generate_all(&self, lfs: &[LogicalForm]) -> Result<Vec<GenerationOutcome>> {
        let mut out = Vec::with_capacity(lfs.len());
        for chunk in lfs.chunks(self.workers) {
            let results: Vec<Result<GenerationOutcome>> = chunk
                .par_iter()
                .map(|lf| self.generate_until_unique(lf))
                .collect();
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }

    /// Draw exactly `samples_per_lf` raw samples for one LF and deduplicate.
    fn sample_fixed(&self, lf: &LogicalForm, samples: usize) -> Result<CandidateSet> {
        let mut acc = Dedup::default();
        let mut calls = 0;
        while acc.drawn + acc.discarded < samples && calls < samples {
            let need = samples - acc.drawn - acc.discarded;
            let prompt = self.prompt(lf, calls)?;
            let request = GenerationRequest {
                lf,
                prompt: &prompt,
                temperature: self.config.temperature,
                max_tokens: self.config.max_tokens,
                n: need,
                attempt: calls,
            };
            let completions = self.client.sample(&request)?;
            calls += 1;
            for c in completions.into_iter().take(need) {
                acc.push(c);
            }
        }
        Ok(acc.into_set(lf)?.0)
    }
}

/// Fixed-budget builder producing variable-size candidate sets: sample
/// `samples_per_lf` times per LF, deduplicate, and drop LFs left with fewer
/// than `min_unique` distinct texts. Stops between batches once
/// `wall_clock_budget` has elapsed.
pub fn build_variable_dataset<G: Generator + ?Sized>(
    lfs: &[LogicalForm],
    cfg: &BudgetBuilderConfig,
    generator: &CandidateGenerator<'_, G>,
) -> Result<BudgetOutcome> {
    cfg.validate()?;
    generator.config.validate()?;
    let start = Instant::now();
    let mut outcome = BudgetOutcome {
        sets: Vec::new(),
        dropped: Vec::new(),
        processed: 0,
        budget_exhausted: false,
    };
    for chunk in lfs.chunks(generator.workers) {
        if let Some(budget) = cfg.wall_clock_budget {
            if start.elapsed() >= budget {
                outcome.budget_exhausted = true;
                break;
            }
        }
        let results: Vec<Result<CandidateSet>> = chunk
            .par_iter()
            .map(|lf| generator.sample_fixed(lf, cfg.samples_per_lf))
            .collect();
        for (lf, r) in chunk.iter().zip(results) {
            outcome.processed += 1;
            match r {
                Ok(set) if set.len() >= cfg.min_unique => outcome.sets.push(set),
                Ok(_) => outcome.dropped.push(lf.id.clone()),
                // a single LF with no usable samples is dropped, not fatal
                Err(Error::Generator(msg)) if msg.contains("no candidates") => {
                    outcome.dropped.push(lf.id.clone())
                }
                Err(e) => return Err(e),
            }
        }
    }
    if outcome.sets.is_empty() {
        return Err(Error::Generator(format!(
            "budget builder produced no sets ({} LFs processed, {} dropped)",
            outcome.processed,
            outcome.dropped.len()
        )));
    }
    log::info!(
        "budget builder: {} sets, mean size {:.2}, {} dropped",
        outcome.sets.len(),
        outcome.mean_set_size(),
        outcome.dropped.len()
    );
    Ok(outcome)
}
