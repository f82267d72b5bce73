use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::LogicalForm;
use crate::error::{Error, Result};

use super::prompt::parse_numbered_list;

/// Environment variable consulted for the generator API token.
pub const API_TOKEN_ENV: &str = "LFRERANK_API_TOKEN";

/// One prompting call. `attempt` counts calls already made for this LF so
/// stateless mocks can derive an independent stream per call.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub lf: &'a LogicalForm,
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_tokens: usize,
    pub n: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default)]
    pub token_logprobs: Vec<f64>,
}

/// Anything that can sample utterances for a prompt. Implementations must
/// tolerate concurrent calls.
pub trait Generator: Send + Sync {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>> {
        (**self).sample(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>> {
        (**self).sample(request)
    }
}

/// Bounded exponential backoff.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
            max_backoff: Duration::from_secs(30),
        }
    }
}

/// Outcome of one try inside [`RetryPolicy::run`].
#[derive(Debug)]
pub enum Attempt {
    Transient(String),
    Permanent(Error),
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry as i32);
        let secs = self.initial_backoff.as_secs_f64() * factor;
        Duration::from_secs_f64(secs.min(self.max_backoff.as_secs_f64()))
    }

    /// Run `op` until it succeeds, fails permanently, or retries run out.
    pub fn run<T>(&self, mut op: impl FnMut() -> std::result::Result<T, Attempt>) -> Result<T> {
        let mut retry = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(Attempt::Permanent(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => {
                    if retry >= self.max_retries {
                        return Err(Error::Transport(format!(
                            "giving up after {} attempt(s): {msg}",
                            retry + 1
                        )));
                    }
                    let wait = self.backoff(retry);
                    log::warn!("transient failure ({msg}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                    retry += 1;
                }
            }
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: usize,
    n: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<Completion>,
}

/// Client for an HTTP completion endpoint:
/// `POST {prompt, temperature, max_tokens, n}` → `{choices: [{text, token_logprobs}]}`.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: String,
    token: Option<String>,
    retry: RetryPolicy,
    agent: ureq::Agent,
    split_numbered_lists: bool,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            token: None,
            retry: RetryPolicy::default(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
            split_numbered_lists: false,
        }
    }

    /// Token from [`API_TOKEN_ENV`], if set.
    pub fn with_env_token(self) -> Self {
        let token = std::env::var(API_TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Self { token, ..self }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = ureq::AgentBuilder::new().timeout(timeout).build();
        self
    }

    /// Treat each returned choice as a numbered list of candidates, as chat
    /// models produce for instruction-style prompts.
    pub fn splitting_numbered_lists(mut self, on: bool) -> Self {
        self.split_numbered_lists = on;
        self
    }

    fn call_once(&self, body: &WireRequest<'_>) -> std::result::Result<WireResponse, Attempt> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp.into_json::<WireResponse>().map_err(|e| {
                Attempt::Permanent(Error::Generator(format!("bad response body: {e}")))
            }),
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Err(Attempt::Transient(format!("HTTP {code}: {detail}")))
                } else {
                    Err(Attempt::Permanent(Error::Generator(format!(
                        "HTTP {code}: {detail}"
                    ))))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Attempt::Transient(t.to_string())),
        }
    }
}

impl Generator for HttpGenerator {
    fn sample(&self, request: &GenerationRequest<'_>) -> Result<Vec<Completion>> {
        let body = WireRequest {
            prompt: request.prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            n: request.n,
        };
        let resp = self.retry.run(|| self.call_once(&body))?;
        if !self.split_numbered_lists {
            return Ok(resp.choices);
        }
        Ok(resp
            .choices
            .into_iter()
            .flat_map(|c| {
                let lps = c.token_logprobs;
                parse_numbered_list(&c.text)
                    .into_iter()
                    .map(move |text| Completion {
                        text,
                        token_logprobs: lps.clone(),
                    })
            })
            .collect())
    }
}
