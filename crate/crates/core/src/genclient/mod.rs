//! Candidate generation: few-shot prompts, generator clients, and the loops
//! that turn raw samples into deduplicated candidate sets.

mod client;
mod mock;
mod prompt;
mod sampling;

pub use client::{
    Completion, GenerationRequest, Generator, HttpGenerator, RetryPolicy, API_TOKEN_ENV,
};
pub use mock::{MockGenerator, ScriptedGenerator};
pub use prompt::{
    build_prompt, draw_exemplars, parse_numbered_list, render_rerank_prompt, PromptStyle,
    PromptTemplate,
};
pub use sampling::{
    build_variable_dataset, dedup_key, generate_until_unique, mean_token_logprob,
    BudgetBuilderConfig, BudgetOutcome, CandidateGenerator, Endpoint, GenerationOutcome,
    GeneratorConfig,
};
