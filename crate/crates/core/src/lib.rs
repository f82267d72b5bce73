//! Generate-and-rerank toolkit for natural-language generation from logical forms.
//!
//! The pipeline has five stages, each usable on its own:
//!
//! 1. [`genclient`] prompts a generator until each logical form has an n-best
//!    list of unique candidates.
//! 2. [`scoring`] computes reference-based quality scores per metric and folds
//!    them into a single normalized quality signal.
//! 3. [`reranker`] trains a linear scorer over hashed features with a weighted
//!    pairwise margin loss.
//! 4. [`selection`] picks one candidate per set (random, self-consistency,
//!    generator probability, reranker, blended, oracle).
//! 5. [`evaluation`] measures metric/human alignment, pipeline quality and
//!    significance, and runs n-best size sweeps.
//!
//! Stage artifacts are line-delimited JSON files described in [`data::io`].

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod genclient;
pub mod reranker;
pub mod scoring;
pub mod selection;
pub mod util;

pub use error::{Error, Result};
