//! Measuring metrics against human labels, comparing selection strategies,
//! n-best size sweeps, and the labeling session.

mod alignment;
mod annotate;
mod bootstrap;
mod pipeline;
mod sweep;

pub use alignment::{
    alignment_report, evaluate_alignment, pairwise_agreement, ranking_accuracy, top1_accuracy, top1_agreement,
    Accuracy, AlignmentReport, ScoredSet,
};
pub use annotate::{annotate, AnnotationSummary, LabelStore, LABELING_GUIDE};
pub use bootstrap::{paired_bootstrap, DEFAULT_RESAMPLES};
pub use pipeline::{evaluate_pipeline, render_pipeline_table, PipelineEvalConfig, PipelineReport, COMBINED_METRIC};
pub use sweep::{nbest_sweep, write_sweep_tsv, SweepCell, SweepConfig};
