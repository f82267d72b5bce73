//! Domain data model, persistence, and logical-form preprocessing.

pub mod freebase;
pub mod io;
mod types;

pub use freebase::{map_freebase_ids, IdentifierMap};
pub use io::{
    load_candidates, load_dataset, load_labels, load_scores, save_candidates, save_labels,
    save_scores, MetricScores,
};
pub use types::{Candidate, CandidateSet, LabeledSet, LogicalForm, QualityTable, Split};
