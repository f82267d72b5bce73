//! Terminal labeling session for building a human-judged evaluation set.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::data::{load_labels, CandidateSet, LabeledSet};
use crate::error::{Error, Result};

/// Shown before every set.
pub const LABELING_GUIDE: [&str; 5] = [
    "Mark 0 if content present in the reference is missing from the candidate.",
    "Mark 0 if the candidate adds or changes content the reference does not contain.",
    "Mark 0 if it reads clearly worse than the other candidates in this set.",
    "Mark 0 if raw logical-form material (variables, identifiers) leaks into the text.",
    "Otherwise mark 1.",
];

/// Labels persisted one JSON line per set, appended as each set is finished.
pub struct LabelStore {
    path: PathBuf,
    done: HashMap<String, LabeledSet>,
}

impl LabelStore {
    pub fn open(path: &Path) -> Result<Self> {
        let done = if path.exists() {
            load_labels(path)?.into_iter().map(|l| (l.lf_id.clone(), l)).collect()
        } else {
            HashMap::new()
        };
        Ok(LabelStore { path: path.to_path_buf(), done })
    }

    pub fn contains(&self, lf_id: &str) -> bool {
        self.done.contains_key(lf_id)
    }

    pub fn get(&self, lf_id: &str) -> Option<&LabeledSet> {
        self.done.get(lf_id)
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn append(&mut self, labeled: LabeledSet) -> Result<()> {
        let ctx = || format!("appending to {}", self.path.display());
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(ctx(), e))?;
        writeln!(f, "{}", serde_json::to_string(&labeled)?).map_err(|e| Error::io(ctx(), e))?;
        f.sync_data().map_err(|e| Error::io(ctx(), e))?;
        self.done.insert(labeled.lf_id.clone(), labeled);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSummary {
    pub labeled_now: usize,
    pub skipped: usize,
    /// The input ended before every set was labeled.
    pub interrupted: bool,
}

struct Tokens<R> {
    input: R,
    pending: std::collections::VecDeque<String>,
}

impl<R: BufRead> Tokens<R> {
    fn next(&mut self) -> Result<Option<String>> {
        loop {
            if let Some(t) = self.pending.pop_front() {
                return Ok(Some(t));
            }
            let mut line = String::new();
            let n = self.input.read_line(&mut line).map_err(|e| Error::io("reading labels", e))?;
            if n == 0 {
                return Ok(None);
            }
            self.pending.extend(line.split_whitespace().map(str::to_string));
        }
    }
}

/// Walk through every set not yet in `store`, asking for a 0/1 label per
/// candidate. Answers may be typed one per line or several per line. A set
/// is saved only once all its candidates are labeled.
pub fn annotate<R: BufRead, W: Write>(
    sets: &[CandidateSet],
    input: R,
    mut output: W,
    store: &mut LabelStore,
) -> Result<AnnotationSummary> {
    let io = |e| Error::io("writing prompt", e);
    let mut tokens = Tokens { input, pending: Default::default() };
    let mut summary = AnnotationSummary { labeled_now: 0, skipped: 0, interrupted: false };
    let total = sets.len();
    for (k, set) in sets.iter().enumerate() {
        if store.contains(set.lf_id()) {
            summary.skipped += 1;
            continue;
        }
        let reference = set.reference()?;
        writeln!(output, "\n=== set {}/{total}: {} ===", k + 1, set.lf_id()).map_err(io)?;
        writeln!(output, "logical form: {}", set.lf()).map_err(io)?;
        writeln!(output, "reference:    {reference}").map_err(io)?;
        for (i, rule) in LABELING_GUIDE.iter().enumerate() {
            writeln!(output, "  ({}) {rule}", i + 1).map_err(io)?;
        }
        let mut labels = Vec::with_capacity(set.len());
        for (i, cand) in set.candidates().iter().enumerate() {
            writeln!(output, "[{}/{}] {}", i + 1, set.len(), cand.text).map_err(io)?;
            loop {
                write!(output, "label (1 correct, 0 incorrect): ").map_err(io)?;
                output.flush().map_err(io)?;
                match tokens.next()?.as_deref() {
                    None => {
                        writeln!(output, "\ninput closed; {} set(s) saved this session", summary.labeled_now)
                            .map_err(io)?;
                        summary.interrupted = true;
                        return Ok(summary);
                    }
                    Some("1") => {
                        labels.push(1);
                        break;
                    }
                    Some("0") => {
                        labels.push(0);
                        break;
                    }
                    Some(other) => {
                        writeln!(output, "`{other}` is not a label; type 0 or 1").map_err(io)?;
                    }
                }
            }
        }
        store.append(LabeledSet::new(set.lf_id(), labels)?)?;
        summary.labeled_now += 1;
    }
    Ok(summary)
}
