//! Corpus-level comparison of selection strategies.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bootstrap::paired_bootstrap;
use crate::data::QualityTable;
use crate::error::{Error, Result};
use crate::selection::{SelectionResult, Strategy};
use crate::util::derive_seed;

/// Name under which [`QualityTable::combined`] can be requested.
pub const COMBINED_METRIC: &str = "combined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub strategy: Strategy,
    pub sets: usize,
    /// Mean score of the chosen candidates, per metric.
    pub means: BTreeMap<String, f64>,
    /// Baseline strategy -> metric -> one-sided paired-bootstrap p-value for
    /// this strategy beating the baseline.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub significance: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance_test: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineEvalConfig {
    pub metrics: Vec<String>,
    pub baseline: Option<Strategy>,
    pub resamples: usize,
    pub seed: u64,
}

fn chosen_scores(
    selections: &[&SelectionResult],
    tables: &HashMap<&str, &QualityTable>,
    metric: &str,
) -> Result<Vec<f64>> {
    selections
        .iter()
        .map(|s| {
            let t = tables.get(s.lf_id.as_str()).ok_or_else(|| {
                Error::InvalidArgument(format!("no quality scores for selected set `{}`", s.lf_id))
            })?;
            let v = if metric == COMBINED_METRIC { t.combined()? } else { t.metric(metric)? };
            v.get(s.chosen_index).copied().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "set `{}`: chosen index {} is beyond its {} `{metric}` scores",
                    s.lf_id,
                    s.chosen_index,
                    v.len()
                ))
            })
        })
        .collect()
}

/// Mean chosen-candidate quality per strategy found in `selections`, with
/// significance against `cfg.baseline` when it is present.
pub fn evaluate_pipeline(
    selections: &[SelectionResult],
    tables: &[QualityTable],
    cfg: &PipelineEvalConfig,
) -> Result<Vec<PipelineReport>> {
    if cfg.metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics to evaluate".into()));
    }
    let table_index: HashMap<&str, &QualityTable> = tables.iter().map(|t| (t.lf_id.as_str(), t)).collect();
    let mut by_strategy: BTreeMap<Strategy, Vec<&SelectionResult>> = BTreeMap::new();
    for s in selections {
        by_strategy.entry(s.strategy).or_default().push(s);
    }
    if by_strategy.is_empty() {
        return Err(Error::InvalidArgument("no selections to evaluate".into()));
    }
    for (strategy, rows) in by_strategy.iter_mut() {
        rows.sort_by(|a, b| a.lf_id.cmp(&b.lf_id));
        if let Some(w) = rows.windows(2).find(|w| w[0].lf_id == w[1].lf_id) {
            return Err(Error::DuplicateId(format!("`{strategy}` selects twice for set `{}`", w[0].lf_id)));
        }
    }
    let baseline_rows = match cfg.baseline {
        Some(b) => Some(by_strategy.get(&b).ok_or_else(|| {
            Error::InvalidArgument(format!("baseline `{b}` has no selections in the input"))
        })?),
        None => None,
    };

    let mut reports = Vec::new();
    for (strategy, rows) in &by_strategy {
        let mut means = BTreeMap::new();
        let mut significance = BTreeMap::new();
        for metric in &cfg.metrics {
            let mine = chosen_scores(rows, &table_index, metric)?;
            means.insert(metric.clone(), mine.iter().sum::<f64>() / mine.len() as f64);
            if let (Some(base), Some(base_rows)) = (cfg.baseline, baseline_rows) {
                if base == *strategy {
                    continue;
                }
                let base_map: HashMap<&str, &SelectionResult> =
                    base_rows.iter().map(|s| (s.lf_id.as_str(), *s)).collect();
                let paired: Vec<&SelectionResult> = rows
                    .iter()
                    .map(|s| {
                        base_map.get(s.lf_id.as_str()).copied().ok_or_else(|| {
                            Error::InvalidArgument(format!("baseline `{base}` has no selection for set `{}`", s.lf_id))
                        })
                    })
                    .collect::<Result<_>>()?;
                let theirs = chosen_scores(&paired, &table_index, metric)?;
                let seed = derive_seed(cfg.seed, metric, *strategy as u64);
                let p = paired_bootstrap(&mine, &theirs, cfg.resamples, seed)?;
                significance
                    .entry(base.to_string())
                    .or_insert_with(BTreeMap::new)
                    .insert(metric.clone(), p);
            }
        }
        reports.push(PipelineReport {
            strategy: *strategy,
            sets: rows.len(),
            means,
            significance_test: (!significance.is_empty())
                .then(|| format!("paired bootstrap, one-sided, {} resamples", cfg.resamples)),
            significance,
        });
    }
    Ok(reports)
}

/// Fixed-width table of means with p-values in parentheses.
pub fn render_pipeline_table(reports: &[PipelineReport]) -> String {
    let metrics: Vec<&String> = reports.first().map(|r| r.means.keys().collect()).unwrap_or_default();
    let mut out = format!("{:<18}", "strategy");
    for m in &metrics {
        let _ = write!(out, "{:>22}", m);
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<18}", r.strategy.as_str());
        for m in &metrics {
            let p = r.significance.values().next().and_then(|x| x.get(*m));
            let cell = match p {
                Some(p) => format!("{:.4} (p={:.4})", r.means[*m], p),
                None => format!("{:.4}", r.means[*m]),
            };
            let _ = write!(out, "{cell:>22}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(lf: &str, i: usize, s: Strategy) -> SelectionResult {
        SelectionResult { lf_id: lf.into(), chosen_index: i, strategy: s, text: String::new(), score_breakdown: None }
    }

    fn tables(n: usize) -> Vec<QualityTable> {
        (0..n)
            .map(|k| {
                let mut t = QualityTable::new(format!("s{k:03}"));
                let base = (k as f64 * 0.37).sin();
                t.insert("m", vec![base, base + 0.5]).unwrap();
                t
            })
            .collect()
    }

    fn cfg(baseline: Option<Strategy>) -> PipelineEvalConfig {
        PipelineEvalConfig { metrics: vec!["m".into()], baseline, resamples: 10_000, seed: 1 }
    }

    #[test]
    fn consistent_gain_is_significant() {
        let t = tables(200);
        let mut s = Vec::new();
        for k in 0..200 {
            s.push(sel(&format!("s{k:03}"), 1, Strategy::Reranker));
            s.push(sel(&format!("s{k:03}"), 0, Strategy::Generator));
        }
        let r = evaluate_pipeline(&s, &t, &cfg(Some(Strategy::Generator))).unwrap();
        let rer = r.iter().find(|x| x.strategy == Strategy::Reranker).unwrap();
        let gen = r.iter().find(|x| x.strategy == Strategy::Generator).unwrap();
        assert!((rer.means["m"] - gen.means["m"] - 0.5).abs() < 1e-12);
        assert!(rer.significance["generator"]["m"] < 0.01);
        assert!(gen.significance.is_empty());
        let table = render_pipeline_table(&r);
        assert!(table.contains("reranker") && table.contains("p="));
    }

    #[test]
    fn identical_choices_have_p_one() {
        let t = tables(10);
        let mut s = Vec::new();
        for k in 0..10 {
            s.push(sel(&format!("s{k:03}"), 1, Strategy::Oracle));
            s.push(sel(&format!("s{k:03}"), 1, Strategy::Random));
        }
        let r = evaluate_pipeline(&s, &t, &cfg(Some(Strategy::Random))).unwrap();
        assert_eq!(r[0].means, r[1].means);
        let oracle = r.iter().find(|x| x.strategy == Strategy::Oracle).unwrap();
        assert_eq!(oracle.significance["random"]["m"], 1.0);
    }

    #[test]
    fn singleton_mean_is_the_chosen_score() {
        let t = tables(1);
        let r = evaluate_pipeline(&[sel("s000", 1, Strategy::Random)], &t, &cfg(None)).unwrap();
        assert_eq!(r[0].means["m"], t[0].metric("m").unwrap()[1]);
    }

    #[test]
    fn errors() {
        let t = tables(2);
        assert!(evaluate_pipeline(&[sel("zzz", 0, Strategy::Random)], &t, &cfg(None)).is_err());
        assert!(evaluate_pipeline(&[sel("s000", 5, Strategy::Random)], &t, &cfg(None)).is_err());
        let dup = [sel("s000", 0, Strategy::Random), sel("s000", 1, Strategy::Random)];
        assert!(evaluate_pipeline(&dup, &t, &cfg(None)).is_err());
        assert!(evaluate_pipeline(&[sel("s000", 0, Strategy::Random)], &t, &cfg(Some(Strategy::Generator))).is_err());
        let mut c = cfg(None);
        c.metrics = vec!["nope".into()];
        assert!(evaluate_pipeline(&[sel("s000", 0, Strategy::Random)], &t, &c).is_err());
    }
}
