use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LogicalForm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "style")]
pub enum PromptStyle {
    /// Bare `Query:`/`Question:` pairs ending in an open `Question:` slot.
    Completion,
    /// Chat-style instructions asking for a numbered list of candidates.
    Instruction { candidates_requested: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// First line of the prompt, naming the dataset.
    pub header: String,
    pub style: PromptStyle,
    pub num_exemplars: usize,
}

impl PromptTemplate {
    pub const DEFAULT_EXEMPLARS: usize = 15;

    /// Completion-style template, e.g. `completion("geo_query")`.
    pub fn completion(dataset: &str) -> Self {
        Self {
            header: format!("# {dataset} Dataset:"),
            style: PromptStyle::Completion,
            num_exemplars: Self::DEFAULT_EXEMPLARS,
        }
    }

    /// Instruction-style template for chat models.
    pub fn instruction(dataset: &str, candidates_requested: usize) -> Self {
        Self {
            header: format!(
                "Here are some examples of query/question pairs from the {dataset} data set."
            ),
            style: PromptStyle::Instruction {
                candidates_requested,
            },
            num_exemplars: Self::DEFAULT_EXEMPLARS,
        }
    }

    pub fn with_exemplars(mut self, k: usize) -> Self {
        self.num_exemplars = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_exemplars == 0 {
            return Err(Error::InvalidArgument("num_exemplars must be >= 1".into()));
        }
        if let PromptStyle::Instruction {
            candidates_requested: 0,
        } = self.style
        {
            return Err(Error::InvalidArgument(
                "instruction prompts must request at least one candidate".into(),
            ));
        }
        Ok(())
    }

    fn input_label(&self) -> &'static str {
        match self.style {
            PromptStyle::Completion => "Query:",
            PromptStyle::Instruction { .. } => "logical form:",
        }
    }

    fn output_label(&self) -> &'static str {
        match self.style {
            PromptStyle::Completion => "Question:",
            PromptStyle::Instruction { .. } => "natural language:",
        }
    }
}

/// Draw up to `k` exemplars uniformly without replacement from `pool`,
/// never picking `target` itself or records lacking a reference.
pub fn draw_exemplars<'a, R: Rng + ?Sized>(
    pool: &'a [LogicalForm],
    target: &LogicalForm,
    k: usize,
    rng: &mut R,
) -> Vec<&'a LogicalForm> {
    let eligible: Vec<&LogicalForm> = pool
        .iter()
        .filter(|e| e.id != target.id && e.reference.is_some())
        .collect();
    eligible.choose_multiple(rng, k).copied().collect()
}

/// Render a few-shot prompt for `lf` from the first `num_exemplars` usable
/// entries of `exemplars`.
pub fn build_prompt(
    lf: &LogicalForm,
    exemplars: &[&LogicalForm],
    template: &PromptTemplate,
) -> Result<String> {
    template.validate()?;
    let usable: Vec<&LogicalForm> = exemplars
        .iter()
        .copied()
        .filter(|e| e.id != lf.id && e.reference.is_some())
        .take(template.num_exemplars)
        .collect();
    if usable.len() < template.num_exemplars {
        return Err(Error::InvalidArgument(format!(
            "prompt for `{}` needs {} exemplars but only {} are available",
            lf.id,
            template.num_exemplars,
            usable.len()
        )));
    }
    let (inp, out) = (template.input_label(), template.output_label());
    let mut prompt = String::new();
    prompt.push_str(&template.header);
    prompt.push_str("\n\n");
    for e in usable {
        let reference = e.reference()?;
        prompt.push_str(&format!("{inp} {}\n{out} {reference}\n\n", e.lf));
    }
    match template.style {
        PromptStyle::Completion => {
            prompt.push_str(&format!("{inp} {}\n{out}", lf.lf));
        }
        PromptStyle::Instruction {
            candidates_requested,
        } => {
            prompt.push_str(&format!(
                "Please generate {candidates_requested} natural language candidates for following logical form. Present your answer as a numbered list.\n{inp} {}",
                lf.lf
            ));
        }
    }
    Ok(prompt)
}

/// Prompt asking a chat model to pick the best candidate for `lf`.
pub fn render_rerank_prompt(
    lf: &LogicalForm,
    exemplars: &[&LogicalForm],
    candidates: &[&str],
    dataset: &str,
) -> Result<String> {
    let mut prompt = format!(
        "Here are some examples of query/question pairs from the {dataset} data set.\n\n"
    );
    for e in exemplars.iter().filter(|e| e.id != lf.id) {
        prompt.push_str(&format!(
            "logical form: {}\nnatural language: {}\n\n",
            e.lf,
            e.reference()?
        ));
    }
    prompt.push_str(&format!(
        "I would like for you to rank some natural language candidates for the following logical form.\nlogical form: {}\n\nHere are the candidates:\n\n",
        lf.lf
    ));
    for c in candidates {
        prompt.push_str(c);
        prompt.push('\n');
    }
    prompt.push_str(
        "\nWhich of these candidates is the best? Please return the text of the best candidate in quotation marks.",
    );
    Ok(prompt)
}

/// Split a chat response formatted as `1. text` / `2) text` lines into items.
/// Lines without a number prefix are ignored.
pub fn parse_numbered_list(response: &str) -> Vec<String> {
    response
        .lines()
        .filter_map(|line| {
            let line = line.trim();
            let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
            if digits == 0 {
                return None;
            }
            let rest = &line[digits..];
            let rest = rest
                .strip_prefix('.')
                .or_else(|| rest.strip_prefix(')'))?
                .trim();
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::util::seeded_rng;

    fn lf(id: &str, lf: &str, r: Option<&str>) -> LogicalForm {
        LogicalForm::new(id, lf, r.map(String::from), Split::Train).unwrap()
    }

    fn pool(k: usize) -> Vec<LogicalForm> {
        (0..k)
            .map(|i| lf(&format!("e{i}"), &format!("answer ( loc_1 ( m{i} ) )"), Some(&format!("where is m{i}"))))
            .collect()
    }

    #[test]
    fn fifteen_exemplar_completion_prompt() {
        let p = pool(20);
        let target = lf("t", "answer ( largest ( intersection ( state , loc_2 ( m0 ) ) ) )", None);
        let mut rng = seeded_rng(7);
        let ex = draw_exemplars(&p, &target, 15, &mut rng);
        let prompt = build_prompt(&target, &ex, &PromptTemplate::completion("geo_query")).unwrap();
        assert!(prompt.starts_with("# geo_query Dataset:\n\nQuery: "));
        assert_eq!(prompt.matches("Query:").count(), 16);
        assert_eq!(prompt.matches("Question:").count(), 16);
        assert!(prompt.ends_with(
            "Query: answer ( largest ( intersection ( state , loc_2 ( m0 ) ) ) )\nQuestion:"
        ));
    }

    #[test]
    fn too_few_exemplars_is_an_error() {
        let target = lf("t", "answer ( state )", None);
        let err = build_prompt(&target, &[], &PromptTemplate::completion("geo_query"));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_exemplar_boundary() {
        let p = pool(1);
        let target = lf("t", "answer ( state )", None);
        let refs: Vec<&LogicalForm> = p.iter().collect();
        let tpl = PromptTemplate::completion("geo_query").with_exemplars(1);
        let prompt = build_prompt(&target, &refs, &tpl).unwrap();
        assert_eq!(prompt.matches("Question: where is").count(), 1);
        assert_eq!(prompt.matches("Query:").count(), 2);
    }

    #[test]
    fn target_is_never_its_own_exemplar() {
        let p = pool(3);
        let target = p[1].clone();
        let mut rng = seeded_rng(1);
        let ex = draw_exemplars(&p, &target, 3, &mut rng);
        assert_eq!(ex.len(), 2);
        assert!(ex.iter().all(|e| e.id != target.id));
        let refs: Vec<&LogicalForm> = p.iter().collect();
        let tpl = PromptTemplate::completion("geo_query").with_exemplars(3);
        assert!(build_prompt(&target, &refs, &tpl).is_err());
    }

    #[test]
    fn instruction_prompt_layout() {
        let p = pool(2);
        let refs: Vec<&LogicalForm> = p.iter().collect();
        let target = lf("t", "answer ( state )", None);
        let tpl = PromptTemplate::instruction("GeoQuery", 8).with_exemplars(2);
        let prompt = build_prompt(&target, &refs, &tpl).unwrap();
        assert!(prompt.starts_with("Here are some examples of query/question pairs from the GeoQuery data set.\n\nlogical form:"));
        assert!(prompt.contains("Please generate 8 natural language candidates"));
        assert!(prompt.ends_with("logical form: answer ( state )"));
        assert_eq!(prompt.matches("natural language:").count(), 2);
    }

    #[test]
    fn rerank_prompt_lists_candidates() {
        let p = pool(1);
        let refs: Vec<&LogicalForm> = p.iter().collect();
        let target = lf("t", "answer ( state )", None);
        let prompt = render_rerank_prompt(&target, &refs, &["list the states", "what states exist"], "GeoQuery").unwrap();
        assert!(prompt.contains("Here are the candidates:\n\nlist the states\nwhat states exist\n"));
        assert!(prompt.ends_with("in quotation marks."));
    }

    #[test]
    fn numbered_lists() {
        let items = parse_numbered_list("Sure!\n1. what states exist\n2) name all the states\n\n3.   \nfoo\n10. list the states");
        assert_eq!(items, vec!["what states exist", "name all the states", "list the states"]);
    }
}
