//! Pipeline configuration file: TOML with `${VAR}` environment interpolation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};
use crate::genclient::API_TOKEN_ENV;
use crate::reranker::{FeatureConfig, Optimizer, TrainConfig, WeightMode};
use crate::scoring::{MetricChoice, NormalizationScope};
use crate::selection::Strategy;
use crate::util::parse_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub workers: usize,
    /// Artifact directory, relative to the config file.
    pub out_dir: PathBuf,
    pub data: DataSection,
    pub generator: GeneratorSection,
    pub scoring: ScoringSection,
    pub features: FeatureConfig,
    pub training: TrainingSection,
    pub selection: SelectionSection,
    pub evaluation: EvaluationSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            workers: 1,
            out_dir: PathBuf::from("run"),
            data: DataSection::default(),
            generator: GeneratorSection::default(),
            scoring: ScoringSection::default(),
            features: FeatureConfig::default(),
            training: TrainingSection::default(),
            selection: SelectionSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Line-delimited dataset with train/dev/test records.
    pub dataset: PathBuf,
    /// Rewrite Freebase identifiers with the built-in table before prompting.
    pub map_freebase_ids: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    /// `mock` or `http`.
    pub mode: String,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API token.
    pub api_token_env: String,
    pub temperature: f64,
    pub target_n: usize,
    pub max_attempts: usize,
    pub max_tokens: usize,
    pub num_exemplars: usize,
    /// `completion` or `instruction`.
    pub prompt_style: String,
    pub dataset_name: String,
    pub redraw_exemplars: bool,
    pub timeout_secs: u64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            mode: "mock".into(),
            endpoint: None,
            api_token_env: API_TOKEN_ENV.into(),
            temperature: 0.7,
            target_n: 8,
            max_attempts: 40,
            max_tokens: 64,
            num_exemplars: 5,
            prompt_style: "completion".into(),
            dataset_name: "geo_query".into(),
            redraw_exemplars: false,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    /// `bleu`, `toy-parser`, or `ext:<command-or-url>`.
    pub metrics: Vec<String>,
    pub normalization: NormalizationScope,
    pub batch_size: usize,
    pub timeout_secs: u64,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection {
            metrics: vec!["bleu".into(), "toy-parser".into()],
            normalization: NormalizationScope::PerSet,
            batch_size: 64,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub gamma: f64,
    pub warmup_epochs: usize,
    pub weight_mode: WeightMode,
    /// Used only when the dataset has no dev split.
    pub dev_frac: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            max_epochs: t.max_epochs,
            patience: t.patience,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            gamma: t.gamma,
            warmup_epochs: t.warmup_epochs,
            weight_mode: t.weight_mode,
            dev_frac: 0.1,
        }
    }
}

impl TrainingSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed,
            gamma: self.gamma,
            warmup_epochs: self.warmup_epochs,
            weight_mode: self.weight_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub strategies: Vec<String>,
    /// `start:end:step`.
    pub lambda_grid: String,
    pub standardize_blend: bool,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            strategies: Strategy::ALL.iter().map(|s| s.to_string()).collect(),
            lambda_grid: "0:1:0.05".into(),
            standardize_blend: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub baseline: String,
    pub resamples: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { baseline: "generator".into(), resamples: crate::evaluation::DEFAULT_RESAMPLES }
    }
}

/// A validated config plus what is needed to reproduce it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    /// The file as written, before interpolation (safe to record).
    pub raw: toml::Table,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out_dir)
    }
}

fn issue(field: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { field: field.into(), message: message.into() }
}

/// Replace `${NAME}` in every string value with the environment variable's
/// value. Unset variables are reported, not silently emptied.
fn interpolate(value: &mut toml::Value, path: &str, lookup: &dyn Fn(&str) -> Option<String>, issues: &mut Vec<ConfigIssue>) {
    match value {
        toml::Value::String(s) => {
            let mut out = String::with_capacity(s.len());
            let mut rest = s.as_str();
            while let Some(start) = rest.find("${") {
                out.push_str(&rest[..start]);
                let after = &rest[start + 2..];
                match after.find('}') {
                    Some(end) => {
                        let name = &after[..end];
                        match lookup(name) {
                            Some(v) => out.push_str(&v),
                            None => issues.push(issue(path, format!("environment variable `{name}` is not set"))),
                        }
                        rest = &after[end + 1..];
                    }
                    None => {
                        issues.push(issue(path, "unterminated `${` in value"));
                        out.push_str(&rest[start..]);
                        rest = "";
                    }
                }
            }
            out.push_str(rest);
            *s = out;
        }
        toml::Value::Array(items) => {
            for (i, v) in items.iter_mut().enumerate() {
                interpolate(v, &format!("{path}[{i}]"), lookup, issues);
            }
        }
        toml::Value::Table(t) => {
            for (k, v) in t.iter_mut() {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                interpolate(v, &child, lookup, issues);
            }
        }
        _ => {}
    }
}

const SECTIONS: [&str; 7] = ["data", "generator", "scoring", "features", "training", "selection", "evaluation"];
const TOP_LEVEL: [&str; 3] = ["seed", "workers", "out_dir"];

fn section<T: serde::de::DeserializeOwned + Default>(
    table: &toml::Table,
    name: &str,
    issues: &mut Vec<ConfigIssue>,
) -> T {
    match table.get(name) {
        None => T::default(),
        Some(v) => match v.clone().try_into::<T>() {
            Ok(t) => t,
            Err(e) => {
                issues.push(issue(name, e.message().trim().to_string()));
                T::default()
            }
        },
    }
}

/// Parse and validate config text, collecting every problem found.
pub fn parse_config(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(Config, toml::Table)> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![issue("<file>", e.message().trim().to_string())]))?;
    let mut issues = Vec::new();
    let mut value = toml::Value::Table(raw.clone());
    interpolate(&mut value, "", lookup, &mut issues);
    let table = match value {
        toml::Value::Table(t) => t,
        _ => unreachable!("root stays a table"),
    };
    for key in table.keys() {
        if !SECTIONS.contains(&key.as_str()) && !TOP_LEVEL.contains(&key.as_str()) {
            issues.push(issue(key, format!("unknown key (expected one of: {}, {})", TOP_LEVEL.join(", "), SECTIONS.join(", "))));
        }
    }
    let mut config = Config {
        data: section(&table, "data", &mut issues),
        generator: section(&table, "generator", &mut issues),
        scoring: section(&table, "scoring", &mut issues),
        features: section(&table, "features", &mut issues),
        training: section(&table, "training", &mut issues),
        selection: section(&table, "selection", &mut issues),
        evaluation: section(&table, "evaluation", &mut issues),
        ..Config::default()
    };
    for key in TOP_LEVEL {
        let Some(v) = table.get(key) else { continue };
        let ok = match key {
            "seed" => v.as_integer().filter(|i| *i >= 0).map(|i| config.seed = i as u64).is_some(),
            "workers" => v.as_integer().filter(|i| *i >= 1).map(|i| config.workers = i as usize).is_some(),
            _ => v.as_str().map(|s| config.out_dir = PathBuf::from(s)).is_some(),
        };
        if !ok {
            let expect = match key {
                "seed" => "a non-negative integer",
                "workers" => "an integer >= 1",
                _ => "a path string",
            };
            issues.push(issue(key, format!("expected {expect}")));
        }
    }
    issues.extend(check_ranges(&config));
    if issues.is_empty() {
        Ok((config, raw))
    } else {
        Err(Error::Config(issues))
    }
}

fn check_ranges(c: &Config) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    if c.data.dataset.as_os_str().is_empty() {
        out.push(issue("data.dataset", "required"));
    }
    let g = &c.generator;
    match g.mode.as_str() {
        "mock" => {}
        "http" => {
            if g.endpoint.as_deref().map_or(true, |e| e.trim().is_empty()) {
                out.push(issue("generator.endpoint", "required when generator.mode = \"http\""));
            }
        }
        other => out.push(issue("generator.mode", format!("unknown mode `{other}` (allowed: mock, http)"))),
    }
    if !(0.0..=2.0).contains(&g.temperature) {
        out.push(issue("generator.temperature", format!("must be in [0, 2], got {}", g.temperature)));
    }
    if g.target_n == 0 {
        out.push(issue("generator.target_n", "must be >= 1"));
    }
    if g.max_attempts < g.target_n {
        out.push(issue("generator.max_attempts", format!("must be >= target_n ({})", g.target_n)));
    }
    if g.max_tokens == 0 {
        out.push(issue("generator.max_tokens", "must be >= 1"));
    }
    if !matches!(g.prompt_style.as_str(), "completion" | "instruction") {
        out.push(issue(
            "generator.prompt_style",
            format!("unknown style `{}` (allowed: completion, instruction)", g.prompt_style),
        ));
    }
    if g.timeout_secs == 0 {
        out.push(issue("generator.timeout_secs", "must be >= 1"));
    }
    let s = &c.scoring;
    if s.metrics.is_empty() {
        out.push(issue("scoring.metrics", "at least one metric is required"));
    }
    for (i, m) in s.metrics.iter().enumerate() {
        if let Err(e) = m.parse::<MetricChoice>() {
            out.push(issue(format!("scoring.metrics[{i}]"), e.to_string()));
        }
    }
    if s.batch_size == 0 {
        out.push(issue("scoring.batch_size", "must be >= 1"));
    }
    if let Err(e) = c.features.validate() {
        out.push(issue("features", e.to_string()));
    }
    let t = &c.training;
    if t.max_epochs == 0 {
        out.push(issue("training.max_epochs", "must be >= 1"));
    }
    if t.patience == 0 {
        out.push(issue("training.patience", "must be >= 1"));
    }
    if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
        out.push(issue("training.learning_rate", format!("must be > 0, got {}", t.learning_rate)));
    }
    if !(t.gamma >= 0.0 && t.gamma.is_finite()) {
        out.push(issue("training.gamma", format!("must be >= 0, got {}", t.gamma)));
    }
    if !(t.dev_frac > 0.0 && t.dev_frac < 1.0) {
        out.push(issue("training.dev_frac", format!("must be in (0, 1), got {}", t.dev_frac)));
    }
    let sel = &c.selection;
    if sel.strategies.is_empty() {
        out.push(issue("selection.strategies", "at least one strategy is required"));
    }
    for (i, name) in sel.strategies.iter().enumerate() {
        if name.parse::<Strategy>().is_err() {
            out.push(issue(
                format!("selection.strategies[{i}]"),
                format!("unknown strategy `{name}` (allowed: {})", Strategy::allowed()),
            ));
        }
    }
    match parse_grid(&sel.lambda_grid) {
        Ok(grid) if grid.iter().any(|l| !(0.0..=1.0).contains(l)) => {
            out.push(issue("selection.lambda_grid", "values must lie in [0, 1]"))
        }
        Ok(_) => {}
        Err(e) => out.push(issue("selection.lambda_grid", e)),
    }
    if c.evaluation.baseline.parse::<Strategy>().is_err() {
        out.push(issue(
            "evaluation.baseline",
            format!("unknown strategy `{}` (allowed: {})", c.evaluation.baseline, Strategy::allowed()),
        ));
    }
    if c.evaluation.resamples == 0 {
        out.push(issue("evaluation.resamples", "must be >= 1"));
    }
    out
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let (config, raw) = parse_config(&text, &|name| std::env::var(name).ok())?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, raw, base_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text, &no_env) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let (c, _) = parse_config("[data]\ndataset = \"d.jsonl\"\n", &no_env).unwrap();
        assert_eq!(c.generator.mode, "mock");
        assert_eq!(c.selection.strategies.len(), 6);
        assert_eq!(c.features.hash_dim, 1 << 18);
    }

    #[test]
    fn negative_temperature_names_the_field() {
        let v = issues("[data]\ndataset = \"d\"\n[generator]\ntemperature = -1.0\n");
        assert!(v.iter().any(|i| i.field == "generator.temperature"));
    }

    #[test]
    fn unknown_strategy_lists_allowed() {
        let v = issues("[data]\ndataset = \"d\"\n[selection]\nstrategies = [\"random\", \"best\"]\n");
        let i = v.iter().find(|i| i.field == "selection.strategies[1]").unwrap();
        assert!(i.message.contains("self-consistency"));
    }

    #[test]
    fn http_mode_needs_endpoint() {
        let v = issues("[data]\ndataset = \"d\"\n[generator]\nmode = \"http\"\n");
        assert!(v.iter().any(|i| i.field == "generator.endpoint"));
    }

    #[test]
    fn all_problems_reported_together() {
        let v = issues(
            "colour = 1\n[generator]\ntemperature = 9.0\nmode = \"cloud\"\n[training]\npatience = \"x\"\n[scoring]\nmetrics = [\"rouge\"]\n",
        );
        let fields: Vec<&str> = v.iter().map(|i| i.field.as_str()).collect();
        for f in ["colour", "generator.temperature", "generator.mode", "training", "scoring.metrics[0]", "data.dataset"] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn env_interpolation() {
        let lookup = |n: &str| (n == "EP").then(|| "http://localhost:9".to_string());
        let text = "[data]\ndataset = \"d\"\n[generator]\nmode = \"http\"\nendpoint = \"${EP}\"\n";
        let (c, raw) = parse_config(text, &lookup).unwrap();
        assert_eq!(c.generator.endpoint.as_deref(), Some("http://localhost:9"));
        // the raw snapshot keeps the placeholder
        assert_eq!(raw["generator"]["endpoint"].as_str(), Some("${EP}"));
        let v = issues(text);
        assert!(v[0].message.contains("EP"));
    }

    #[test]
    fn syntax_error_is_a_config_error() {
        assert!(matches!(parse_config("[data\n", &no_env), Err(Error::Config(_))));
    }
}
