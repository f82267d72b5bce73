//! Linear reranker over hashed features and its JSON file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::features::{featurize, FeatureConfig, SparseFeatures};
use super::train::{Optimizer, WeightMode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    #[serde(default)]
    pub dev_losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_mode: Option<WeightMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankerModel {
    pub feature_config: FeatureConfig,
    pub gamma: f64,
    pub bias: f64,
    pub weights: Vec<f64>,
    pub train_meta: TrainMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum WeightsRepr {
    Dense(Vec<f64>),
    Sparse { dim: usize, entries: Vec<(usize, f64)> },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    feature_config: FeatureConfig,
    gamma: f64,
    bias: f64,
    weights: WeightsRepr,
    train_meta: TrainMeta,
}

impl RerankerModel {
    pub fn zeros(feature_config: FeatureConfig, gamma: f64) -> Result<Self> {
        let m = RerankerModel {
            weights: vec![0.0; feature_config.num_weights()],
            feature_config,
            gamma,
            bias: 0.0,
            train_meta: TrainMeta::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_config.validate()?;
        if self.weights.len() != self.feature_config.num_weights() {
            return Err(Error::ModelMismatch(format!(
                "model has {} weights but its feature config needs {}",
                self.weights.len(),
                self.feature_config.num_weights()
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::ModelMismatch(format!("margin must be >= 0, got {}", self.gamma)));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::ModelMismatch("model has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn score_features(&self, x: &SparseFeatures) -> Result<f64> {
        let dot = x.dot(&self.weights).ok_or_else(|| {
            Error::ModelMismatch(format!(
                "feature index beyond the model's {} weights",
                self.weights.len()
            ))
        })?;
        Ok(dot + self.bias)
    }

    pub fn score(&self, lf: &str, candidate: &str) -> Result<f64> {
        self.score_features(&featurize(lf, candidate, &self.feature_config)?)
    }

    pub fn score_all<'a>(&self, lf: &str, candidates: impl IntoIterator<Item = &'a str>) -> Result<Vec<f64>> {
        candidates.into_iter().map(|c| self.score(lf, c)).collect()
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let nnz = self.nonzero_weights();
        let weights = if nnz * 4 < self.weights.len() {
            WeightsRepr::Sparse {
                dim: self.weights.len(),
                entries: self
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(i, w)| (i, *w))
                    .collect(),
            }
        } else {
            WeightsRepr::Dense(self.weights.clone())
        };
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            feature_config: self.feature_config.clone(),
            gamma: self.gamma,
            bias: self.bias,
            weights,
            train_meta: self.train_meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::ModelMismatch(format!("not a reranker model file: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelMismatch(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let weights = match file.weights {
            WeightsRepr::Dense(w) => w,
            WeightsRepr::Sparse { dim, entries } => {
                if dim != file.feature_config.num_weights() {
                    return Err(Error::ModelMismatch(format!(
                        "sparse weights declare dim {dim}, feature config needs {}",
                        file.feature_config.num_weights()
                    )));
                }
                let mut w = vec![0.0; dim];
                for (i, v) in entries {
                    *w.get_mut(i).ok_or_else(|| {
                        Error::ModelMismatch(format!("weight index {i} out of range {dim}"))
                    })? = v;
                }
                w
            }
        };
        let model = RerankerModel {
            feature_config: file.feature_config,
            gamma: file.gamma,
            bias: file.bias,
            weights,
            train_meta: file.train_meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }
}
