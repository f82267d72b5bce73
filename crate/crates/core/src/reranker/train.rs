//! Per-set gradient training with early stopping on a dev split.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CandidateSet;
use crate::error::{Error, Result};
use crate::util::{derive_seed, seeded_rng};

use super::features::{featurize, FeatureConfig, SparseFeatures};
use super::loss::{set_loss, set_loss_pred_gradient};
use super::model::{RerankerModel, TrainMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    #[default]
    AdaptiveMoment,
}

/// Per-set loss weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Uniform,
    /// Set size divided by the mean set size.
    SetSize,
}

fn parse_kebab<T: serde::de::DeserializeOwned>(what: &str, s: &str, allowed: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidArgument(format!("unknown {what} `{s}` (allowed: {allowed})")))
}

impl std::str::FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_kebab("optimizer", s, "sgd, adaptive-moment")
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_kebab("weight mode", s, "uniform, set-size")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub gamma: f64,
    /// Epochs during which only the dense length features move. 0 trains
    /// everything from the start.
    pub warmup_epochs: usize,
    pub weight_mode: WeightMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            patience: 10,
            learning_rate: 1e-4,
            optimizer: Optimizer::AdaptiveMoment,
            seed: 0,
            gamma: 0.1,
            warmup_epochs: 10,
            weight_mode: WeightMode::Uniform,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_epochs < 1 {
            problems.push("max_epochs must be >= 1".to_string());
        }
        if self.patience < 1 {
            problems.push("patience must be >= 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            problems.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// A featurized candidate set with its gold quality vector.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub lf_id: String,
    pub features: Vec<SparseFeatures>,
    pub gold: Vec<f64>,
}

impl TrainingSet {
    fn predict(&self, weights: &[f64], bias: f64) -> Vec<f64> {
        self.features
            .iter()
            .map(|x| x.dot(weights).expect("features validated against weights") + bias)
            .collect()
    }
}

/// Featurize `(set, gold)` pairs in parallel, keeping input order.
pub fn prepare_sets(pairs: &[(&CandidateSet, &[f64])], cfg: &FeatureConfig) -> Result<Vec<TrainingSet>> {
    cfg.validate()?;
    pairs
        .par_iter()
        .map(|(set, gold)| {
            if gold.len() != set.len() {
                return Err(Error::InvalidArgument(format!(
                    "set `{}` has {} candidates but {} quality scores",
                    set.lf_id(),
                    set.len(),
                    gold.len()
                )));
            }
            let features = set
                .texts()
                .map(|c| featurize(set.lf(), c, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingSet {
                lf_id: set.lf_id().to_string(),
                features,
                gold: gold.to_vec(),
            })
        })
        .collect()
}

pub fn set_size_weights(sizes: &[usize]) -> Vec<f64> {
    if sizes.is_empty() {
        return Vec::new();
    }
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    sizes.iter().map(|&s| s as f64 / mean).collect()
}

/// Seeded split of `n` items into (train, dev) index lists, both sorted.
/// The dev side gets `round(n * dev_frac)` items, at least one and leaving
/// at least one for training.
pub fn split_dev(n: usize, dev_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 sets to carve a dev split, got {n}")));
    }
    if !(dev_frac > 0.0 && dev_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("dev fraction must be in (0, 1), got {dev_frac}")));
    }
    let k = ((n as f64 * dev_frac).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(derive_seed(seed, "dev-split", 0)));
    let mut dev = idx[..k].to_vec();
    let mut train = idx[k..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();
    Ok((train, dev))
}

pub fn mean_set_loss(sets: &[TrainingSet], weights: &[f64], bias: f64, gamma: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in sets {
        total += set_loss(&s.gold, &s.predict(weights, bias), gamma)?;
    }
    Ok(total / sets.len() as f64)
}

struct Update {
    optimizer: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Update {
    fn new(optimizer: Optimizer, lr: f64, dim: usize) -> Self {
        let (m, v) = match optimizer {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::AdaptiveMoment => (vec![0.0; dim], vec![0.0; dim]),
        };
        Update { optimizer, lr, m, v, t: 0 }
    }

    /// Apply one step for the indices in `touched`, reading gradients from
    /// `grad`. Moments of untouched coordinates are left as they are.
    fn step(&mut self, weights: &mut [f64], grad: &[f64], touched: &[usize]) {
        self.t += 1;
        match self.optimizer {
            Optimizer::Sgd => {
                for &i in touched {
                    weights[i] -= self.lr * grad[i];
                }
            }
            Optimizer::AdaptiveMoment => {
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                for &i in touched {
                    let g = grad[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    weights[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

fn check_sets(sets: &[TrainingSet], dim: usize, what: &str) -> Result<()> {
    for s in sets {
        if s.gold.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "{what} set `{}` has {} candidates; training needs at least 2",
                s.lf_id,
                s.gold.len()
            )));
        }
        if s.features.len() != s.gold.len() {
            return Err(Error::InvalidArgument(format!(
                "{what} set `{}` has {} feature vectors for {} candidates",
                s.lf_id,
                s.features.len(),
                s.gold.len()
            )));
        }
        if s.gold.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidArgument(format!("{what} set `{}` has non-finite quality", s.lf_id)));
        }
        if s.features.iter().any(|x| x.indices.last().is_some_and(|&i| i as usize >= dim)) {
            return Err(Error::ModelMismatch(format!(
                "{what} set `{}` was featurized with a different feature config",
                s.lf_id
            )));
        }
    }
    Ok(())
}

/// Train a reranker and return the parameters with the lowest dev loss.
///
/// Each set is one update. During the first `warmup_epochs` epochs only the
/// dense length features move; early stopping is armed once that phase is
/// over.
pub fn train(
    train_sets: &[TrainingSet],
    dev_sets: &[TrainingSet],
    feature_config: FeatureConfig,
    cfg: &TrainConfig,
) -> Result<RerankerModel> {
    cfg.validate()?;
    feature_config.validate()?;
    if train_sets.is_empty() {
        return Err(Error::InvalidArgument("no training sets".into()));
    }
    if dev_sets.is_empty() {
        return Err(Error::InvalidArgument("no dev sets for early stopping".into()));
    }
    let dim = feature_config.num_weights();
    check_sets(train_sets, dim, "training")?;
    check_sets(dev_sets, dim, "dev")?;

    let set_weights = match cfg.weight_mode {
        WeightMode::Uniform => vec![1.0; train_sets.len()],
        WeightMode::SetSize => set_size_weights(&train_sets.iter().map(|s| s.gold.len()).collect::<Vec<_>>()),
    };
    let warmup = if feature_config.head_dim() == 0 { 0 } else { cfg.warmup_epochs };
    if feature_config.head_dim() == 0 && cfg.warmup_epochs > 0 {
        log::info!("no length features to warm up; training all weights from epoch 1");
    }

    let mut weights = vec![0.0; dim];
    let bias = 0.0;
    let mut update = Update::new(cfg.optimizer, cfg.learning_rate, dim);
    let mut grad = vec![0.0; dim];
    let mut seen = vec![false; dim];
    let mut touched: Vec<usize> = Vec::new();

    let mut best_weights = weights.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut dev_losses = Vec::new();
    let mut order: Vec<usize> = (0..train_sets.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let warming = epoch <= warmup;
        order.shuffle(&mut seeded_rng(derive_seed(cfg.seed, "epoch", epoch as u64)));
        for &s in &order {
            let set = &train_sets[s];
            let pred = set.predict(&weights, bias);
            let coef = set_loss_pred_gradient(&set.gold, &pred, cfg.gamma)?;
            for (c, x) in coef.iter().zip(&set.features) {
                if *c == 0.0 {
                    continue;
                }
                let c = c * set_weights[s];
                for (i, v) in x.iter() {
                    if warming && feature_config.is_hashed(i) {
                        continue;
                    }
                    if !seen[i] {
                        seen[i] = true;
                        touched.push(i);
                    }
                    grad[i] += c * v;
                }
            }
            if !touched.is_empty() {
                update.step(&mut weights, &grad, &touched);
                for &i in &touched {
                    grad[i] = 0.0;
                    seen[i] = false;
                }
                touched.clear();
            }
        }

        let dev_loss = mean_set_loss(dev_sets, &weights, bias, cfg.gamma)?;
        log::debug!("epoch {epoch}: dev loss {dev_loss:.6}");
        dev_losses.push(dev_loss);
        if dev_loss < best_loss {
            best_loss = dev_loss;
            best_epoch = epoch;
            best_weights.copy_from_slice(&weights);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if warming {
            since_best = 0;
            continue;
        }
        if since_best >= cfg.patience {
            log::info!("early stop after epoch {epoch}; best epoch {best_epoch} (dev loss {best_loss:.6})");
            break;
        }
    }

    let model = RerankerModel {
        feature_config,
        gamma: cfg.gamma,
        bias,
        weights: best_weights,
        train_meta: TrainMeta {
            seed: cfg.seed,
            epochs_run: dev_losses.len(),
            best_epoch,
            best_dev_loss: best_loss,
            dev_losses,
            optimizer: Some(cfg.optimizer),
            weight_mode: Some(cfg.weight_mode),
            learning_rate: Some(cfg.learning_rate),
        },
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Candidate;

    fn cset(id: &str, texts: &[&str]) -> CandidateSet {
        CandidateSet::new(
            id,
            "( answer ( size m0 ) )",
            None,
            texts.iter().map(|t| Candidate::new(*t, 1, None).unwrap()).collect(),
        )
        .unwrap()
    }

    fn cfg() -> FeatureConfig {
        FeatureConfig { hash_dim: 1 << 12, ..FeatureConfig::default() }
    }

    /// Sets where "good" marks the better candidate; `flip` reverses that.
    fn corpus(n: usize, flip: bool) -> Vec<TrainingSet> {
        let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
        let sets: Vec<(CandidateSet, Vec<f64>)> = (0..n)
            .map(|k| {
                let w = words[k % words.len()];
                let a = format!("how big is {w} good");
                let b = format!("how big is {w} bad");
                let q = if flip { vec![0.0, 1.0] } else { vec![1.0, 0.0] };
                (cset(&format!("s{k}"), &[&a, &b]), q)
            })
            .collect();
        let pairs: Vec<(&CandidateSet, &[f64])> = sets.iter().map(|(s, q)| (s, q.as_slice())).collect();
        prepare_sets(&pairs, &cfg()).unwrap()
    }

    #[test]
    fn set_size_weights_average_one() {
        let w = set_size_weights(&[2, 10, 8, 4, 6]);
        assert_eq!(w.iter().sum::<f64>() / 5.0, 1.0);
        assert_eq!(w[0], 2.0 / 6.0);
    }

    #[test]
    fn learns_the_marker_word() {
        let train_sets = corpus(30, false);
        let dev = corpus(6, false);
        let tc = TrainConfig { learning_rate: 0.05, warmup_epochs: 0, max_epochs: 20, ..TrainConfig::default() };
        let m = train(&train_sets, &dev, cfg(), &tc).unwrap();
        assert!(m.score("( answer ( size m0 ) )", "how big is zeta good").unwrap()
            > m.score("( answer ( size m0 ) )", "how big is zeta bad").unwrap());
        assert!(m.train_meta.best_dev_loss < mean_set_loss(&dev, &vec![0.0; cfg().num_weights()], 0.0, 0.1).unwrap());
    }

    #[test]
    fn rising_dev_loss_stops_after_epoch_two() {
        let train_sets = corpus(12, false);
        let dev = corpus(4, true);
        let tc = TrainConfig {
            learning_rate: 0.05,
            warmup_epochs: 0,
            patience: 1,
            max_epochs: 50,
            // wide margin so the training loss stays active past epoch 1
            gamma: 50.0,
            ..TrainConfig::default()
        };
        let m = train(&train_sets, &dev, cfg(), &tc).unwrap();
        assert_eq!(m.train_meta.epochs_run, 2);
        assert_eq!(m.train_meta.best_epoch, 1);
        assert!(m.train_meta.dev_losses[1] > m.train_meta.dev_losses[0]);
        // returned parameters reproduce the epoch-1 dev loss
        let again = mean_set_loss(&dev, &m.weights, m.bias, m.gamma).unwrap();
        assert_eq!(again, m.train_meta.dev_losses[0]);
    }

    #[test]
    fn warmup_leaves_hashed_weights_untouched() {
        let train_sets = corpus(12, false);
        let dev = corpus(4, false);
        let tc = TrainConfig { learning_rate: 0.05, warmup_epochs: 10, max_epochs: 10, ..TrainConfig::default() };
        // sets differ only in hashed features, so give the head something to learn
        let mut train_sets = train_sets;
        for s in &mut train_sets {
            *s.features[0].values.last_mut().unwrap() += 1.0;
        }
        let m = train(&train_sets, &dev, cfg(), &tc).unwrap();
        let c = cfg();
        assert!(m.weights[..c.hash_dim].iter().all(|w| *w == 0.0));
        assert!(m.weights[c.hash_dim..].iter().any(|w| *w != 0.0));
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let train_sets = corpus(20, false);
        let dev = corpus(4, false);
        let tc = TrainConfig { seed: 9, max_epochs: 15, warmup_epochs: 3, ..TrainConfig::default() };
        let a = train(&train_sets, &dev, cfg(), &tc).unwrap();
        let b = train(&train_sets, &dev, cfg(), &tc).unwrap();
        assert_eq!(a, b);
        let min = a.train_meta.dev_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.train_meta.best_dev_loss, min);
    }

    #[test]
    fn rejects_bad_input() {
        let dev = corpus(2, false);
        assert!(train(&[], &dev, cfg(), &TrainConfig::default()).is_err());
        assert!(train(&dev, &[], cfg(), &TrainConfig::default()).is_err());
        let mut tiny = corpus(1, false);
        tiny[0].gold.pop();
        tiny[0].features.pop();
        assert!(train(&tiny, &dev, cfg(), &TrainConfig::default()).is_err());
        let bad = TrainConfig { patience: 0, learning_rate: 0.0, ..TrainConfig::default() };
        let e = train(&dev, &dev, cfg(), &bad).unwrap_err().to_string();
        assert!(e.contains("patience") && e.contains("learning_rate"));
        let other = FeatureConfig { hash_dim: 1 << 4, ..cfg() };
        assert!(matches!(train(&dev, &dev, other, &TrainConfig::default()), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn dev_split_is_seeded_and_disjoint() {
        let (t, d) = split_dev(50, 0.1, 3).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(t.len() + d.len(), 50);
        assert!(d.iter().all(|i| !t.contains(i)));
        assert_eq!(split_dev(50, 0.1, 3).unwrap(), (t, d));
        assert_eq!(split_dev(3, 0.01, 0).unwrap().1.len(), 1);
        assert!(split_dev(1, 0.1, 0).is_err());
        assert!(split_dev(10, 1.0, 0).is_err());
    }
}
