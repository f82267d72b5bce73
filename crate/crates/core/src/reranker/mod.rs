//! Trainable scoring function: hashed features, a linear model, the
//! pairwise margin loss, and the training loop.

mod features;
mod loss;
mod model;
mod train;

pub use features::{feature_bucket, feature_keys, featurize, FeatureConfig, SparseFeatures, LENGTH_FEATURES};
pub use loss::{set_loss, set_loss_gradient, set_loss_pred_gradient};
pub use model::{RerankerModel, TrainMeta, MODEL_FORMAT_VERSION};
pub use train::{
    mean_set_loss, prepare_sets, set_size_weights, split_dev, train, Optimizer, TrainConfig, TrainingSet,
    WeightMode,
};
