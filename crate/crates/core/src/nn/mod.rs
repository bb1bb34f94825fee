//! The classifier: local-global representation layer, PointNet-style
//! backbone and head, cross-entropy loss, Adam, training, inference and the
//! `TCM1` model file.

mod adam;
mod loss;
mod model;
mod serialize;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use loss::{argmax, cross_entropy, cross_entropy_with_grad, softmax};
pub use model::{localglobal_forward, ForwardPass, Gradients, Hyperparameters, Model, SharedFCLayer};
pub use serialize::{decode_model, encode_model, load_model, save_model, ModelFileError, MODEL_MAGIC, MODEL_VERSION};
pub use tensor::Tensor;
pub use train::{
    context_for, evaluate, predict, train, Brain, EpochMetrics, InferenceConfig, Prediction, Split, TrainConfig,
};

use thiserror::Error;

use crate::features::FeatureError;
use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("label {label} out of range for {class_count} classes")]
    OutOfRangeLabel { label: usize, class_count: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("model/config mismatch: {0}")]
    ModelConfigMismatch(String),
    #[error("brain {brain}: {labels} labels for {streamlines} streamlines")]
    LabelCountMismatch { brain: u64, labels: usize, streamlines: usize },
    #[error("non-finite values during training at epoch {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
