//! GNN architectures: parameters, construction, training and scoring.

mod arch;
mod build;
mod metrics;
mod train;

pub use arch::{Activation, ArchError, ArchitectureParams, Attention, EmbSize, JkMode, LayerParams, Toggle};
pub use build::{attention_coeff, BuiltModel, ForwardPass, GatScores, ModelOptions, Propagation};
pub use metrics::{auc_score, MetricError};
pub use train::{train_model, train_model_with_history, EvalResult, TrainConfig, TrainHistory};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("feature width {got} does not match model input width {expected}")]
    FeatureWidth { got: usize, expected: usize },
    #[error("graph has {got} nodes but the propagation operators cover {expected}")]
    NodeCount { got: usize, expected: usize },
}
