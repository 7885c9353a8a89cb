//! Retrieval-based chatbot: corpus preprocessing, a 128/64/T ReLU network
//! trained with Nesterov SGD, and confidence-thresholded response selection.

mod corpus;
mod model;
mod network;
mod optimizer;
mod text;
mod train;

pub use corpus::{Intent, IntentCorpus, MAX_RECOMMENDED_TAGS};
pub use model::{
    load_model, save_model, Chatbot, GrowthEntry, GrowthLog, PredictionResult, Reply,
    TrainedModel, DEFAULT_THRESHOLD, FALLBACK_REPLY, MODEL_FORMAT_VERSION,
};
pub use network::{
    count_parameters, cross_entropy, one_hot, softmax, Dense, ForwardCache, Mode,
    NetworkParameters, HIDDEN1, HIDDEN2,
};
pub use optimizer::{learning_rate_at, sgd_step, OptimizerConfig};
pub use text::{normalize_text, vectorize, FeatureVector, Vocabulary};
pub use train::{
    batch_gradients, evaluate_accuracy, train, train_many, EpochStats, TrainingConfig,
    TrainingOutcome, TrainingPair,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IntentError {
    #[error("corpus yields no tokens")]
    EmptyCorpus,
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("forward cache does not match network shape")]
    StaleCache,
    #[error("model has {model} tags but corpus has {corpus}")]
    TagSetMismatch { model: usize, corpus: usize },
    #[error("model format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
