//! Soft-margin binary kernel SVM trained by sequential minimal optimization.

mod kernel;
mod model;
mod smo;

use thiserror::Error;

pub use kernel::{kernel_eval, KernelKind, KernelSpec};
pub use model::{decision_function, load_model, save_model, SvmModel, MODEL_VERSION};
pub use smo::{train, train_dataset, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training data is empty")]
    Empty,
    #[error("training data has a single class")]
    SingleClass,
    #[error("training vector {0} has no label")]
    Unlabeled(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SMO did not converge after {passes} passes (KKT gap {gap:.3e})")]
    NonConvergence {
        /// Model built from the multipliers reached so far.
        model: Box<SvmModel>,
        passes: usize,
        gap: f64,
    },
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
