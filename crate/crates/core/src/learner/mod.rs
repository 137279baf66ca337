//! Desk-scale classifier with supervised pre-training and self-training.

mod data;
mod model;

use thiserror::Error;

pub use data::{gen_synthetic, read_csv, write_csv, CsvRow, Dataset, Sample, SyntheticSpec};
pub use model::{evaluate, self_train_step, train, Model, TrainConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("expected a {expected}-dimensional feature vector, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite logits")]
    NonFinite,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("empty data set")]
    Empty,
    #[error("invalid dataset parameter {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
