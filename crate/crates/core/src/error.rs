use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty pair set")]
    EmptyPairSet,
    #[error("no triplets")]
    NoTriplets,
    #[error("no anchor has a positive in the batch")]
    NoAnchors,
    #[error("denominator empty: the batch holds a single class")]
    DenominatorEmpty,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("lambda {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty cluster")]
    EmptyCluster,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Idx(#[from] crate::train::idx::IdxError),
}

pub type Result<T> = std::result::Result<T, Error>;
