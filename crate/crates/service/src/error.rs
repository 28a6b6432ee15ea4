use thiserror::Error;

use imgraph_core::{FeatureError, GraphError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("metadata references unknown image id {0}")]
    DanglingMetadata(u32),
    #[error("collection is empty")]
    EmptyCollection,
    #[error("duplicate image id {0}")]
    DuplicateId(u32),
    #[error("corrupt graph: {0}")]
    CorruptGraph(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
