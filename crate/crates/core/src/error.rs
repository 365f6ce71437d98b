use thiserror::Error;

use crate::geometry::{Dims, Pos};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell:?} is outside the {dims} workspace")]
    OutOfBounds { cell: Pos, dims: Dims },

    #[error("placement collides with an occupied cell at {cell:?}")]
    Collision { cell: Pos },

    #[error("no bricks of type {brick} left in the inventory")]
    InventoryEmpty { brick: String },

    #[error("unknown brick type `{0}`")]
    UnknownBrick(String),

    #[error("target shape is empty")]
    EmptyTarget,

    #[error("shape is empty")]
    EmptyShape,

    #[error("grid dimensions differ: {0} vs {1}")]
    DimsMismatch(Dims, Dims),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("linear program did not converge within {iterations} iterations")]
    NumericalFailure { iterations: usize },

    #[error("every action is masked")]
    AllMasked,

    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
