//! Hierarchical matrices for dense integral operators.
//!
//! A geometric [`ClusterTree`] is built over the row and column points, the
//! pair of trees is split into an η-admissible [`BlockTree`], admissible
//! leaves are compressed with partially pivoted ACA and the remaining leaves
//! are evaluated densely. Only entries requested by ACA are ever computed
//! for admissible blocks.

pub mod aca;
pub mod cluster;
pub mod generator;
pub mod hmatrix;
pub mod io;

pub use aca::{aca, AcaResult, LowRank};
pub use cluster::{is_admissible, ClusterNode, ClusterTree, Point};
pub use generator::{BlockAccess, DenseGenerator, FnGenerator, MatrixGenerator};
pub use hmatrix::{
    compression_report, BlockLeaf, BlockTree, CompressionReport, HMatrix, HOptions, Leaf,
    LeafData, LevelRanks,
};

#[derive(Debug, thiserror::Error)]
pub enum HMatrixError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed matrix dump: {0}")]
    Format(String),
}
