use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("variable index {var} out of range ({n_vars} declared) in {context}")]
    UnknownVariable { var: usize, n_vars: usize, context: String },

    #[error("entry ({row}, {col}) outside block `{block}` of size {size}")]
    EntryOutOfRange { block: String, row: usize, col: usize, size: usize },

    #[error("block `{0}` has size zero")]
    EmptyBlock(String),

    #[error("diagonal coefficient at ({row}, {row}) of block `{block}` is not real")]
    ComplexDiagonal { block: String, row: usize },

    #[error("objective has {got} coefficients, expected {expected}")]
    ObjectiveLength { got: usize, expected: usize },

    #[error("non-finite coefficient in {0}")]
    NonFinite(String),

    #[error("linear system factorization failed: {0}")]
    Factorization(String),

    #[error("eigendecomposition failed on block `{0}`")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, SdpError>;
