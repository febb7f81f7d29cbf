use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario parameter `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },

    #[error("group size {group_size} does not divide N = {n}")]
    GroupSize { n: usize, group_size: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("expected a square matrix, found {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("{0}")]
    Domain(String),

    #[error("effective channel is identically zero; no user can be served")]
    ZeroChannel,

    #[error("strategy {strategy} is not valid for the {experiment} experiment")]
    InvalidStrategy {
        strategy: String,
        experiment: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
