use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("nothing to certify: solver status is {0}")]
    NothingToCertify(String),
}
