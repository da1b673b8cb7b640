//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("viscosity floor violated: min mu = {min_mu}, floor = {floor}")]
    ViscosityFloor { min_mu: f64, floor: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("CFL condition violated: {0}")]
    CflViolation(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
