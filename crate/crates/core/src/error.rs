use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid membrane: {0}")]
    Membrane(String),
    #[error("invalid mode set: {0}")]
    ModeSet(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: estimate {estimate:e}, achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("no avoided crossing found in the swept range")]
    NoCrossing,
    #[error("root finding failed: {0}")]
    Root(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
