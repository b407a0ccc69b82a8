use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has zero mass or empty numeric support: {0}")]
    EmptySupport(&'static str),

    #[error("projection infeasible: field has no positive part")]
    Infeasible,

    #[error("negative density {value:e} in cell {cell} (dt too large or backward diffusion)")]
    Instability { cell: usize, value: f64 },

    #[error("time step {dt:e} fell below the minimum at t = {t}")]
    StepTooSmall { dt: f64, t: f64 },

    #[error("closed form undefined: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
