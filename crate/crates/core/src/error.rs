use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        reason: String,
        t: f64,
        /// Last state accepted by the integrator.
        state: Vec<f64>,
    },

    #[error("degenerate singular point: |D| = {d:e} is below the tolerance")]
    DegenerateSingular { d: f64 },

    #[error("singular classification changes along the arc near t = {t}")]
    ClassificationChange { t: f64 },

    #[error("invalid focal initialization: {0}")]
    InvalidFocalInit(String),

    #[error("degenerate fold: second derivatives of the switching function vanish ({plus:e}, {minus:e})")]
    DegenerateFold { plus: f64, minus: f64 },

    #[error("series expansion has a pole: {0}")]
    Pole(String),

    #[error("cannot solve: {0}")]
    CannotSolve(String),
}
