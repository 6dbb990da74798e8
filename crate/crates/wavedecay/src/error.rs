//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e} ({context})")]
    QuadratureNonConvergence {
        achieved: f64,
        requested: f64,
        context: String,
    },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("empty sweep: no grid points to verify")]
    EmptySweep,

    #[error("declared bound violated for {which}: at r = {at:.6e} the sampled ratio is {ratio:.6e} > 1")]
    DataBoundViolated { which: String, at: f64, ratio: f64 },

    #[error("profile `{profile}` does not expose the derivative required here")]
    MissingDerivative { profile: String },

    #[error("fixed-point iteration did not converge in {iters} iterations (last diff {last_diff:.3e}) although delta = {delta:.3e} < 1")]
    IterationStalled {
        iters: usize,
        last_diff: f64,
        delta: f64,
    },

    #[error("time step violates stability: dt/dr = {ratio:.4} > 1")]
    CflViolation { ratio: f64 },

    #[error("observer at r = {observer:.3} is not causally shielded: need r_max >= t_final + observer + margin, got r_max = {r_max:.3}")]
    CausalityMargin { observer: f64, r_max: f64 },

    #[error("series changes sign {changes} times inside the fit window and has no stable envelope; try a later window")]
    SignChangingSeries { changes: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown profile `{0}`; known: zero, model, gaussian-bump, compact-bump")]
    UnknownProfile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
