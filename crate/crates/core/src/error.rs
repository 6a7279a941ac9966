use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("density matrix is not Hermitian (off-diagonal mismatch {mismatch:.3e})")]
    NonHermitian { mismatch: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    TraceNotUnity { trace: f64 },

    #[error("density matrix is not positive semidefinite (determinant {det:.3e})")]
    NotPositive { det: f64 },

    #[error("unknown initial state `{0}` (expected rho1, rho2 or rho3)")]
    UnknownState(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded its step budget of {max_steps} before t = {t}")]
    StepBudgetExceeded { t: f64, max_steps: usize },

    #[error("outside the closed-form regime: {0}")]
    OutOfRegime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
