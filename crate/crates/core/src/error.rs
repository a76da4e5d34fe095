use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for `{operand}`: expected {expected}, found {found}")]
    Dimension {
        operand: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time index {t} outside [0, {period}]")]
    TimeIndex { t: usize, period: usize },
    #[error("constraint set at t = {t} is empty")]
    EmptyConstraintSet { t: usize },
    #[error("disturbance atoms of channel {channel} are linearly dependent over one period")]
    RankDeficientBasis { channel: usize },
    #[error("periodic Riccati recursion did not converge within {periods} periods; (A_t, B_t) looks unstabilizable")]
    NotStabilizable { periods: usize },
    #[error("feedback gains do not stabilize the periodic closed loop (monodromy spectral radius {spectral_radius})")]
    GainsNotStabilizing { spectral_radius: f64 },
    #[error("RPI horizon exceeded the cap of {cap} (contraction reached {alpha}); use a larger alpha_target or cap")]
    RpiHorizonExceeded { cap: usize, alpha: f64 },
    #[error("unsupported residual set: {0}")]
    UnsupportedResidualSet(String),
    #[error("tightened constraints are empty at time steps {steps:?}")]
    InfeasibleTightening { steps: Vec<usize> },
    #[error("safe set level {level} is empty; the history does not cover the current disturbance parameters")]
    EmptySafeSet { level: usize },
    #[error("seed construction failed: {0}")]
    Seed(String),
    #[error("LMPC problem infeasible at t = {t}: none of the {candidates} terminal candidates admits a feasible plan")]
    RecursiveFeasibility { t: usize, candidates: usize },
    #[error("true state violates the original constraints at t = {t} by {violation:e}")]
    TubeViolation { t: usize, violation: f64 },
    #[error("optimization problem infeasible: {0}")]
    Infeasible(String),
    #[error("QP solver failed after {iterations} iterations: {context}")]
    NumericFailure { context: String, iterations: usize },
    #[error("policy failed at t = {t}: {message}")]
    Policy { t: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(operand: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            operand,
            expected,
            found,
        })
    }
}
