use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid packet parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time must be finite and non-negative, got {0}")]
    NegativeTime(f64),

    #[error(
        "quadrature did not converge: estimate {value}, error bound {error} exceeds {tolerance}"
    )]
    Quadrature {
        value: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("threshold undefined: b == c makes the plane perturbation vanish identically")]
    ThresholdUndefined,

    #[error("threshold scan found no finite minimum of the velocity ratio")]
    NoFiniteMinimum,

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("{failed} of {n} trajectories failed to integrate (limit is 0.1%)")]
    TooManyFailures { failed: usize, n: usize },

    #[error("no trajectory arrived before the horizon")]
    NoArrivals,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
