use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state outside the energy domain: {0}")]
    Domain(String),

    #[error("could not bracket h'(x) = {target} after {expansions} expansions")]
    BracketFailure { target: f64, expansions: usize },

    #[error("invalid bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("right-hand side is not finite at t = {t}")]
    NonFiniteRhs { t: f64 },

    #[error("step size fell below the floor at t = {t} before any stop event")]
    StepUnderflow { t: f64 },

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("no connection point: p never changes sign and the terminal gap b - a = {gap:e} is open")]
    NoConnection { gap: f64 },

    #[error("p changes sign {count} times along the trajectory")]
    MultipleRoots { count: usize },

    #[error("abscissa {value} outside sampled range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("chi is not strictly increasing near x = {x} (chi' = {slope:e})")]
    H6Violation { x: f64, slope: f64 },

    #[error("phi0 = {phi0} does not fit [0, {tau}] inside the rescaled existence interval (need phi0 < {limit})")]
    GridViolation { phi0: f64, tau: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
