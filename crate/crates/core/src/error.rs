use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("quadrature failed to converge on [{a}, {b}] after {evals} panel evaluations")]
    Convergence { a: f64, b: f64, evals: usize },

    #[error("no sign change on bracket [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge within {0} iterations")]
    RootIterations(usize),

    #[error("operation requires the real-xi regime (A >= critical A), got A = {0}")]
    Regime(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("all {0} paths were absorbed before the horizon")]
    NoSurvivors(usize),
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { func, msg: msg.into() }
    }
}
