use thiserror::Error;

use crate::engine::ThinningStats;

/// Errors raised by models, envelopes and the thinning loop.
#[derive(Debug, Error)]
pub enum PdmpError {
    #[error("numeric overflow while evaluating {what}")]
    NumericOverflow { what: &'static str },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("bound strategy `{strategy}` is not supported by this model: {reason}")]
    UnsupportedStrategy { strategy: String, reason: String },

    #[error("integrated envelope has finite total mass {mass}; cannot invert {target}")]
    InfiniteHorizon { mass: f64, target: f64 },

    #[error("proposal cap of {cap} exceeded within one inter-jump interval")]
    CapExceeded { cap: u64, partial: Box<ThinningStats> },

    #[error("envelope violated: rate {rate} exceeds bound {bound} at t = {time}")]
    EnvelopeViolation { rate: f64, bound: f64, time: f64 },

    #[error("no transition possible: jump rate is zero")]
    NoTransition,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate report: {0}")]
    Degenerate(String),

    #[error("statistical oracle failed: {0}")]
    Oracle(String),
}

pub type Result<T, E = PdmpError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PdmpError {
    PdmpError::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
