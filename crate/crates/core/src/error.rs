//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the small-angle regime or otherwise out of domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Image bandwidth exceeds what the grid can represent without aliasing.
    #[error("aliasing: image bandwidth {bandwidth:.4} exceeds q_max/2 = {limit:.4}; use a finer grid")]
    Aliasing { bandwidth: f64, limit: f64 },

    /// A filter removed essentially all probability mass.
    #[error("null state: transmitted fraction {transmitted:.3e} below 1e-12")]
    NullState { transmitted: f64 },

    /// Conditioning on an outcome of negligible probability.
    #[error("conditioning on null outcome: marginal density {density:.3e} at q = {q:.6}")]
    ConditionOnNull { q: f64, density: f64 },

    /// Too few events for the requested estimator.
    #[error("insufficient events: got {got}, need at least {need}")]
    InsufficientEvents { got: usize, need: usize },

    /// Two-component direction fit did not resolve distinct sources.
    #[error("non-identifiable: component separation {separation:.6} rad below resolution limit {limit:.6} rad")]
    NonIdentifiable { separation: f64, limit: f64 },

    /// Degenerate contrast evaluation (peak + trough vanishes).
    #[error("degenerate density: peak + trough = {sum:.3e}")]
    DegenerateDensity { sum: f64 },

    /// Scenario configuration problems (parse errors name the offending key).
    #[error("config error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
