use thiserror::Error;

use crate::trajectory::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid community model: {0}")]
    Model(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// g^P is never positive, so no plant population can persist.
    #[error("no viable resource window: {0}")]
    NoViableWindow(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    /// Total event rate is zero; the process sits in the absorbing state.
    #[error("process absorbed at zero")]
    AbsorbedAtZero,

    #[error("event budget of {events} exceeded at t = {t}")]
    RuntimeBudgetExceeded {
        events: u64,
        t: f64,
        partial: Box<Trajectory>,
    },

    #[error("time grids do not align: {0}")]
    Alignment(String),

    #[error("stable-state equation has {count} roots; uniqueness hypothesis violated")]
    AmbiguousRoot { count: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
