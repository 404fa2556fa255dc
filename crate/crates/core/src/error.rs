use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("size limit exceeded: {what} = {requested} > {limit}")]
    Size {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// A caller-supplied value violates a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// `(P ⊗ I)Ψ` vanished; there is no state relative to the probe.
    #[error("no relative state: projected norm² {norm_sqr:e} is zero")]
    NoRelativeState { norm_sqr: f64 },

    #[error("unknown cell label `{label}` at time index {time}")]
    Lookup { label: String, time: usize },

    /// Conditioning on an event whose measure is below the floor.
    #[error("no relative history: conditioning measure {measure:e} below floor {floor:e}")]
    Conditioning { measure: f64, floor: f64 },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("history space is not consistent: {0}")]
    Inconsistent(String),

    #[error("history space lacks branching structure: max distance {distance:e} ≥ {tol:e}")]
    NotBranching { distance: f64, tol: f64 },

    #[error("norm drift {drift:e} per step exceeds {limit:e}; try dt ≤ {suggested_dt:e}")]
    Stability {
        drift: f64,
        limit: f64,
        suggested_dt: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),
}
