use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bodies closer than the collision guard (distance {distance:.3e})")]
    CollisionProximity { distance: f64 },

    #[error("mode classification is ambiguous (dominant Fourier energy {energy:.4})")]
    AmbiguousMode { energy: f64 },

    #[error("mode at frequency {frequency} is degenerate (multiplicity {multiplicity})")]
    DegenerateMode { frequency: f64, multiplicity: usize },

    #[error("Newton iteration did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("singular Jacobian in the bordered system")]
    SingularJacobian,

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("step size fell below the minimum ({step:.3e})")]
    StepFailure { step: f64 },

    #[error("null space of the bordered Jacobian is ambiguous (ratio {ratio:.3e})")]
    NullSpaceAmbiguous { ratio: f64 },

    #[error("event {0} is not a branch point")]
    NotBranchPoint(usize),

    #[error("target period {target} is not bracketed by the branch")]
    NotBracketed { target: f64 },

    #[error("orbit period {period} does not match resonant period {expected}")]
    PeriodMismatch { period: f64, expected: f64 },

    #[error("integers {a} and {m} are not coprime")]
    NotCoprime { a: i64, m: i64 },

    #[error("{ell}:{m} is not a choreography for k={k}, n={n}; the bodies trace {curves} separate curves")]
    NotChoreography {
        ell: i64,
        m: i64,
        k: i64,
        n: i64,
        curves: i64,
    },

    #[error("path is not toroidal: {0}")]
    NotToroidal(String),

    #[error("integration step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
