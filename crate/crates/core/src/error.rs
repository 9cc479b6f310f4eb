use thiserror::Error;

/// Default cap on the number of stored matrix entries per operator.
pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// Environment variable overriding [`DEFAULT_SIZE_CAP`].
pub const SIZE_CAP_ENV: &str = "ERGOLAB_SIZE_CAP";

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("size cap exceeded: {what} needs {requested}, cap is {cap}")]
    SizeCap {
        what: String,
        requested: usize,
        cap: usize,
    },

    #[error("non-singularity violated at state {state}: Radon-Nikodym weight {weight}")]
    NonSingular { state: usize, weight: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("trivial factor: {0}")]
    TrivialFactor(String),

    #[error("epsilon {epsilon} saturates the product space (measure {measure}); shrink epsilon")]
    EpsilonTooLarge { epsilon: f64, measure: f64 },

    #[error("translation a = {a} is off the grid; nearest valid a = {nearest}")]
    OffGrid { a: f64, nearest: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }
}

/// Resource limits shared by operator constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of stored entries (and of basis states) per operator.
    pub size_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl Limits {
    pub fn new(size_cap: usize) -> Self {
        Limits { size_cap }
    }

    /// Reads [`SIZE_CAP_ENV`], falling back to the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(SIZE_CAP_ENV) {
            Ok(raw) => raw
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&cap| cap > 0)
                .map(Limits::new)
                .ok_or_else(|| Error::invalid(format!("{SIZE_CAP_ENV}={raw:?} is not a positive integer"))),
            Err(_) => Ok(Limits::default()),
        }
    }

    pub fn check(&self, what: &str, requested: usize) -> Result<()> {
        if requested > self.size_cap {
            return Err(Error::SizeCap {
                what: what.to_string(),
                requested,
                cap: self.size_cap,
            });
        }
        Ok(())
    }
}
