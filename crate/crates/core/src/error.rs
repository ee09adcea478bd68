use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("shift operator norm {norm} exceeds bound K*n^Q = {bound}")]
    ShiftNormViolation { norm: f64, bound: f64 },

    #[error("{routine} failed to converge{}", seed_suffix(.seed))]
    NumericalFailure {
        routine: &'static str,
        seed: Option<u64>,
    },

    #[error("unsupported law: |rho| = {rho} must be < 1")]
    UnsupportedLaw { rho: f64 },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("degenerate subspace{}", index_suffix(.index))]
    DegenerateSubspace { index: Option<usize> },

    #[error("minor obtained by deleting the first row and column is singular")]
    SingularMinor,

    #[error("insufficient data: got {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("hypothesis violated: empirical P(zeta <= lambda) = {empirical} exceeds b_n = {b_n} + band {band}")]
    HypothesisViolated { empirical: f64, b_n: f64, band: f64 },

    #[error("enumeration over {atoms} atoms exceeds limit {limit}")]
    EnumerationLimit { atoms: u128, limit: u128 },

    #[error("logarithmic pole: {0}")]
    Pole(String),
}

fn seed_suffix(seed: &Option<u64>) -> String {
    match seed {
        Some(s) => format!(" (matrix seed {s})"),
        None => String::new(),
    }
}

fn index_suffix(index: &Option<usize>) -> String {
    match index {
        Some(k) => format!(" at column {k}"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches the generating seed to a numerical failure so the matrix can be replayed.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Error::NumericalFailure { routine, .. } => Error::NumericalFailure {
                routine,
                seed: Some(seed),
            },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
