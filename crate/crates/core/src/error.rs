use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("posterior sample alignment mismatch: expected K={expected}, got K={found}")]
    Alignment { expected: usize, found: usize },

    #[error("distribution has mass at ({row}, {col}) where the reference product is below the log floor")]
    DegenerateSupport { row: usize, col: usize },

    #[error("class {class} has target mass {target_mass} but zero average predicted probability over the pool")]
    UnsupportedClass { class: usize, target_mass: f64 },

    #[error("observation has zero likelihood under every hypothesis")]
    ImpossibleObservation,

    #[error("kernel matrix is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),

    #[error("singular covariance (determinant {0:e})")]
    SingularCovariance(f64),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("class {class} needs {requested} examples but only {available} are available")]
    InsufficientClass {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("pool exhausted after {acquired} acquisitions (budget {budget})")]
    PoolExhausted { acquired: usize, budget: usize },

    #[error("model training failed at step {step}: {source}")]
    Training {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: row {row}: {message}")]
    Csv {
        path: String,
        row: usize,
        message: String,
    },

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
