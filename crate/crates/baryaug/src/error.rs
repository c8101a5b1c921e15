use thiserror::Error;

/// Library error type. The CLI maps [`ErrorKind`] onto its exit-code taxonomy.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point list is empty")]
    EmptyPoints,

    #[error("non-finite coordinate at point {index}: ({x}, {y})")]
    NonFiniteCoordinate { index: usize, x: f64, y: f64 },

    #[error("weights invalid: {reason}")]
    BadWeights { reason: String },

    #[error("{points} points but {weights} weights")]
    WeightCountMismatch { points: usize, weights: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset mixes ordered and unordered clouds")]
    MixedOrderedFlags,

    #[error("exact solver cap exceeded: {rows}x{cols} problem, cap {cap}")]
    ExactSizeCap { rows: usize, cols: usize, cap: usize },

    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),

    #[error("sinkhorn iterations diverged (non-finite scalings)")]
    SinkhornDiverged,

    #[error("transport solver stalled with {remaining} mass unshipped")]
    TransportStalled { remaining: f64 },

    #[error("solver failed on pair ({i}, {j}): {source}")]
    PairSolve {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("k = {k} out of range for n = {n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("delta must be positive, got {0}")]
    BadDelta(f64),

    #[error("maximal clique count exceeded limit {limit}")]
    CliqueLimit { limit: usize },

    #[error("matrix is not a valid distance matrix: {reason}")]
    BadMatrix { reason: String },

    #[error("barycentric coordinates invalid: {reason}")]
    BadCoordinates { reason: String },

    #[error("{measures} measures but {coords} barycentric coordinates")]
    CoordinateCountMismatch { measures: usize, coords: usize },

    #[error("operation requires ordered clouds")]
    UnorderedInput,

    #[error("operation requires unordered clouds")]
    OrderedInput,

    #[error("clouds must share cardinality, got {left} and {right}")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("clouds must carry uniform weights")]
    NonUniformWeights,

    #[error("probability must lie in [0, 1], got {0}")]
    BadProbability(f64),

    #[error("parameter {name} invalid: {reason}")]
    BadParameter { name: &'static str, reason: String },

    #[error("sample count n_aug must be >= 1")]
    EmptySampleRequest,

    #[error("dataset too small: need more than {need} clouds, got {got}")]
    DatasetTooSmall { need: usize, got: usize },

    #[error("empty clique complex")]
    EmptyComplex,

    #[error("set too small for k = {k} nearest neighbors: |A| = {size_a}, |B| = {size_b}")]
    SetTooSmall {
        k: usize,
        size_a: usize,
        size_b: usize,
    },

    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path} at record {record}: {message}")]
    Parse {
        path: String,
        record: usize,
        message: String,
    },

    #[error("stale cache: {0}")]
    StaleCache(String),
}

/// Coarse error category used by the CLI exit-code taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad inputs: files, parameters, malformed data.
    Input,
    /// Numerical failure: divergence, non-convergence.
    Numeric,
    /// Resource limits: size caps, clique explosion.
    Resource,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            SinkhornDiverged | TransportStalled { .. } => ErrorKind::Numeric,
            PairSolve { source, .. } => source.kind(),
            ExactSizeCap { .. } | CliqueLimit { .. } => ErrorKind::Resource,
            _ => ErrorKind::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
