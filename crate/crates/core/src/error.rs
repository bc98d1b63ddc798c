use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building or analysing a chain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `row == None` refers to the tail increment law.
    #[error("row {} sums to {sum:.17} (|sum - 1| > 1e-12)", row_label(*.row))]
    NonStochasticRow { row: Option<usize>, sum: f64 },

    #[error("row {} has entry {value} at offset/column {column}", row_label(*.row))]
    NegativeEntry {
        row: Option<usize>,
        column: i64,
        value: f64,
    },

    #[error("boundary row {index} is missing")]
    MissingBoundaryRow { index: usize },

    #[error("expected {expected} boundary rows, found {found}")]
    UnexpectedBoundaryRows { expected: usize, found: usize },

    #[error("degenerate increments: need a_(-{g}) > 0 and a_({d}) > 0 with g, d >= 1 and support in [-g, d]")]
    DegenerateIncrements { g: usize, d: usize },

    #[error("stationary mass vanishes at index {index}")]
    ZeroMass { index: usize },

    #[error("index {index} is outside the stationary prefix of length {len}")]
    IndexOutOfPrefix { index: usize, len: usize },

    #[error("augmented truncation has no unique stationary vector (stuck at state {index})")]
    SingularSystem { index: usize },

    #[error("stationary residual {residual:e} exceeds 1e-10")]
    NonConvergence { residual: f64 },

    #[error("ratio window {start}..={end} is outside the admissible range {min}..={max}")]
    WindowTooWide {
        start: usize,
        end: usize,
        min: usize,
        max: usize,
    },

    #[error("psi(t) = 1 has no root in (0,1): mean increment {mean_increment} is not negative")]
    NoSubunitRoot { mean_increment: f64 },

    #[error("alpha = {alpha} must lie in (alpha0, 1) with alpha0 = {alpha0}")]
    AlphaTooSmall { alpha: f64, alpha0: f64 },

    #[error("tail ratio tau = 0: V = pi^(-1/2) is not of the form gamma^n")]
    DegenerateTail,

    #[error("matrix row {row} sums to {sum}, not a stochastic matrix")]
    NotStochastic { row: usize, sum: f64 },

    #[error("QR iteration failed to converge after {iterations} iterations")]
    EigNonConvergence { iterations: usize },

    #[error("no eigenvalue strictly inside the unit disk")]
    NoSubunitEigenvalue,

    #[error("sweep too small: {reason}")]
    InsufficientSweep { reason: String },

    #[error("iterate norm underflowed at iteration {iteration}, before the fit window closed")]
    UnderflowBeforeWindow { iteration: usize },

    #[error("test vector is proportional to the constant function")]
    DegenerateTestVector,

    #[error("oracle order {order} exceeds the cap of 8")]
    OrderTooLarge { order: usize },

    #[error("polynomial root residual {residual:e} exceeds 1e-10")]
    RootResidual { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structure check failed at level {k}: {reason}")]
    StructureCheck { k: usize, reason: String },
}

fn row_label(row: Option<usize>) -> String {
    match row {
        Some(i) => i.to_string(),
        None => "<tail increments>".to_string(),
    }
}
