use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("span is not closed under adjoint (residual {residual:.3e})")]
    NotAdjointClosed { residual: f64 },

    #[error("trace {trace:.3e} too small to normalize")]
    TraceTooSmall { trace: f64 },

    #[error("clipped negative mass {clipped:.3e} exceeds 1% of trace {trace:.3e}")]
    NotPositive { clipped: f64, trace: f64 },

    #[error("not a projector (residual {residual:.3e})")]
    NotProjector { residual: f64 },

    #[error("not a Hermitian matrix (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("trace drifted by {drift:.3e} during propagation; input is not a generator")]
    TraceDrift { drift: f64 },

    #[error("Kraus operators are not trace preserving (residual {residual:.3e})")]
    KrausNormalization { residual: f64 },

    #[error("fixed-point space is empty; numerical failure")]
    EmptyFixedPointSpace,

    #[error("subspace leaks outside the recurrent subspace (residual {residual:.3e})")]
    OutsideRecurrent { residual: f64 },

    #[error("kernel of the compressed generator has dimension {found}, expected 1; subspace is not a minimal enclosure")]
    NotMinimal { found: usize },

    #[error("eigenvalue clustering ambiguous after {attempts} attempts: {detail}")]
    AmbiguousClusters { attempts: usize, detail: String },

    #[error("fixed-point set is not a block algebra: {0}")]
    AlgebraStructure(String),

    #[error("operator is not a partial isometry between the given subspaces (residual {residual:.3e})")]
    NotPartialIsometry { residual: f64 },

    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),

    #[error("singular solve for the invariant measure of class {class:?}")]
    SingularClass { class: Vec<usize> },

    #[error("word search too large: {count} words exceed the 1e7 limit")]
    WordExplosion { count: f64 },

    #[error("identifiability holds but the decomposition is not unique; this contradicts the uniqueness theorem")]
    UniquenessContradiction,

    #[error("internal identity violated (residual {residual:.3e})")]
    IdentityViolated { residual: f64 },

    #[error("{0}")]
    ModeMismatch(String),

    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unreadable or malformed input.
    Input,
    /// Well-formed input that does not describe a valid model.
    Validation,
    /// The analysis itself failed.
    Analysis,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Io(_) => ErrorKind::Input,
            Error::NotSquare { .. }
            | Error::NonFinite
            | Error::DimensionMismatch(_)
            | Error::NotHermitian { .. }
            | Error::KrausNormalization { .. }
            | Error::InvalidRates(_)
            | Error::InvalidTolerances(_)
            | Error::ModeMismatch(_) => ErrorKind::Validation,
            Error::Stage { stage: "validate", .. } => ErrorKind::Validation,
            Error::Stage { source, .. } => match source.kind() {
                ErrorKind::Input => ErrorKind::Input,
                _ => ErrorKind::Analysis,
            },
            _ => ErrorKind::Analysis,
        }
    }

    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
