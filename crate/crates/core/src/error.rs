use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error (line {line}): {msg}")]
    Schema { line: usize, msg: String },
    #[error("algebra error: {0}")]
    Algebra(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("space mismatch: expected {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },
    #[error("grading {grading} does not apply to {space}")]
    GradingMismatch { grading: String, space: String },
    #[error("PBW degree {degree} exceeds the bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },
    #[error("element is not in the image of symmetrization: {0}")]
    NotInImage(String),
    #[error("element is not h-invariant: {0}")]
    NotInvariant(String),
    #[error("linear system has no solution: {0}")]
    NoSolution(String),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("contraction identity violated: {0}")]
    ContractFailure(String),
    #[error("morphism relations fail: {0}")]
    MorphismUnsound(String),
    #[error("not a Maurer-Cartan element: {0}")]
    NotMaurerCartan(String),
    #[error("obstruction not repaired at order {order} (repair depth {depth}): {detail}")]
    ObstructionNotRepaired { order: usize, depth: usize, detail: String },
    #[error("valuation property violated: {0}")]
    ValuationViolated(String),
    #[error("gauge element is not invertible: {0}")]
    NotInvertible(String),
    #[error("classical straightening stalled at order {order}: {detail}")]
    StraighteningStalled { order: usize, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Module-qualified error code used in CLI reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "cli::SchemaError",
            Error::Algebra(_) => "lie_core::AlgebraError",
            Error::Decomposition(_) => "lie_core::DecompositionError",
            Error::SpaceMismatch { .. } => "tensor_spaces::SpaceMismatch",
            Error::GradingMismatch { .. } => "tensor_spaces::GradingMismatch",
            Error::DegreeOverflow { .. } => "uea::DegreeOverflow",
            Error::NotInImage(_) => "uea::NotInImage",
            Error::NotInvariant(_) => "dgla::NotInvariant",
            Error::NoSolution(_) => "adt_dgla::NoSolution",
            Error::TruncationTooSmall(_) => "adt_dgla::TruncationTooSmall",
            Error::ContractFailure(_) => "linfinity::ContractFailure",
            Error::MorphismUnsound(_) => "linfinity::MorphismUnsound",
            Error::NotMaurerCartan(_) => "quantizer::NotMaurerCartan",
            Error::ObstructionNotRepaired { .. } => "quantizer::ObstructionNotRepaired",
            Error::ValuationViolated(_) => "quantizer::ValuationViolated",
            Error::NotInvertible(_) => "gauge::NotInvertible",
            Error::StraighteningStalled { .. } => "gauge::StraighteningStalled",
            Error::Io(_) => "cli::IoError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
