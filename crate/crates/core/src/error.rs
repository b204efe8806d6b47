use std::fmt;

/// Errors produced by the simulator core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor or spec dimensions are inconsistent or out of bounds.
    Dimension(String),
    /// An argument violates a documented precondition.
    Argument(String),
    /// Output segments do not tile the output channel range.
    Coverage(String),
    /// A required cost-table entry is missing.
    Configuration { component: String },
    /// Quantization scale is zero (constant value range).
    DegenerateScale,
    /// A search evaluator produced an unusable objective value.
    Evaluation(String),
    /// Exhaustive enumeration refused: the candidate space exceeds the cap.
    SpaceTooLarge { size: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Argument(msg) => write!(f, "argument error: {msg}"),
            Error::Coverage(msg) => write!(f, "coverage error: {msg}"),
            Error::Configuration { component } => {
                write!(
                    f,
                    "configuration error: no cost entry for component `{component}`"
                )
            }
            Error::DegenerateScale => write!(f, "degenerate quantization scale (alpha == beta)"),
            Error::Evaluation(msg) => write!(f, "evaluation error: {msg}"),
            Error::SpaceTooLarge { size, cap } => {
                write!(
                    f,
                    "candidate space of {size} combinations exceeds the cap of {cap}"
                )
            }
        }
    }
}

impl std::error::Error for Error {}
