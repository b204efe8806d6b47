use std::fmt;
use std::path::PathBuf;

/// Exit code classes: 0 success, 2 unreadable/unparseable input, 3 bad
/// configuration or arguments, 4 infeasible search, 5 failed equivalence
/// check.
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_EQUIVALENCE: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        path: PathBuf,
        detail: String,
    },
    Config(String),
    Core(episim_core::Error),
    Infeasible,
    Equivalence {
        failed: usize,
        total: usize,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => EXIT_PARSE,
            CliError::Config(_) | CliError::Core(_) => EXIT_CONFIG,
            CliError::Infeasible => EXIT_INFEASIBLE,
            CliError::Equivalence { .. } => EXIT_EQUIVALENCE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            CliError::Parse { path, detail } => {
                write!(f, "cannot parse {}: {detail}", path.display())
            }
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
            CliError::Infeasible => write!(f, "no feasible combination within the budget"),
            CliError::Equivalence { failed, total } => {
                write!(f, "equivalence check failed on {failed} of {total} layers")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<episim_core::Error> for CliError {
    fn from(err: episim_core::Error) -> Self {
        CliError::Core(err)
    }
}

pub type CliResult<T> = Result<T, CliError>;
