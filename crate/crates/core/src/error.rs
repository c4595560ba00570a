use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fiber: {0}")]
    InvalidFiber(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("stale spectral cache: {0}")]
    Stale(String),
    #[error("ill-posed solve: eigenvalue {eigenvalue:.3e} violates the gap condition for shift {shift}")]
    IllPosed { eigenvalue: f64, shift: f64 },
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("degenerate metric at grid point {index}: {detail}")]
    DegenerateMetric { index: usize, detail: String },
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("rank changes across the stencil: {0}")]
    RankJump(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("no metric: {0}")]
    NoMetric(String),
    #[error("scenario not found: {0}")]
    ScenarioNotFound(String),
    #[error("config error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("invalid {field}: {message}")]
    ConfigValue { field: String, message: String },
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ScenarioNotFound(_)
            | Error::ConfigParse { .. }
            | Error::ConfigValue { .. }
            | Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
