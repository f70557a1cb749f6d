use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A memory stack violates alternation or dominance.
    #[error("corrupt hysteresis state: {0}")]
    StateCorruption(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("identification failed: {0}")]
    Identification(String),

    #[error("target {target} T is unreachable without saturation; reachable interval is [{lo}, {hi}] T")]
    Unreachable { target: f64, lo: f64, hi: f64 },

    #[error("corner-point solver failed: {0}")]
    Solver(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("target {target} T outside the valid range [{lo}, {hi}] T")]
    Range { target: f64, lo: f64, hi: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable process exit code for this error class.
    ///
    /// 1 = validation, 2 = I/O, 3 = internal or solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::StateCorruption(_) | Error::Solver(_) | Error::Calibration(_) => 3,
            _ => 1,
        }
    }
}

impl Error {
    /// I/O error whose message names the file involved.
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Maps a TOML decode failure to a parse error carrying the 1-based line.
pub(crate) fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
        .unwrap_or(0);
    Error::Parse { line, msg: e.message().to_string() }
}
