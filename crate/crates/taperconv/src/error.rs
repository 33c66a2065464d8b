use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (negative power, negative z, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A width fell outside the tabulated data range.
    #[error("width {width_um} um outside tabulated range [{min_um}, {max_um}] um")]
    WidthOutOfRange {
        width_um: f64,
        min_um: f64,
        max_um: f64,
    },

    /// Tabulated input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A root solve failed (no sign change in the search interval).
    #[error("solve error: {0}")]
    Solve(String),

    /// The step-size rule asked for an unreasonable amount of work.
    #[error("resource error: {0}")]
    Resource(String),

    /// A spectrum quantity could not be extracted from the sampled grid.
    #[error("unresolved bandwidth: {0}")]
    UnresolvedBandwidth(String),

    /// Invalid run configuration; `path` is the JSON path of the offender.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An error raised while evaluating one wavelength of a spectrum sweep,
    /// annotated with the failing wavelength.
    #[error("at lambda3 = {lambda3_nm} nm: {source}")]
    AtWavelength {
        lambda3_nm: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn at_wavelength(self, lambda3_nm: f64) -> Self {
        Error::AtWavelength {
            lambda3_nm,
            source: Box::new(self),
        }
    }

    /// True for errors that should map to the CLI config exit code.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
