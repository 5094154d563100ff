use thiserror::Error;

/// Errors raised anywhere in the surrogate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The correlation matrix stayed indefinite through the whole nugget ladder.
    #[error("correlation matrix is not positive definite (largest nugget tried: {nugget:e})")]
    SingularSystem { nugget: f64 },

    #[error("regression system is rank deficient: {0}")]
    RankDeficientRegression(String),

    #[error("every likelihood multistart failed")]
    AllStartsFailed,

    /// A (possibly transformed) evaluation point left the region where the
    /// database entries are valid.
    #[error("point {point:?} left the validity region {lower:?}..{upper:?}")]
    DomainEscape {
        point: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },

    #[error("damping exhausted without decreasing the objective (cost {cost:e})")]
    NoDescent { cost: f64 },

    #[error("degenerate spectrum: numerical rank {numerical_rank} of {size}")]
    DegenerateSpectrum { numerical_rank: usize, size: usize },

    #[error("design matrix is rank deficient: rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("low-fidelity trend is identically zero at the samples")]
    ZeroTrend,

    #[error("validation values have zero spread")]
    DegenerateValidation,

    #[error("stale artifact {artifact}: expected hash {expected}, found {found}")]
    Stale {
        artifact: String,
        expected: String,
        found: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
}

impl Error {
    /// Short machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::SingularSystem { .. } => "singular_system",
            Error::RankDeficientRegression(_) => "rank_deficient_regression",
            Error::AllStartsFailed => "all_starts_failed",
            Error::DomainEscape { .. } => "domain_escape",
            Error::NoDescent { .. } => "no_descent",
            Error::DegenerateSpectrum { .. } => "degenerate_spectrum",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::ZeroTrend => "zero_trend",
            Error::DegenerateValidation => "degenerate_validation",
            Error::Stale { .. } => "stale_artifact",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
