use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("grids are not commensurable: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported synthesizer: {0}")]
    UnsupportedSynthesizer(String),

    #[error("unsupported analyzer: {0}")]
    UnsupportedAnalyzer(String),

    #[error("no closed-form cell mass for family `{0}`")]
    NoAnalyticMass(String),

    #[error("scale j={j} is not resolved by the grid (finest resolved scale: {max_j:?})")]
    Resolution { j: u32, max_j: Option<u32> },

    #[error("outside the domain of validity: {0}")]
    Domain(String),

    #[error("synthesizer is not admissible: best sigma = {sigma}")]
    Inadmissible { sigma: f64 },

    #[error(
        "no scale in [{j_min}, {j_max}] contracts below {sigma_prime} \
         (best ratio {best_ratio} at j={best_j:?}) after {completed} steps"
    )]
    ContractionFailure {
        j_min: u32,
        j_max: u32,
        sigma_prime: f64,
        best_ratio: f64,
        best_j: Option<u32>,
        completed: usize,
        trace: Vec<crate::decomposer::TraceEntry>,
    },

    #[error("adaptation failure: {0}")]
    AdaptationFailure(String),

    #[error("decomposition did not converge: {0}")]
    NotConverged(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the mathematics rather than of the input.
    pub fn is_mathematical(&self) -> bool {
        matches!(
            self,
            Error::Inadmissible { .. }
                | Error::ContractionFailure { .. }
                | Error::AdaptationFailure(_)
                | Error::NotConverged(_)
                | Error::Numerical(_)
                | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
