use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error("invalid accuracy curve: {0}")]
    Validation(String),

    #[error("unstable queue: rho = {rho} (lambda = {lambda}, n_c = {n_c}) must be < 1")]
    Unstable { rho: f64, lambda: f64, n_c: u32 },

    #[error("PAoTI diverges: classification accuracy p_c = {p_c} never resets the age")]
    Divergent { p_c: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("departure at t = {t} precedes the previous departure at t = {prev}")]
    TraceOrder { t: f64, prev: f64 },

    #[error("no accuracy curve for dataset {dataset}, model {model}, snr {snr_db} dB")]
    MissingCurve { dataset: String, model: String, snr_db: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
