use thiserror::Error;

/// Errors raised by every stage of the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "eigenvalue with modulus {modulus} lies within {tol:e} of the unit circle; \
         the plant must have no poles on |z| = 1"
    )]
    UnitCircle { modulus: f64, tol: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("Riccati iteration failed: {0}")]
    Stabilizability(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("instability detected: state norm {norm:e} exceeds the guard at sample {index}")]
    Instability { index: usize, norm: f64 },

    #[error("ill-conditioned Gram matrix: sigma_min = {sigma_min:e} below threshold {threshold:e}")]
    Conditioning { sigma_min: f64, threshold: f64 },

    #[error("weak instrument: s_iv_hat = {s_iv:e} (cross-Gram sigma_min {sigma_min:e} below threshold {threshold:e})")]
    WeakInstrument {
        s_iv: f64,
        sigma_min: f64,
        threshold: f64,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by files, formats or configuration rather than
    /// by the numerical content of the problem.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. } | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
