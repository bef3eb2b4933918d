use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("grid too coarse for contraction window: need step <= {required_step:.6e}, have {step:.6e}")]
    GridTooCoarse { required_step: f64, step: f64 },

    #[error("Picard iteration did not converge after {iters} sweeps (last difference {last_diff:.3e}, measured factor {factor:.3e})")]
    ContractionFailure {
        iters: usize,
        last_diff: f64,
        factor: f64,
    },

    #[error("certificate error: {0}")]
    Certificate(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
