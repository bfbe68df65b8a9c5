use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RuinError>;

#[derive(Debug, Error)]
pub enum RuinError {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("{what} = {value} lies outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("operator row {row} is not an M-matrix row (diag {diag:e}, lower {lower:e}, upper {upper:e}); refine the y-grid")]
    NotDominant {
        row: usize,
        diag: f64,
        lower: f64,
        upper: f64,
    },

    #[error("projected SOR stalled at time index {t_index}: residual {residual:e} after {iterations} sweeps")]
    NotConverged {
        t_index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("contact set at time index {t_index} is not of the form [0, lower] U [upper, end]: {detail}")]
    NotTwoSided { t_index: usize, detail: String },

    #[error("value function not concave at time index {t_index}, node {node}: defect {defect:e}")]
    NotConcave {
        t_index: usize,
        node: usize,
        defect: f64,
    },

    #[error("strategy field: second derivative of the ruin probability not positive at time index {t_index}, node {node}")]
    NotConvex { t_index: usize, node: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("query outside grid coverage: {0}")]
    OutOfCoverage(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RuinError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RuinError::Io {
            path: path.into(),
            source,
        }
    }
}
