use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point {point:?} is outside the chart domain ({reason})")]
    Domain { point: [f64; 3], reason: String },
    #[error("geodesic left the chart domain at t = {t} (position {point:?})")]
    DomainExit { t: f64, point: [f64; 3] },
    #[error("geodesic integration exceeded {max_steps} steps")]
    StepLimit { max_steps: usize },
    #[error("perturbation sup-norm {sup} must be below 1")]
    PerturbationTooLarge { sup: f64 },
    #[error("grid {n_theta}x{n_phi} too coarse: {reason}")]
    GridTooCoarse {
        n_theta: usize,
        n_phi: usize,
        reason: String,
    },
    #[error("degenerate surface at node {node}: det of first fundamental form = {det}")]
    DegenerateSurface { node: usize, det: f64 },
    #[error("band limit {degree} not resolvable on {n_theta}x{n_phi} grid")]
    BandLimitExceeded {
        degree: usize,
        n_theta: usize,
        n_phi: usize,
    },
    #[error("unstable fit: {0}")]
    FitUnstable(String),
    #[error("radius {rho} outside admissible range (0, {limit})")]
    RadiusOutOfRange { rho: f64, limit: f64 },
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
