use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point at radius {radius} lies inside the excluded ball of radius {r_min}")]
    Domain { radius: f64, r_min: f64 },
    #[error("metric is not invertible")]
    SingularMetric,
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("degenerate immersion at node {node} (det g = {det})")]
    DegenerateImmersion { node: usize, det: f64 },
    #[error("surface is no longer a radial graph at node {node} (ḡ(ν,ω) = {value})")]
    GraphBreakdown { node: usize, value: f64 },
    #[error("spacetime mean curvature undefined at node {node}: H = {h}, |P| = {p}")]
    Admissibility { node: usize, h: f64, p: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("flow did not converge: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
