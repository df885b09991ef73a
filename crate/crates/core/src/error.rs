use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("invalid manifold or point: {0}")]
    Manifold(String),
    #[error("invalid boundary: {0}")]
    Boundary(String),
    #[error("invalid density: {0}")]
    Density(String),
    #[error("invalid graph input: {0}")]
    Graph(String),
    #[error("time step {dt} exceeds the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("solver precondition violated: {0}")]
    Solver(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("rate fit: {0}")]
    Fit(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
