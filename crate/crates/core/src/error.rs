use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment drivers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("grid spacing {h:.3e} does not resolve epsilon {epsilon:.3e} (need h <= {limit:.3e})")]
    Unresolved { h: f64, epsilon: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary condition {bc} is not compatible with geometry {geometry}")]
    BoundaryMismatch { bc: String, geometry: String },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("coordinate singularity at t = {0}")]
    CoordinateSingularity(f64),

    #[error("quadrature did not converge: estimate {estimate:.6e}, error {error:.3e}, partial sums {partial:?}")]
    Quadrature {
        estimate: f64,
        error: f64,
        partial: Vec<f64>,
    },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("singular Jacobian, near-null eigenvalue {eigenvalue:.3e}")]
    SingularJacobian { eigenvalue: f64 },

    #[error("bordered system singular, lowest singular value estimate {0:.3e}")]
    BorderedSingular(f64),

    #[error("H = {0} outside CMC neighborhood")]
    OutsideCmcNeighborhood(f64),

    #[error("energy increased below the step-size floor (dt = {dt:.3e}, dE = {increase:.3e})")]
    EnergyIncrease { dt: f64, increase: f64 },

    #[error("no interface")]
    NoInterface,

    #[error("interface outside collar")]
    InterfaceOutsideCollar,

    #[error("decay fit floor violated: 1 - |u| = {0:.3e} on the collar")]
    DecayFloor(f64),

    #[error("no matching tau in scan; derivative mismatch curve {0:?}")]
    NoShootingRoot(Vec<(f64, f64)>),

    #[error("contract failure: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("output {0} already exists (pass --force to overwrite)")]
    OutputCollision(std::path::PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Errors caused by the invocation rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            LabError::Config(_) | LabError::OutputCollision(_) | LabError::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
