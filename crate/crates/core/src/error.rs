use thiserror::Error;

/// Every failure the toolkit can report.
///
/// Variants map one-to-one onto the error names used in CLI JSON output
/// (see [`Error::name`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x:?} lies outside the valid domain of {field}: {reason}")]
    DomainViolation {
        field: String,
        x: [f64; 3],
        reason: String,
    },
    #[error("|B| = {norm:e} is below the null floor at {x:?}")]
    FieldNull { x: [f64; 3], norm: f64 },
    #[error("chart {chart} is degenerate at {x:?} (defining cross product {norm:e})")]
    ChartDegenerate {
        chart: String,
        x: [f64; 3],
        norm: f64,
    },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("two evaluations disagree: {what} (difference {difference:e})")]
    ConsistencyFailure { what: String, difference: f64 },
    #[error("angle unwrapping failed at {x:?}: stencil spans a branch cut")]
    BranchJump { x: [f64; 3] },
    #[error("field vanishes on the surface near {x:?}")]
    FieldNullOnSurface { x: [f64; 3] },
    #[error("surface node {x:?} lies inside excluded region {region}")]
    SurfaceInExcludedRegion { x: [f64; 3], region: usize },
    #[error("quadrature did not converge: orders disagree by {discrepancy:e}")]
    QuadratureNotConverged { flux: f64, discrepancy: f64 },
    #[error("flux/2pi = {q_estimate} is not within {tolerance:e} of an integer")]
    NotQuantized { q_estimate: f64, tolerance: f64 },
    #[error("field {0} has no global vector potential")]
    NoGlobalPotential(String),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("kernel is not one-dimensional (smallest singular values {smallest:e}, {second:e})")]
    DegenerateKernel { smallest: f64, second: f64 },
    #[error("kernel has no time component (|dt| = {dt_component:e})")]
    NonTemporal { dt_component: f64 },
    #[error("step size collapsed after {halvings} halvings at t = {t}: {cause}")]
    StepCollapse {
        t: f64,
        halvings: u32,
        cause: Box<Error>,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// Stable identifier used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DomainViolation { .. } => "DomainViolation",
            Error::FieldNull { .. } => "FieldNullError",
            Error::ChartDegenerate { .. } => "ChartDegenerate",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::ConsistencyFailure { .. } => "ConsistencyFailure",
            Error::BranchJump { .. } => "BranchJump",
            Error::FieldNullOnSurface { .. } => "FieldNullOnSurface",
            Error::SurfaceInExcludedRegion { .. } => "SurfaceInExcludedRegion",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::NotQuantized { .. } => "NotQuantized",
            Error::NoGlobalPotential(_) => "NoGlobalPotential",
            Error::SingularPoint(_) => "SingularPoint",
            Error::DegenerateKernel { .. } => "DegenerateKernel",
            Error::NonTemporal { .. } => "NonTemporal",
            Error::StepCollapse { .. } => "StepCollapse",
            Error::InvalidSpec(_) => "InvalidSpec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
