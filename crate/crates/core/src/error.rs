use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value from {what} at t={t}, x={x:?}")]
    NonFiniteCoefficient { what: &'static str, t: f64, x: Vec<f64> },

    #[error("jump rate {value} exceeds the bound {bound} at t={t}, z={z}, x={x:?}")]
    RateBoundViolated { value: f64, bound: f64, t: f64, z: f64, x: Vec<f64> },

    #[error("operation requires a finite-mass region but mu(G) is infinite")]
    InfiniteMass,

    #[error("quadrature on ({a}, {b}] did not reach tolerance {tol} (estimated error {estimate})")]
    QuadratureDivergence { a: f64, b: f64, tol: f64, estimate: f64 },

    #[error("covariance matrix has eigenvalue {eigenvalue} below -1e-12")]
    NonPsdCovariance { eigenvalue: f64 },

    #[error("derivative of order {order} of {what} requested but only {available} available and finite differences are disabled")]
    MissingDerivative { what: &'static str, order: usize, available: usize },

    #[error("source and limit measures differ on the kept-jump region: {detail}")]
    RegionMeasureMismatch { detail: String },

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("parameter constraint violated: {0}")]
    ParameterConstraintViolated(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path {index} failed: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn to_f64_vec<S: crate::Scalar>(x: &[S]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}
