use thiserror::Error;

use crate::assembly::LinearSolveReport;
use crate::timestepper::NewtonReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the meshed domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("flux Jacobian is singular at a zero gradient (kappa = 0, p < 2, eps_reg = 0)")]
    SingularJacobian,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("finite element functions live on different spaces")]
    SpaceMismatch,
    #[error("conjugate gradients did not converge: {0:?}")]
    MaxIterations(LinearSolveReport),
    #[error("matrix is not symmetric positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("non-finite value {value} at node ({x}, {y})")]
    NonFiniteValue { x: f64, y: f64, value: f64 },
    #[error("force is not integrable in time: exponent beta = {0} must lie in (0, 1)")]
    NonIntegrableForce(f64),
    #[error("nonlinear solve failed at step {step}: {report:?}")]
    NonConvergence { step: usize, report: Box<NewtonReport> },
    #[error("reference and discrete solutions are not nested: {0}")]
    IncompatibleHierarchy(String),
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
