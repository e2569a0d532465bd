use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdfError {
    #[error("BDF order {k} outside supported range {min}..={max}")]
    OrderOutOfRange { k: usize, min: usize, max: usize },
    #[error("identity system for k={k} is not lower triangular at row {row}")]
    NotTriangular { k: usize, row: usize },
    #[error("identity system for k={k} is singular at row {row}")]
    SingularSystem { k: usize, row: usize },
    #[error("identity system for k={k} is inconsistent at removed row ({m},{p})")]
    InconsistentSystem { k: usize, m: usize, p: usize },
    #[error("root finder did not converge for polynomial of degree {degree}")]
    RootFinding { degree: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("mesh subdivision parameter must be at least 1")]
    EmptyMesh,
    #[error("anisotropy diagonal must be positive, got {0:?}")]
    NonPositiveAnisotropy([f64; 2]),
    #[error("non-finite sample at vertex {vertex}, component {component}")]
    NonFiniteSample { vertex: usize, component: usize },
    #[error("sample at vertex {vertex} has {got} components, expected {expected}")]
    ComponentMismatch { vertex: usize, got: usize, expected: usize },
    #[error("operators do not share a sparsity pattern")]
    PatternMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{method} did not converge within {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{method} broke down at iteration {iteration}")]
    Breakdown {
        method: &'static str,
        iteration: usize,
    },
    #[error("matrix not positive definite at pivot {pivot} (value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error("history does not hold the states required by {scheme} at step {step}")]
    History { scheme: String, step: usize },
    #[error("linear solve failed at step {step}: {source}")]
    Kkt {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Bdf(#[from] BdfError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least two (s, violation) pairs, got {0}")]
    TooFewPairs(usize),
    #[error("violation must be positive, got {value} at index {index}")]
    NonPositiveViolation { index: usize, value: f64 },
    #[error("step sizes must be strictly decreasing (index {index})")]
    NonMonotoneSteps { index: usize },
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid study configuration: {0}")]
    Invalid(String),
    #[error("run {scheme} with s={s} failed: {source}")]
    Run {
        scheme: String,
        s: f64,
        #[source]
        source: FlowError,
    },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
