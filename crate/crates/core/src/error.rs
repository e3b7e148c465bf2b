//! Error taxonomy shared by all modules.
//!
//! Every failure mode carries enough context to act on it; the CLI maps
//! each variant to a distinct exit code.

use thiserror::Error;

/// Errors produced by the mesh, spectral, contour and solver stages.
#[derive(Debug, Error)]
pub enum Error {
    /// Interval bounds passed in the wrong order.
    #[error("invalid interval: expected a < b, got a = {a}, b = {b}")]
    InvalidInterval { a: f64, b: f64 },

    /// Mesh size outside the supported range (0, 0.5).
    #[error("mesh size h = {h} outside (0, 0.5)")]
    MeshSize { h: f64 },

    /// A coefficient field is not strictly positive where it must be.
    #[error("coefficient positivity violated: min {name} = {min} at ({x1}, {x2})")]
    NonPositiveCoefficient {
        name: &'static str,
        min: f64,
        x1: f64,
        x2: f64,
    },

    /// Compactly supported data leaks outside the stated cell.
    #[error("field support leaks outside cell {cell}")]
    SupportLeak { cell: i32 },

    /// Unknown built-in problem id.
    #[error("unknown example id: {0}")]
    UnknownExample(String),

    /// Division by a numerically vanishing field value.
    #[error("field magnitude {min} below threshold {threshold} on the source support")]
    DivisionDegeneracy { min: f64, threshold: f64 },

    /// The cell system A(α,k) is numerically singular at this quasimomentum.
    #[error("cell problem singular at alpha = {re} + {im}i (rcond estimate {rcond:.3e})")]
    SingularCellProblem { re: f64, im: f64, rcond: f64 },

    /// Generic linear algebra backend failure.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// Eigenvalue iteration did not converge.
    #[error("eigensolver failed to converge: {0}")]
    EigenNonConvergence(String),

    /// A propagating mode with |λ| below threshold was found (standing wave).
    #[error("standing wave detected: |lambda| = {lambda_abs:.3e} below {tol:.3e} at beta = {beta}")]
    StandingWave {
        beta: f64,
        lambda_abs: f64,
        tol: f64,
    },

    /// Mode direction from sign(λ) contradicts the dispersion-branch slope.
    #[error("mode classification inconsistent at beta = {beta}: sign(lambda) = {lambda_sign}, sign(mu') = {slope_sign}")]
    ClassificationInconsistency {
        beta: f64,
        lambda_sign: f64,
        slope_sign: f64,
    },

    /// Rightward and leftward exceptional sets overlap; the indented
    /// contour cannot separate them.
    #[error("rightward and leftward exceptional values overlap near alpha = {alpha}")]
    ExceptionalOverlap { alpha: f64 },

    /// The requested indentation radius violates the contour conditions.
    #[error("contour configuration invalid: {0}")]
    ContourConfiguration(String),

    /// The shifted line passes too close to a complex Floquet eigenvalue.
    #[error("shift sigma = {sigma} inadmissible: eigenvalue at {re} + {im}i within guard distance")]
    SigmaInadmissible { sigma: f64, re: f64, im: f64 },

    /// A contour node is closer to an exceptional value than allowed.
    #[error("contour node at {re} + {im}i within {dist:.3e} of exceptional value {exceptional}")]
    ContourProximity {
        re: f64,
        im: f64,
        dist: f64,
        exceptional: f64,
    },

    /// The coupled block is numerically singular: k² lies in the point
    /// spectrum of the perturbed operator.
    #[error("trapped mode detected: coupled system singular (rcond estimate {rcond:.3e})")]
    TrappedMode { rcond: f64 },

    /// Dimension mismatch between cooperating objects.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Damped truncated solve decays too slowly for the chosen half-length.
    #[error("truncated strip too short: boundary residual {boundary:.3e} exceeds {tol:.3e}; enlarge R")]
    EnlargeR { boundary: f64, tol: f64 },

    /// The ε-sequence of damped solves is not Cauchy.
    #[error("damped solves do not converge as damping decreases (last correction {correction:.3e})")]
    NoConvergence { correction: f64 },

    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Required artifact missing on disk.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    /// I/O failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInterval { .. }
            | Error::MeshSize { .. }
            | Error::UnknownExample(_)
            | Error::Config(_) => 2,
            Error::NonPositiveCoefficient { .. }
            | Error::SupportLeak { .. }
            | Error::DivisionDegeneracy { .. } => 3,
            Error::SingularCellProblem { .. } => 4,
            Error::Linalg(_) | Error::EigenNonConvergence(_) => 5,
            Error::StandingWave { .. } => 6,
            Error::ClassificationInconsistency { .. } => 7,
            Error::ExceptionalOverlap { .. }
            | Error::ContourConfiguration(_)
            | Error::ContourProximity { .. }
            | Error::SigmaInadmissible { .. } => 8,
            Error::TrappedMode { .. } => 9,
            Error::DimensionMismatch(_) => 10,
            Error::EnlargeR { .. } | Error::NoConvergence { .. } => 11,
            Error::MissingArtifact(_) => 12,
            Error::Io(_) => 13,
        }
    }
}
