//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hilbert-space dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian: max |M - M\u{2020}| = {deviation:.3e} exceeds {tol:.1e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("empty Lindblad operator sequence")]
    EmptyLindbladSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "ill-conditioned Jordan decomposition: bi-orthonormality residual {residual:.3e} \
         exceeds {tol:.1e} after refinement"
    )]
    IllConditionedDecomposition { residual: f64, tol: f64 },

    #[error("Jordan cluster structure did not converge: {0}")]
    NonConvergence(String),

    #[error("path grid must have at least 16 intervals, got {0}")]
    GridTooCoarse(usize),

    #[error("field path is degenerate at theta = {theta}; theta must lie in (0, pi)")]
    DegeneratePath { theta: f64 },

    #[error("model evaluation failed at s = {s}: {source}")]
    ModelEvaluation {
        s: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("Jordan block structure changes along the path near s = {s}: {detail}")]
    StructureChange { s: f64, detail: String },

    #[error(
        "ambiguous block matching at s = {s}: leading overlaps {first:.6} and {second:.6} \
         are within 1e-3"
    )]
    MatchingAmbiguity { s: f64, first: f64, second: f64 },

    #[error(
        "tracking overlap modulus {modulus:.3} at s = {s} is below 0.5; \
         the grid does not resolve the path"
    )]
    TrackingOverlap { s: f64, modulus: f64 },

    #[error("block {label} is degenerate (G = {degeneracy}); use the holonomy interface")]
    DegenerateBlock { label: usize, degeneracy: usize },

    #[error(
        "step factor at s = {s} is {dist:.3} away from 1 (limit 0.5); \
         increase the path resolution (current N = {n_grid})"
    )]
    Resolution { s: f64, dist: f64, n_grid: usize },

    #[error("tracks do not share an eigenvalue: |{a} - {b}| exceeds cluster tolerance")]
    NotDegenerate { a: num_complex::Complex64, b: num_complex::Complex64 },

    #[error("gauge matrix at grid point {k} is singular or nearly singular")]
    SingularGauge { k: usize },

    #[error("Hamiltonian spectrum is degenerate along the path near s = {s}")]
    HamiltonianDegeneracy { s: f64 },

    #[error(
        "integration step is unstable: |T L| ds = {stiffness:.3} > 1; \
         use at least {suggested} steps"
    )]
    UnstableStep { stiffness: f64, suggested: usize },

    #[error("Jordan eigenvalue gap collapsed: |omega| = {gap:.3e} at s = {s}")]
    GapCollapse { gap: f64, s: f64 },

    #[error("crossover evaluation overflowed at T = {t}")]
    CrossoverOverflow { t: f64 },

    #[error("operation requires a closed path")]
    OpenPath,

    #[error("linear algebra backend error: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
