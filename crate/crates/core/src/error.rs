use thiserror::Error;

/// Errors raised by the solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive density {rho:e} in cell {cell}")]
    NonPositiveDensity { cell: usize, rho: f64 },

    #[error("invalid moments in cell {cell}: rho = {rho:e}, T = {temperature:e}")]
    InvalidMoments {
        cell: usize,
        rho: f64,
        temperature: f64,
    },

    #[error("implicit solve failed: {0}")]
    SolveFailure(String),

    #[error("state norm {norm:e} exceeded the overflow threshold at t = {t}")]
    Overflow { t: f64, norm: f64 },

    #[error("kernel-mode quadrature not converged: max change {max_change:e} on doubling")]
    QuadratureUnconverged { max_change: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grids cannot be compared: {0}")]
    GridIncompatible(String),

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("negative total mass {0:e}")]
    NegativeMass(f64),

    #[error("vacuum state in cell {cell}: rho = {rho:e}, internal energy = {internal:e}")]
    VacuumState {
        cell: usize,
        rho: f64,
        internal: f64,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("time step {dt:e} violates the transport CFL bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cache file error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveDensity { .. } => "NonPositiveDensity",
            Error::InvalidMoments { .. } => "InvalidMoments",
            Error::SolveFailure(_) => "SolveFailure",
            Error::Overflow { .. } => "Overflow",
            Error::QuadratureUnconverged { .. } => "QuadratureUnconverged",
            Error::GridMismatch(_) => "GridMismatch",
            Error::GridIncompatible(_) => "GridIncompatible",
            Error::LinearSolveFailure(_) => "LinearSolveFailure",
            Error::NegativeMass(_) => "NegativeMass",
            Error::VacuumState { .. } => "VacuumState",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::CflViolation { .. } => "CflViolation",
            Error::Config(_) => "Config",
            Error::Cache(_) => "Cache",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
