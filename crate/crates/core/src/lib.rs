//! Asymptotic-preserving IMEX solvers for stiff kinetic equations.

pub mod error;
pub mod fokker_planck;
pub mod grid;
pub mod harness;
pub mod ap_solver;
pub mod collision;
pub mod macro_ref;
pub mod stiff_ode;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
