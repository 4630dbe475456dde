//! Penalized sieve estimation for partial linear single-index
//! varying-coefficient models with Gaussian or Cox outcomes.

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod crossval;
pub mod error;
pub mod io;
pub mod linear;
mod linalg;
pub mod model;
pub mod penalty;
pub mod selection;
pub mod simulation;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
pub use model::{Coefficients, Dataset, Outcome, OutcomeKind, Survival};
pub use penalty::{KStrategy, Metric, PenaltyConfig};
pub use selection::{fit_path, GridSpec, PathResult, SelectionReport};
pub use solver::{fit, FitResult, SolverConfig};
pub use spline::{GridPoints, SplineBasis};
