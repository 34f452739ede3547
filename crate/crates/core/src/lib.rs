//! Executable potential theory for degenerate elliptic and parabolic
//! equations: jets and cone subequations as membership oracles, Dirichlet
//! duality, fiberegularity certificates, Gårding eigenvalues, grid
//! potential-theoretic checks and comparison-principle harnesses.

pub mod error;
pub mod jet;
pub mod tolerances;

pub use error::{Error, Result};
pub use jet::{Classification, DirectionalCone, Jet, SymMatrix};
pub mod cones;
pub mod potential;
pub mod duality;
pub mod report;
pub mod garding;
pub mod fibermap;
pub mod operators;
pub mod comparison;
