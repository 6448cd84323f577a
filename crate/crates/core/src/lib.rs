//! Relaxed retraction solver for systems of split variational inequalities
//! in finite-dimensional ℓ^p spaces.

pub mod cli;
pub mod error;
pub mod linops;
pub mod lp_space;
pub mod problem;
pub mod retractions;
pub mod sample;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use linops::BoundedLinearOp;
pub use lp_space::LpSpace;
pub use problem::{generate_instance, GeneratorSpec, Moduli, MonotoneMap, SspvipInstance};
pub use retractions::{ConvexSet, Retraction};
pub use solver::{certificate, solve_spvip, solve_sspvip, ContractionCertificate, SolverConfig};
