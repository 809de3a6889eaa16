//! Numerical laboratory for weakly coupled Hamilton-Jacobi systems with fast
//! switching: oscillatory-system solvers, effective-Hamiltonian extraction
//! from discounted cell problems, matched-asymptotics rate harnesses,
//! Dirichlet problems, and Monte Carlo control oracles.

pub mod cell;
pub mod coupling;
pub mod dirichlet;
pub mod effective;
pub mod error;
pub mod evolution;
pub mod flat;
pub mod grid;
pub mod hamiltonian;
pub mod mc;
pub mod oracle;
pub mod report;
pub mod scalar_field;

pub use coupling::CouplingMatrix;
pub use error::{HjError, Result};
pub use grid::{StateField, TorusGrid, Vec2};
pub use hamiltonian::{Hamiltonian, HamiltonianSpec};
pub use scalar_field::ScalarField;
