use thiserror::Error;

/// Errors shared by all solvers and operations.
#[derive(Debug, Error)]
pub enum HjError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CFL violation: dt = {given:.6e} exceeds the stable bound {required:.6e}")]
    Cfl { given: f64, required: f64 },

    #[error(
        "no convergence after {iterations} iterations: residual {residual:.3e} above tol {tol:.3e}"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        /// residual history, sampled every few hundred sweeps
        history: Vec<f64>,
    },

    #[error("conjugate maximizer hit the lattice boundary at q = ({q0}, {q1}); p_radius = {p_radius} is too small")]
    BoundaryAttainment { q0: f64, q1: f64, p_radius: f64 },

    #[error("component {0} is not convex in p")]
    NonConvex(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, HjError>;
