//! Exact simulator and average-Hamiltonian analyzer for dynamical-decoupling
//! pulse sequences on dipolar-coupled spin systems.

pub mod algebra;
pub mod averaging;
pub mod config;
pub mod dynamics;
pub mod output;
pub mod runner;
pub mod sequence;
pub mod system;

/// Shared numeric tolerances. These are contract values: tests and callers
/// compare against them, so they are named once here.
pub mod tol {
    /// Unitarity and operator-equality checks.
    pub const UNITARY: f64 = 1e-12;
    /// Generic operator equality in the float backend.
    pub const EQUALITY: f64 = 1e-12;
    /// Hermiticity validation of Hamiltonians and density matrices.
    pub const HERMITICITY: f64 = 1e-10;
}
