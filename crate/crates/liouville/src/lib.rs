//! Perturbative analysis of open-quantum-system master equations.
//!
//! The crate provides dense operator/superoperator algebra, degenerate
//! canonical perturbation theory of stationary Liouvillians (second-order
//! off-diagonal corrections, Pauli-matrix diagonalization, fourth-order
//! degenerate-subspace corrections), time evolution with positivity
//! auditing, an exactly solvable quantum Brownian motion benchmark, and a
//! Laplace-domain treatment of time-nonlocal memory kernels.
//!
//! The central demonstration: solutions of a master equation truncated at
//! order 2n in the system-environment coupling are accurate only to order
//! 2n-2 at late times, and the order-(2n+2) Pauli matrix restores order-2n
//! accuracy. See the `perturb` and `dynamics` modules for the measurable
//! statements and the `qbm` module for the exactly solvable case.

pub mod dynamics;
pub mod error;
pub mod models;
pub mod nonlocal;
pub mod perturb;
pub mod qbm;
pub mod superop;

pub use error::{Error, Result};

/// Numerical tolerances used across the crate.
///
/// All thresholds are configurable; the defaults are chosen for IEEE-754
/// doubles on the small (d <= 8) dense problems this crate targets.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Absolute Hermiticity tolerance (max-entry deviation of `A - A†`).
    pub hermiticity: f64,
    /// Absolute trace tolerance for density matrices and generators.
    pub trace: f64,
    /// Relative eigen-residual tolerance for spectral decompositions.
    pub eigen_residual: f64,
    /// Relative distance below which exact eigenvalues are clustered as
    /// degenerate.
    pub cluster: f64,
    /// Relative distance below which two Bohr frequencies count as resonant.
    pub resonance: f64,
    /// Relative Pauli-eigenvalue gap below which degenerate perturbation
    /// theory refuses to proceed.
    pub pauli_gap: f64,
    /// Maximum acceptable condition number of an eigenvector matrix.
    pub condition_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-10,
            trace: 1e-10,
            eigen_residual: 1e-8,
            cluster: 1e-9,
            resonance: 1e-9,
            pauli_gap: 1e-6,
            condition_max: 1e12,
        }
    }
}

impl Tolerances {
    /// Default tolerances, with the base absolute tolerance overridden by
    /// the `LIOUVILLE_TOL` environment variable when set.
    ///
    /// The override sets the Hermiticity/trace tolerances directly and
    /// rescales the eigen-residual and clustering thresholds by the same
    /// factor relative to their defaults.
    pub fn from_env() -> Self {
        let mut tol = Tolerances::default();
        if let Ok(raw) = std::env::var("LIOUVILLE_TOL") {
            if let Ok(base) = raw.trim().parse::<f64>() {
                if base.is_finite() && base > 0.0 {
                    let factor = base / 1e-10;
                    tol.hermiticity = base;
                    tol.trace = base;
                    tol.eigen_residual = 1e-8 * factor;
                    tol.cluster = 1e-9 * factor;
                    tol.resonance = 1e-9 * factor;
                }
            }
        }
        tol
    }
}
