//! Steady-state covariance and Wigner entropy-production budget of two
//! coupled, dissipative bosonic modes, one of which is parametrically driven.
//!
//! The numerical route (Lyapunov solve, ODE evolution, stochastic
//! trajectories) and the analytic route (closed-form coefficients) are kept in
//! separate modules so each can be checked against the other.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod ensemble;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod trajectory;

pub use closedform::{
    coefficients, resonance_case, vacuum_components_closed, ClosedFormCoefficients,
};
pub use entropy::{
    classical_limit_pi1, decompose, entropy_production_offdiag, entropy_production_trace,
    wigner_entropy, EntropyBudget,
};
pub use error::{Error, Result};
pub use lyapunov::{evolve, solve_steady_state, symplectic_eigenvalues, CovarianceMatrix};
pub use model::{
    build_drift_diffusion, check_stability, derive_constants, thermal_occupation, DerivedConstants,
    DriftDiffusion, StabilityReport, SystemParams,
};
pub use trajectory::{simulate_covariance, TrajectoryConfig, TrajectoryEstimate};

/// Relative difference |a − b| / max(|a|, |b|); zero when both are zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
