//! Simulation of giant artificial atoms coupled to a waveguide at multiple
//! points, the native three-qubit gates (CCZS, DIV) they enable through
//! frequency tuning, and GHZ-state preparation protocols under Lindblad
//! decoherence.
//!
//! The crate is organized as follows:
//!
//! - [`couplings`]: waveguide-mediated rates and couplings from coupling-point
//!   geometry, decoherence-free frequency search, reference layouts.
//! - [`algebra`]: multi-qutrit states and operators, ladder operators,
//!   embedding, partial trace.
//! - [`dynamics`]: Lindblad master-equation propagation with an independent
//!   superoperator-exponential oracle.
//! - [`gates`]: ideal target unitaries, effective resonant Hamiltonians, and
//!   the full rotating-frame model with anharmonicity.
//! - [`tomography`]: Choi-matrix reconstruction, process/average/state
//!   fidelities, virtual-Z calibration.
//! - [`protocols`]: GHZ-3/GHZ-5 circuits, frequency schedules, noise sweeps
//!   and linear-coefficient fits.
//! - [`cli`]: command implementations behind the `giant-gates` binary.

pub mod algebra;
pub mod cli;
pub mod config;
pub mod couplings;
pub mod dynamics;
pub mod gates;
pub mod linalg;
pub mod protocols;
pub mod tomography;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("integration failed: {msg} (achieved error estimate {achieved:.3e})")]
    IntegrationFailure { msg: String, achieved: f64 },

    #[error("scheduling failed: {0}")]
    Scheduling(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
