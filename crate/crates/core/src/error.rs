//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter set violates a physical admissibility condition
    /// (e.g. outside the Mott regime, coupling window, size caps).
    #[error("physics guard: {0}")]
    PhysicsGuard(String),
    /// Requested gauge is incompatible with the lattice topology.
    #[error("gauge mismatch: {0}")]
    GaugeMismatch(String),
    /// Hilbert-space dimension above the configured cap.
    #[error("dimension exceeded: {0}")]
    DimensionExceeded(String),
    /// Envelope ordering or termination requirements not met.
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    /// A conserved quantity drifted beyond its contract bound.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// Integrator could not reach the requested accuracy.
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    /// Scan step too coarse to resolve the targeted feature.
    #[error("step too coarse: {0}")]
    StepTooCoarse(String),
    /// Too few usable points, or no spread, for a least-squares fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    /// Requested quantities fall outside the validated window.
    #[error("window violation: {0}")]
    WindowViolation(String),
    /// A scan found no resonance where one was required.
    #[error("resonance not found: {0}")]
    ResonanceNotFound(String),
    /// Iterative eigensolver failed to converge.
    #[error("no convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
