//! Simulator for pair creation out of strong-field vacua and its lattice
//! analogue: particle-hole pair production in a tilted Bose-Hubbard Mott
//! insulator at unit filling, treated in the strong-coupling mean-field
//! expansion around large coordination number.

pub mod correlations;
pub mod ed;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod model;
pub mod modes;
pub mod ode;
pub mod qed;

pub use error::{Error, Result};

use serde::Serialize;

/// In/out mixing coefficients of one field mode: out annihilation operators
/// expressed in the in basis, |alpha|² − |beta|² = 1 for a clean run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BogoliubovResult {
    pub alpha: ode::C64,
    pub beta: ode::C64,
    /// ||alpha|² − |beta|² − 1| as measured, before any check fires.
    pub unitarity_residual: f64,
}

impl BogoliubovResult {
    pub fn beta_sq(&self) -> f64 {
        self.beta.norm_sqr()
    }
}
