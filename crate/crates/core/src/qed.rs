//! Charged scalar field mode in a time-dependent homogeneous electric
//! field with a sech² profile: the strong-field benchmark the lattice
//! simulation is compared against.
//!
//! One momentum mode obeys ψ̈ + ω²(t)ψ = 0 with
//! ω²(t) = m² + k⊥² + (k_x + A(t))², A(t) = qE·τ·(1 + tanh(t/τ)),
//! so the gauge potential vanishes in the far past and the kick sums to
//! 2qEτ. Evolving from a positive-frequency in state and reading the
//! out-basis coefficients gives the pair content |β|² of that mode.

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::ode::{evolve_generator, CMat, Cf4Options, C64, ONE};
use crate::BogoliubovResult;
use rayon::prelude::*;
use serde::Serialize;

/// Mass, peak field strength qE, pulse duration τ and the momentum of one
/// mode (longitudinal k_x, transverse k⊥² lumped into one scalar).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QedModeParams {
    pub m: f64,
    pub qe: f64,
    pub tau: f64,
    pub k_x: f64,
    pub k_perp_sq: f64,
}

/// Integration window half-width in units of τ. sech²(13) ≈ 2·10⁻¹¹, so the
/// field at the window edge is comfortably below 10⁻¹⁰ of its peak.
pub const DEFAULT_WINDOW_FACTOR: f64 = 13.0;

/// Residual above which a run is rejected outright rather than reported.
pub const UNITARITY_REJECT: f64 = 1e-6;

impl QedModeParams {
    pub fn new(m: f64, qe: f64, tau: f64, k_x: f64, k_perp_sq: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::PhysicsGuard(format!("mass m = {m} must be finite and > 0")));
        }
        if !(qe >= 0.0) || !qe.is_finite() {
            return Err(Error::PhysicsGuard(format!("field strength qe = {qe} must be finite and >= 0")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::PhysicsGuard(format!("pulse duration tau = {tau} must be finite and > 0")));
        }
        if !k_x.is_finite() || !(k_perp_sq >= 0.0) || !k_perp_sq.is_finite() {
            return Err(Error::PhysicsGuard("momentum components must be finite, k_perp_sq >= 0".into()));
        }
        Ok(Self { m, qe, tau, k_x, k_perp_sq })
    }

    /// Mode centred on the final kick: k_x = −A(+∞)/2, where the in and out
    /// frequencies coincide and |β|² peaks.
    pub fn canonical(m: f64, qe: f64, tau: f64, k_perp_sq: f64) -> Result<Self> {
        Self::new(m, qe, tau, -qe * tau, k_perp_sq)
    }

    /// A(t) = qE·τ·(1 + tanh(t/τ)); zero in the far past.
    pub fn gauge_potential(&self, t: f64) -> f64 {
        self.qe * self.tau * (1.0 + (t / self.tau).tanh())
    }

    /// E(t)·q = qE·sech²(t/τ).
    pub fn field(&self, t: f64) -> f64 {
        let c = (t / self.tau).cosh();
        self.qe / (c * c)
    }

    pub fn omega_sq(&self, t: f64) -> f64 {
        let kin = self.k_x + self.gauge_potential(t);
        self.m * self.m + self.k_perp_sq + kin * kin
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.omega_sq(t).sqrt()
    }
}

/// Leading tunneling exponent of the pair density in the slow-pulse limit:
/// ln|β|² → −π(m² + k⊥²)/qE at the canonical longitudinal momentum.
pub fn schwinger_exponent(m: f64, qe: f64, k_perp_sq: f64) -> f64 {
    -std::f64::consts::PI * (m * m + k_perp_sq) / qe
}

/// Propagator of (ψ, ψ̇) from t0 to t1. The generator [[0, 1], [−ω², 0]] is
/// real and traceless, so the Wronskian survives to rounding accuracy.
pub fn mode_propagator(p: &QedModeParams, t0: f64, t1: f64, tol: f64) -> Result<CMat<2>> {
    let g = |t: f64| {
        let mut a = CMat::<2>::zero();
        a.m[0][1] = ONE;
        a.m[1][0] = C64::new(-p.omega_sq(t), 0.0);
        a
    };
    evolve_generator(
        &g,
        CMat::<2>::identity(),
        t0,
        t1,
        &[],
        &mut |_, _| {},
        &Cf4Options { tol, ..Default::default() },
    )
}

pub fn qed_bogoliubov(p: &QedModeParams, tol: f64) -> Result<BogoliubovResult> {
    qed_bogoliubov_windowed(p, DEFAULT_WINDOW_FACTOR, tol)
}

/// Pair content of one mode, with the integration window an explicit choice.
/// The window must be wide enough that the field at its edges is below
/// 10⁻¹⁰ of the peak; narrower windows are refused.
pub fn qed_bogoliubov_windowed(p: &QedModeParams, window_factor: f64, tol: f64) -> Result<BogoliubovResult> {
    if p.qe > 0.0 {
        let edge = 1.0 / (window_factor.cosh() * window_factor.cosh());
        if !(edge <= 1e-10) {
            return Err(Error::WindowViolation(format!(
                "window factor {window_factor}: residual field fraction {edge:e} at the edge exceeds 1e-10"
            )));
        }
    }
    let t_in = -window_factor * p.tau;
    let t_out = window_factor * p.tau;
    let u = mode_propagator(p, t_in, t_out, tol)?;

    let w_in = p.omega(t_in);
    let phase_in = C64::new(0.0, -w_in * t_in).exp();
    let psi0 = phase_in / (2.0 * w_in).sqrt();
    let dpsi0 = C64::new(0.0, -w_in) * psi0;
    let [psi, dpsi] = u.mul_vec(&[psi0, dpsi0]);

    let w_out = p.omega(t_out);
    let a = 0.5 * (psi + C64::new(0.0, 1.0 / w_out) * dpsi);
    let b = 0.5 * (psi - C64::new(0.0, 1.0 / w_out) * dpsi);
    let root = (2.0 * w_out).sqrt();
    let alpha = root * a * C64::new(0.0, w_out * t_out).exp();
    let beta = root * b * C64::new(0.0, -w_out * t_out).exp();

    let residual = (alpha.norm_sqr() - beta.norm_sqr() - 1.0).abs();
    if residual > UNITARITY_REJECT {
        return Err(Error::InvariantViolation(format!(
            "|alpha|^2 - |beta|^2 deviates from 1 by {residual:e}"
        )));
    }
    Ok(BogoliubovResult { alpha, beta, unitarity_residual: residual })
}

/// One transverse-momentum sample of a scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerpScanPoint {
    pub k_perp_sq: f64,
    pub alpha: C64,
    pub beta: C64,
    pub beta_sq: f64,
    pub unitarity_residual: f64,
    /// false when the point sat below the noise floor and was left out of the fit
    pub included: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerpScan {
    pub points: Vec<PerpScanPoint>,
    pub fit: LineFit,
    /// Slope the tunneling exponent predicts: −π/qE.
    pub predicted_slope: f64,
}

/// Scan ln|β|² against k⊥² at the canonical longitudinal momentum and fit a
/// line. Points with |β|² at or below `floor` are flagged and excluded; at
/// least four usable points are required.
pub fn perp_scan(
    m: f64,
    qe: f64,
    tau: f64,
    k_perp_sq_grid: &[f64],
    tol: f64,
    floor: f64,
) -> Result<PerpScan> {
    let results: Vec<PerpScanPoint> = k_perp_sq_grid
        .par_iter()
        .map(|&kp| -> Result<PerpScanPoint> {
            let p = QedModeParams::canonical(m, qe, tau, kp)?;
            let r = qed_bogoliubov(&p, tol)?;
            let beta_sq = r.beta_sq();
            Ok(PerpScanPoint {
                k_perp_sq: kp,
                alpha: r.alpha,
                beta: r.beta,
                beta_sq,
                unitarity_residual: r.unitarity_residual,
                included: beta_sq > floor,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = results.iter().filter(|r| r.included).map(|r| r.k_perp_sq).collect();
    let ys: Vec<f64> = results.iter().filter(|r| r.included).map(|r| r.beta_sq.ln()).collect();
    if xs.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "only {} of {} scan points above the floor {floor:e}",
            xs.len(),
            results.len()
        )));
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(PerpScan { points: results, fit, predicted_slope: -std::f64::consts::PI / qe })
}
