//! Model parameters, lattice protocols, and the closed-form spectral
//! quantities (structure factor, gap, dispersion, effective speed) of the
//! tilted Bose-Hubbard Mott insulator at unit filling.

use crate::error::{Error, Result};
use serde::Serialize;

/// U/J ratio where the Mott gap closes: 3 + 2·√2.
pub const CRITICAL_RATIO: f64 = 3.0 + 2.0 * std::f64::consts::SQRT_2;

/// Hopping rate J, on-site repulsion U and lattice dimension d of a
/// hypercubic lattice with unit spacing, one boson per site, ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub j: f64,
    pub u: f64,
    pub d: usize,
}

impl ModelParams {
    pub fn new(j: f64, u: f64, d: usize) -> Result<Self> {
        if !j.is_finite() || j < 0.0 {
            return Err(Error::PhysicsGuard(format!("hopping J = {j} must be finite and >= 0")));
        }
        if !u.is_finite() || u <= 0.0 {
            return Err(Error::PhysicsGuard(format!("interaction U = {u} must be finite and > 0")));
        }
        if !(1..=3).contains(&d) {
            return Err(Error::PhysicsGuard(format!("lattice dimension d = {d} must be 1, 2 or 3")));
        }
        Ok(Self { j, u, d })
    }

    /// Coordination number of the hypercubic lattice.
    pub fn z(&self) -> usize {
        2 * self.d
    }

    /// Stiffness of the long-wavelength expansion of the structure factor,
    /// 1/(2d) for unit lattice spacing.
    pub fn stiffness(&self) -> f64 {
        1.0 / (2.0 * self.d as f64)
    }

    /// Interaction strength at which the gap closes for this hopping rate.
    pub fn critical_u(&self) -> f64 {
        CRITICAL_RATIO * self.j
    }

    pub fn in_mott_regime(&self) -> bool {
        self.u > self.critical_u()
    }

    pub fn require_mott(&self) -> Result<()> {
        if self.in_mott_regime() {
            Ok(())
        } else {
            Err(Error::PhysicsGuard(format!(
                "Mott-phase guard: U = {} must exceed (3 + 2*sqrt(2))*J = {}",
                self.u,
                self.critical_u()
            )))
        }
    }

    /// Structure factor T_k = (1/d)·Σᵢ cos(kᵢ + a_shift·δᵢ,axis), the scaled
    /// Fourier transform of the hopping matrix with an accumulated tilt
    /// phase absorbed on one axis.
    pub fn hopping_structure(&self, k: &[f64], axis: usize, a_shift: f64) -> f64 {
        assert_eq!(k.len(), self.d, "wavevector must have d components");
        assert!(axis < self.d, "tilt axis out of range");
        let mut sum = 0.0;
        for (i, ki) in k.iter().enumerate() {
            let shift = if i == axis { a_shift } else { 0.0 };
            sum += (ki + shift).cos();
        }
        sum / self.d as f64
    }

    /// Energy gap √(J² − 6JU + U²) of the Mott insulator.
    pub fn energy_gap(&self) -> Result<f64> {
        let (j, u) = (self.j, self.u);
        let radicand = j * j - 6.0 * j * u + u * u;
        // Exactly at the critical ratio, rounding can push the radicand a few
        // ulp below zero; only a genuinely negative value is an error.
        if radicand < -1e-12 * (j * j + u * u) {
            return Err(Error::PhysicsGuard(format!(
                "complex gap: U = {u} lies below the critical coupling {}",
                self.critical_u()
            )));
        }
        Ok(radicand.max(0.0).sqrt())
    }

    /// Quasiparticle pair frequency at structure-factor value t_k.
    pub(crate) fn omega_sq_at(&self, t_k: f64) -> f64 {
        let half_split = 0.5 * (3.0 * self.j * t_k - self.u);
        half_split * half_split - 2.0 * self.j * self.j * t_k * t_k
    }

    /// Eigenfrequency pair ±ω(k) of the static two-level system at
    /// wavevector k, ω(k) = √(¼(3J·T_k − U)² − 2J²T_k²).
    pub fn dispersion(&self, k: &[f64]) -> Result<DispersionPoint> {
        let t_k = self.hopping_structure(k, 0, 0.0);
        let omega_sq = self.omega_sq_at(t_k);
        let scale = self.u * self.u + self.j * self.j;
        if omega_sq < -1e-12 * scale {
            return Err(Error::PhysicsGuard(format!(
                "complex frequency at T_k = {t_k}: outside the Mott regime"
            )));
        }
        let omega = omega_sq.max(0.0).sqrt();
        Ok(DispersionPoint { k: k.to_vec(), omega_plus: omega, omega_minus: -omega })
    }

    /// Effective light speed c_eff = √(ξ(3JU − J²)/2); meaningful in the
    /// Mott regime, zero at J = 0.
    pub fn effective_speed(&self) -> f64 {
        (self.stiffness() * (3.0 * self.j * self.u - self.j * self.j).max(0.0) / 2.0).sqrt()
    }

    /// Effective mass from Δℰ = 2·m_eff·c_eff².
    pub fn effective_mass(&self) -> Result<f64> {
        let c_sq = self.stiffness() * (3.0 * self.j * self.u - self.j * self.j) / 2.0;
        if c_sq <= 0.0 {
            return Err(Error::PhysicsGuard("effective mass undefined at J = 0".into()));
        }
        Ok(self.energy_gap()? / (2.0 * c_sq))
    }
}

/// Dispersion sample: the two eigenfrequencies at one wavevector.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionPoint {
    pub k: Vec<f64>,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

/// Piecewise-smooth time envelope: zero, constant, or a cos²-ramped pulse.
/// Pulse ramps are once differentiable at every segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Envelope {
    Zero,
    Constant(f64),
    Pulse { t_on: f64, ramp_up: f64, hold: f64, ramp_down: f64, amplitude: f64 },
}

impl Envelope {
    pub fn pulse(t_on: f64, ramp_up: f64, hold: f64, ramp_down: f64, amplitude: f64) -> Result<Self> {
        let all_finite = t_on.is_finite()
            && ramp_up.is_finite()
            && hold.is_finite()
            && ramp_down.is_finite()
            && amplitude.is_finite();
        if !all_finite || t_on < 0.0 || ramp_up <= 0.0 || hold < 0.0 || ramp_down <= 0.0 {
            return Err(Error::InvalidProtocol(format!(
                "pulse segments must be finite with ramp_up > 0, ramp_down > 0, hold >= 0, t_on >= 0 \
                 (got t_on={t_on}, ramp_up={ramp_up}, hold={hold}, ramp_down={ramp_down})"
            )));
        }
        Ok(Self::Pulse { t_on, ramp_up, hold, ramp_down, amplitude })
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Constant(a) => a,
            Envelope::Pulse { t_on, ramp_up, hold, ramp_down, amplitude } => {
                let t1 = t_on + ramp_up;
                let t2 = t1 + hold;
                let t3 = t2 + ramp_down;
                if t <= t_on || t >= t3 {
                    0.0
                } else if t < t1 {
                    let s = (t - t_on) / ramp_up;
                    amplitude * (0.5 * std::f64::consts::PI * s).sin().powi(2)
                } else if t <= t2 {
                    amplitude
                } else {
                    let s = (t - t2) / ramp_down;
                    amplitude * (0.5 * std::f64::consts::PI * s).cos().powi(2)
                }
            }
        }
    }

    /// Closed-form ∫₀ᵗ of the envelope.
    pub fn integral(&self, t: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Constant(a) => a * t,
            Envelope::Pulse { t_on, ramp_up, hold, ramp_down, amplitude } => {
                if t <= t_on {
                    return 0.0;
                }
                let t1 = t_on + ramp_up;
                let t2 = t1 + hold;
                let t3 = t2 + ramp_down;
                let mut acc = 0.0;
                // rising ramp: ∫ a sin²(πs/2) = a·r·[s/2 − sin(πs)/(2π)]
                let s = ((t.min(t1) - t_on) / ramp_up).clamp(0.0, 1.0);
                acc += amplitude * ramp_up * (0.5 * s - (PI * s).sin() / (2.0 * PI));
                if t > t1 {
                    acc += amplitude * (t.min(t2) - t1);
                }
                if t > t2 {
                    // falling ramp: ∫ a cos²(πs/2) = a·r·[s/2 + sin(πs)/(2π)]
                    let s = ((t.min(t3) - t2) / ramp_down).clamp(0.0, 1.0);
                    acc += amplitude * ramp_down * (0.5 * s + (PI * s).sin() / (2.0 * PI));
                }
                acc
            }
        }
    }

    /// Interval outside of which the envelope vanishes; None for an
    /// identically zero envelope.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Envelope::Zero => None,
            Envelope::Constant(a) => {
                if a == 0.0 {
                    None
                } else {
                    Some((f64::NEG_INFINITY, f64::INFINITY))
                }
            }
            Envelope::Pulse { t_on, ramp_up, hold, ramp_down, amplitude } => {
                if amplitude == 0.0 {
                    None
                } else {
                    Some((t_on, t_on + ramp_up + hold + ramp_down))
                }
            }
        }
    }

    /// Open interval on which a pulse sits at full amplitude.
    pub fn plateau_interior(&self) -> Option<(f64, f64)> {
        match *self {
            Envelope::Zero => None,
            Envelope::Constant(_) => Some((f64::NEG_INFINITY, f64::INFINITY)),
            Envelope::Pulse { t_on, ramp_up, hold, .. } => Some((t_on + ramp_up, t_on + ramp_up + hold)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support().is_none()
    }

    /// Segment boundaries, where the integrand loses smoothness.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Envelope::Pulse { t_on, ramp_up, hold, ramp_down, .. } => {
                let t1 = t_on + ramp_up;
                let t2 = t1 + hold;
                vec![t_on, t1, t2, t2 + ramp_down]
            }
            _ => Vec::new(),
        }
    }
}

/// Switching sequence for one run: hopping envelope J(t), tilt gradient
/// envelope |∇V|(t) along one lattice axis, and the total duration.
///
/// The tilt may only act while the hopping sits on its plateau, so the
/// in/out regimes on both ends are stationary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Protocol {
    pub j_envelope: Envelope,
    pub gradient_envelope: Envelope,
    pub gradient_axis: usize,
    pub t_final: f64,
}

impl Protocol {
    pub fn new(
        j_envelope: Envelope,
        gradient_envelope: Envelope,
        gradient_axis: usize,
        t_final: f64,
    ) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidProtocol(format!("t_final = {t_final} must be finite and > 0")));
        }
        let grad_amp = match gradient_envelope {
            Envelope::Zero => 0.0,
            Envelope::Constant(a) => a,
            Envelope::Pulse { amplitude, .. } => amplitude,
        };
        if grad_amp < 0.0 {
            return Err(Error::InvalidProtocol(
                "gradient amplitude must be >= 0 so the gauge integral is monotone".into(),
            ));
        }
        if let Some((g0, g1)) = gradient_envelope.support() {
            let (p0, p1) = j_envelope.plateau_interior().ok_or_else(|| {
                Error::InvalidProtocol("tilt acts while the hopping envelope has no plateau".into())
            })?;
            // strictly inside a finite plateau; an everywhere-constant pair
            // (no in/out regime at all) is the one legitimate exception
            let lo_ok = p0 < g0 || (p0 == f64::NEG_INFINITY && g0 == f64::NEG_INFINITY);
            let hi_ok = g1 < p1 || (p1 == f64::INFINITY && g1 == f64::INFINITY);
            if !(lo_ok && hi_ok) {
                return Err(Error::InvalidProtocol(format!(
                    "tilt support [{g0}, {g1}] must lie strictly inside the hopping plateau ({p0}, {p1})"
                )));
            }
        }
        Ok(Self { j_envelope, gradient_envelope, gradient_axis, t_final })
    }

    /// Standard sequence: ramp J up, ramp the tilt up/hold/down well inside
    /// the J plateau, ramp J down. `margin` separates tilt from the J ramps.
    pub fn tilted(
        j_amp: f64,
        ramp_j: f64,
        margin: f64,
        grad_amp: f64,
        ramp_v: f64,
        plateau_v: f64,
        axis: usize,
    ) -> Result<Self> {
        if margin <= 0.0 {
            return Err(Error::InvalidProtocol(format!("margin = {margin} must be > 0")));
        }
        let hold_j = 2.0 * margin + 2.0 * ramp_v + plateau_v;
        let j_env = Envelope::pulse(0.0, ramp_j, hold_j, ramp_j, j_amp)?;
        let grad_env = if grad_amp == 0.0 {
            Envelope::Zero
        } else {
            Envelope::pulse(ramp_j + margin, ramp_v, plateau_v, ramp_v, grad_amp)?
        };
        // the envelope's own closing time, not a re-derivation of it:
        // a different summation order can land one rounding step short
        // and leave the sequence formally open at t_final
        let t_final = j_env.support().map_or(2.0 * ramp_j + hold_j, |(_, hi)| hi);
        Self::new(j_env, grad_env, axis, t_final)
    }

    /// The same sequence with the tilt switched off, for adiabatic control runs.
    pub fn zero_gradient(&self) -> Self {
        Self { gradient_envelope: Envelope::Zero, ..self.clone() }
    }

    pub fn j_at(&self, t: f64) -> f64 {
        self.j_envelope.value(t)
    }

    pub fn gradient_at(&self, t: f64) -> f64 {
        self.gradient_envelope.value(t)
    }

    /// Accumulated gauge phase A(t) = ∫₀ᵗ |∇V|(t′) dt′.
    pub fn gauge_integral(&self, t: f64) -> f64 {
        self.gradient_envelope.integral(t)
    }

    /// True once both envelopes have closed for good at time t.
    pub fn is_closed_at(&self, t: f64) -> bool {
        let past = |env: &Envelope| match env.support() {
            None => true,
            Some((_, hi)) => t >= hi,
        };
        past(&self.j_envelope) && past(&self.gradient_envelope)
    }

    /// Sorted, deduplicated segment boundaries of both envelopes within [t0, t1].
    pub fn breakpoints_within(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .j_envelope
            .breakpoints()
            .into_iter()
            .chain(self.gradient_envelope.breakpoints())
            .filter(|&t| t > t0 && t < t1)
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + t1.abs()));
        pts
    }
}

/// Uniform n^d grid covering the first Brillouin zone, n even, components
/// kᵢ = −π + 2π·mᵢ/n (so both −π and 0 are grid points).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BzGrid {
    pub n: usize,
    pub d: usize,
}

impl BzGrid {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::PhysicsGuard(format!("grid size n = {n} must be even and >= 2")));
        }
        if !(1..=3).contains(&d) {
            return Err(Error::PhysicsGuard(format!("grid dimension d = {d} must be 1, 2 or 3")));
        }
        Ok(Self { n, d })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point at lexicographic index (first axis slowest).
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        assert!(idx < self.len());
        let mut digits = vec![0usize; self.d];
        for i in (0..self.d).rev() {
            digits[i] = idx % self.n;
            idx /= self.n;
        }
        digits
            .into_iter()
            .map(|m| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * m as f64 / self.n as f64)
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}
