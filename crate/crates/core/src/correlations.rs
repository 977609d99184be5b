//! Two-point correlations of the hole and doublon fluctuation operators.
//!
//! The same quadratic dynamics is offered in two pictures.  In momentum
//! space each mode `k` carries a closed pair of equations for the
//! anomalous correlator `f12 = <h† p>` and the occupation `f11 = <h† h>`,
//! driven by the time-dependent hopping structure factor.  In real space
//! the full matrices are propagated on a finite lattice, which is the
//! only picture available once translation invariance is broken by open
//! boundaries or by an on-site potential.
//!
//! Both pictures start from the fluctuation vacuum: `f12 = 0`, `f11 = 0`
//! (connected), and the real-space occupation matrix equal to the
//! identity.  The doublon occupation equals the hole occupation at this
//! order and is therefore stored once; accessors reconstruct it.

use crate::error::{Error, Result};
use crate::model::{BzGrid, ModelParams, Protocol};
use crate::modes::{self, ModeState};
use crate::ode::{integrate_dp5, Dp5Options, C64, ONE, ZERO};
use rayon::prelude::*;
use serde::Serialize;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Momentum-space correlations of a single mode at one instant.
#[derive(Debug, Clone, Serialize)]
pub struct KCorrelationState {
    pub k: Vec<f64>,
    pub t: f64,
    /// Anomalous correlator `<h†_k p_k>`.
    pub f12: C64,
    /// Connected occupation `<h†_k h_k>`; real and equal to `<p†_k p_k>`.
    pub f11: f64,
}

impl KCorrelationState {
    pub fn f21(&self) -> C64 {
        self.f12.conj()
    }

    pub fn f22(&self) -> f64 {
        self.f11
    }
}

/// Propagate the correlation pair of one momentum mode from the vacuum
/// through the protocol, reporting snapshots at the requested times.
///
/// `samples` may list interior times in any order; each is landed on
/// exactly and handed to `on_sample`.  Entries outside `(0, t_final]`
/// are ignored.
pub fn evolve_correlations_k(
    params: &ModelParams,
    protocol: &Protocol,
    k: &[f64],
    tol: f64,
    samples: &[f64],
    on_sample: &mut impl FnMut(&KCorrelationState),
) -> Result<KCorrelationState> {
    modes::check_axis(params, protocol)?;
    let u = params.u;
    let j_total = |t: f64| protocol.j_at(t);
    let t_struct = |t: f64| {
        params.hopping_structure(k, protocol.gradient_axis, protocol.gauge_integral(t))
    };

    // State layout: [f12, f11].  The occupation component is real by
    // structure; it is carried in the real part and its imaginary part
    // stays at exactly zero because the right-hand side below writes a
    // purely real derivative for it.
    let mut y = [ZERO, ZERO];
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let jt = j_total(t) * t_struct(t);
        let f12 = y[0];
        let f11 = y[1].re;
        let drive = SQRT_2 * jt;
        dy[0] = -C64::i() * ((u - 3.0 * jt) * f12 - drive * (2.0 * f11 + 1.0));
        dy[1] = C64::new(2.0 * drive * f12.im, 0.0);
    };

    let t_final = protocol.t_final;
    let mut marks = protocol.breakpoints_within(0.0, t_final);
    for &s in samples {
        if s > 0.0 && s <= t_final {
            marks.push(s);
        }
    }
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup();

    let mut wanted: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s <= t_final)
        .collect();
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    wanted.dedup();
    let mut next = wanted.into_iter().peekable();

    let opts = Dp5Options::with_tol(tol);
    integrate_dp5(
        &mut rhs,
        &mut y,
        0.0,
        t_final,
        &marks,
        &mut |t, y| {
            while let Some(&s) = next.peek() {
                if s < t {
                    next.next();
                } else if s == t {
                    next.next();
                    on_sample(&KCorrelationState {
                        k: k.to_vec(),
                        t,
                        f12: y[0],
                        f11: y[1].re,
                    });
                } else {
                    break;
                }
            }
        },
        &opts,
    )?;

    Ok(KCorrelationState {
        k: k.to_vec(),
        t: t_final,
        f12: y[0],
        f11: y[1].re,
    })
}

/// Finite lattice geometries for the real-space picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lattice {
    /// Periodic chain of `n` sites.
    Ring { n: usize },
    /// Open chain of `n` sites.
    OpenChain { n: usize },
    /// Periodic rectangle, sites indexed as `x * ny + y`.
    Torus { nx: usize, ny: usize },
}

/// How the tilt enters the quadratic problem.
///
/// The two choices are related by a position-dependent phase and give
/// identical observables where both apply; only the bookkeeping moves
/// between the bonds and the sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gauge {
    /// Tilt absorbed into complex phases on the bonds along the tilt
    /// axis.  Works on any geometry.
    PeierlsLink,
    /// Tilt as a linear on-site potential, decreasing along the tilt
    /// axis so it drives the same momentum shift as the bond phases.
    /// Requires open boundaries along the tilt axis: a linear function
    /// does not wind around a periodic direction.
    ScalarOnsite,
}

const MAX_CHAIN: usize = 64;
const MAX_TORUS_SIDE: usize = 12;

impl Lattice {
    pub fn n_sites(&self) -> usize {
        match *self {
            Lattice::Ring { n } | Lattice::OpenChain { n } => n,
            Lattice::Torus { nx, ny } => nx * ny,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Lattice::Torus { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Lattice::Ring { n } => {
                if !(3..=MAX_CHAIN).contains(&n) {
                    return Err(Error::DimensionExceeded(format!(
                        "ring must have 3..={MAX_CHAIN} sites, got {n}"
                    )));
                }
            }
            Lattice::OpenChain { n } => {
                if !(2..=MAX_CHAIN).contains(&n) {
                    return Err(Error::DimensionExceeded(format!(
                        "open chain must have 2..={MAX_CHAIN} sites, got {n}"
                    )));
                }
            }
            Lattice::Torus { nx, ny } => {
                if !(2..=MAX_TORUS_SIDE).contains(&nx) || !(2..=MAX_TORUS_SIDE).contains(&ny) {
                    return Err(Error::DimensionExceeded(format!(
                        "torus sides must be 2..={MAX_TORUS_SIDE}, got {nx}x{ny}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn periodic_along(&self, axis: usize) -> bool {
        match self {
            Lattice::Ring { .. } => true,
            Lattice::OpenChain { .. } => false,
            Lattice::Torus { .. } => axis < 2,
        }
    }

    /// Coordinate of site `mu` along `axis`.
    pub fn coordinate(&self, mu: usize, axis: usize) -> usize {
        match *self {
            Lattice::Ring { .. } | Lattice::OpenChain { .. } => mu,
            Lattice::Torus { ny, .. } => {
                if axis == 0 {
                    mu / ny
                } else {
                    mu % ny
                }
            }
        }
    }

    fn extent(&self, axis: usize) -> usize {
        match *self {
            Lattice::Ring { n } | Lattice::OpenChain { n } => n,
            Lattice::Torus { nx, ny } => {
                if axis == 0 {
                    nx
                } else {
                    ny
                }
            }
        }
    }
}

/// Bond direction relative to the tilt axis, fixing the Peierls phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hop {
    Transverse,
    AxisUp,
    AxisDown,
}

/// Per-site neighbor lists: `(neighbor index, bond kind)`.  A two-site
/// periodic direction lists the same partner twice, once per winding,
/// so bond sums remain faithful to the adjacency.
fn neighbor_table(lattice: &Lattice, axis: usize) -> Vec<Vec<(usize, Hop)>> {
    let n = lattice.n_sites();
    let mut table = vec![Vec::new(); n];
    let dims = lattice.dims();
    for mu in 0..n {
        for a in 0..dims {
            let len = lattice.extent(a);
            let coord = lattice.coordinate(mu, a);
            let wrap = lattice.periodic_along(a);
            for (step, kind_up) in [(1isize, true), (-1isize, false)] {
                let next = coord as isize + step;
                let next = if wrap {
                    next.rem_euclid(len as isize) as usize
                } else if next < 0 || next >= len as isize {
                    continue;
                } else {
                    next as usize
                };
                let nu = match *lattice {
                    Lattice::Ring { .. } | Lattice::OpenChain { .. } => next,
                    Lattice::Torus { ny, .. } => {
                        if a == 0 {
                            next * ny + lattice.coordinate(mu, 1)
                        } else {
                            lattice.coordinate(mu, 0) * ny + next
                        }
                    }
                };
                let kind = if a != axis {
                    Hop::Transverse
                } else if kind_up {
                    Hop::AxisUp
                } else {
                    Hop::AxisDown
                };
                table[mu].push((nu, kind));
            }
        }
    }
    table
}

/// Physical correlators of one site pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairCorrelation {
    /// `<h†_mu h_nu>` (connected).
    pub f11: C64,
    /// `<h†_mu p_nu>`.
    pub f12: C64,
    /// `<p†_mu h_nu>`.
    pub f21: C64,
    /// `<p†_mu p_nu>`; equals `f11` at this order.
    pub f22: C64,
}

/// Real-space correlation matrices at one instant.
///
/// `f11` stores the full occupation matrix including the vacuum unit on
/// the diagonal; `pair` subtracts it to hand back connected correlators.
#[derive(Debug, Clone, Serialize)]
pub struct RealCorrelations {
    pub lattice: Lattice,
    pub gauge: Gauge,
    pub t: f64,
    /// Row-major `n x n` matrix of `<h†_mu p_nu>`.
    pub f12: Vec<C64>,
    /// Row-major `n x n` matrix of `delta_{mu,nu} + <h†_mu h_nu>`.
    pub f11: Vec<C64>,
}

impl RealCorrelations {
    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    pub fn f12_at(&self, mu: usize, nu: usize) -> C64 {
        self.f12[mu * self.n_sites() + nu]
    }

    pub fn f11_at(&self, mu: usize, nu: usize) -> C64 {
        self.f11[mu * self.n_sites() + nu]
    }

    pub fn pair(&self, mu: usize, nu: usize) -> PairCorrelation {
        let n = self.n_sites();
        let unit = if mu == nu { ONE } else { ZERO };
        let connected = self.f11[mu * n + nu] - unit;
        PairCorrelation {
            f11: connected,
            f12: self.f12[mu * n + nu],
            f21: self.f12[nu * n + mu].conj(),
            f22: connected,
        }
    }

    /// Largest deviation of the occupation matrix from hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.n_sites();
        let mut worst = 0.0f64;
        for mu in 0..n {
            for nu in mu..n {
                let d = (self.f11[mu * n + nu] - self.f11[nu * n + mu].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Propagate the real-space correlation matrices from the vacuum through
/// the protocol.  Snapshots at the requested interior times are handed
/// to `on_sample`; times outside `(0, t_final]` are ignored.
pub fn evolve_correlations_real(
    params: &ModelParams,
    protocol: &Protocol,
    lattice: Lattice,
    gauge: Gauge,
    tol: f64,
    samples: &[f64],
    on_sample: &mut impl FnMut(&RealCorrelations),
) -> Result<RealCorrelations> {
    lattice.validate()?;
    if lattice.dims() != params.d {
        return Err(Error::PhysicsGuard(format!(
            "lattice is {}-dimensional but the model has d = {}",
            lattice.dims(),
            params.d
        )));
    }
    let axis = protocol.gradient_axis;
    if axis >= params.d {
        return Err(Error::GaugeMismatch(format!(
            "tilt axis {axis} does not exist in d = {}",
            params.d
        )));
    }
    let tilted = !protocol.gradient_envelope.is_zero();
    if gauge == Gauge::ScalarOnsite && tilted && lattice.periodic_along(axis) {
        return Err(Error::GaugeMismatch(
            "an on-site linear potential cannot wind around a periodic direction; \
             use the bond-phase gauge instead"
                .into(),
        ));
    }

    let n = lattice.n_sites();
    let z = params.z() as f64;
    let neighbors = neighbor_table(&lattice, axis);
    let center = 0.5 * (lattice.extent(axis) as f64 - 1.0);
    let coords: Vec<f64> = (0..n)
        .map(|mu| lattice.coordinate(mu, axis) as f64 - center)
        .collect();
    let u = params.u;

    // State layout: F12 rows, then F11 rows.
    let mut y = vec![ZERO; 2 * n * n];
    for mu in 0..n {
        y[n * n + mu * n + mu] = ONE;
    }

    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let j = protocol.j_at(t);
        let (phase_up, phase_dn) = match gauge {
            Gauge::PeierlsLink => {
                let a = protocol.gauge_integral(t);
                (C64::from_polar(1.0, -a), C64::from_polar(1.0, a))
            }
            Gauge::ScalarOnsite => (ONE, ONE),
        };
        // The bond phases shift the hopping structure to k + A, which is
        // the motion of a positive test charge pushed toward +x; the
        // equivalent on-site potential therefore decreases along the
        // axis.
        let grad = match gauge {
            Gauge::ScalarOnsite => -protocol.gradient_at(t),
            Gauge::PeierlsLink => 0.0,
        };
        // Hopping-matrix entry for a bond leaving `mu` (row side) is
        // `from`; the entry entering `nu` (column side) is its
        // conjugate.
        let from = |kind: Hop| match kind {
            Hop::Transverse => ONE / z,
            Hop::AxisUp => phase_up / z,
            Hop::AxisDown => phase_dn / z,
        };
        let (f12, f11) = y.split_at(n * n);
        let (d12, d11) = dy.split_at_mut(n * n);

        let fill_row = |mu: usize, out12: &mut [C64], out11: &mut [C64]| {
            let v_mu = grad * coords[mu];
            for nu in 0..n {
                let v = grad * coords[nu] - v_mu;
                let mut acc12 = (u + v) * f12[mu * n + nu];
                let mut acc11 = v * f11[mu * n + nu];
                for &(kappa, kind) in &neighbors[mu] {
                    let k_mu = from(kind);
                    // Left products: anticommutator for f12hat, commutator
                    // and the conjugate-transposed source for f11hat.
                    acc12 -= 1.5 * j * k_mu * f12[kappa * n + nu];
                    acc12 -= SQRT_2 * j * k_mu * f11[kappa * n + nu];
                    if kappa == nu {
                        acc12 += SQRT_2 * j * k_mu;
                    }
                    acc11 -= 1.5 * j * k_mu * f11[kappa * n + nu];
                    acc11 -= SQRT_2 * j * k_mu * f12[nu * n + kappa].conj();
                }
                for &(kappa, kind) in &neighbors[nu] {
                    let k_nu = from(kind).conj();
                    acc12 -= 1.5 * j * f12[mu * n + kappa] * k_nu;
                    acc12 -= SQRT_2 * j * f11[mu * n + kappa] * k_nu;
                    acc11 += 1.5 * j * f11[mu * n + kappa] * k_nu;
                    acc11 += SQRT_2 * j * f12[mu * n + kappa] * k_nu;
                }
                out12[nu] = -C64::i() * acc12;
                out11[nu] = -C64::i() * acc11;
            }
        };

        if n >= 48 {
            d12.par_chunks_mut(n)
                .zip(d11.par_chunks_mut(n))
                .enumerate()
                .for_each(|(mu, (o12, o11))| fill_row(mu, o12, o11));
        } else {
            for (mu, (o12, o11)) in d12.chunks_mut(n).zip(d11.chunks_mut(n)).enumerate() {
                fill_row(mu, o12, o11);
            }
        }
    };

    let t_final = protocol.t_final;
    let mut marks = protocol.breakpoints_within(0.0, t_final);
    let mut wanted: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s <= t_final)
        .collect();
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    wanted.dedup();
    marks.extend(wanted.iter().copied());
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup();
    let mut next = wanted.into_iter().peekable();

    let snapshot = |t: f64, y: &[C64]| RealCorrelations {
        lattice,
        gauge,
        t,
        f12: y[..n * n].to_vec(),
        f11: y[n * n..].to_vec(),
    };

    let opts = Dp5Options::with_tol(tol);
    integrate_dp5(
        &mut rhs,
        &mut y,
        0.0,
        t_final,
        &marks,
        &mut |t, y| {
            while let Some(&s) = next.peek() {
                if s < t {
                    next.next();
                } else if s == t {
                    next.next();
                    on_sample(&snapshot(t, y));
                } else {
                    break;
                }
            }
        },
        &opts,
    )?;

    Ok(snapshot(t_final, &y))
}

fn momentum_pair(state: &RealCorrelations, phase: impl Fn(usize, usize) -> f64) -> (C64, C64) {
    let n = state.n_sites();
    let mut f12 = ZERO;
    let mut f11 = ZERO;
    for mu in 0..n {
        for nu in 0..n {
            let w = C64::from_polar(1.0, -phase(mu, nu));
            f12 += w * state.f12[mu * n + nu];
            f11 += w * state.f11[mu * n + nu];
        }
    }
    let scale = 1.0 / n as f64;
    (f12 * scale, f11 * scale - ONE)
}

/// Fourier component of ring correlations at momentum `2*pi*mode/n`.
///
/// Returns `(f12_k, f11_k)` with the vacuum unit subtracted, matching
/// the momentum-space picture.  Only meaningful in the bond-phase gauge,
/// where translation invariance is manifest.
pub fn ring_momentum(state: &RealCorrelations, mode: usize) -> Result<(C64, C64)> {
    let n = match state.lattice {
        Lattice::Ring { n } => n,
        _ => {
            return Err(Error::InvalidProtocol(
                "ring transform requires a ring lattice".into(),
            ))
        }
    };
    if mode >= n {
        return Err(Error::InvalidProtocol(format!(
            "ring momentum index {mode} out of range for {n} sites"
        )));
    }
    let k = 2.0 * std::f64::consts::PI * mode as f64 / n as f64;
    Ok(momentum_pair(state, |mu, nu| k * (nu as f64 - mu as f64)))
}

/// Fourier component of torus correlations at momentum
/// `(2*pi*mode_x/nx, 2*pi*mode_y/ny)`; conventions as in `ring_momentum`.
pub fn torus_momentum(state: &RealCorrelations, mode_x: usize, mode_y: usize) -> Result<(C64, C64)> {
    let (nx, ny) = match state.lattice {
        Lattice::Torus { nx, ny } => (nx, ny),
        _ => {
            return Err(Error::InvalidProtocol(
                "torus transform requires a torus lattice".into(),
            ))
        }
    };
    if mode_x >= nx || mode_y >= ny {
        return Err(Error::InvalidProtocol(format!(
            "torus momentum index ({mode_x},{mode_y}) out of range for {nx}x{ny} sites"
        )));
    }
    let kx = 2.0 * std::f64::consts::PI * mode_x as f64 / nx as f64;
    let ky = 2.0 * std::f64::consts::PI * mode_y as f64 / ny as f64;
    let lattice = state.lattice;
    Ok(momentum_pair(state, move |mu, nu| {
        let dx = lattice.coordinate(nu, 0) as f64 - lattice.coordinate(mu, 0) as f64;
        let dy = lattice.coordinate(nu, 1) as f64 - lattice.coordinate(mu, 1) as f64;
        kx * dx + ky * dy
    }))
}

/// Worst-case mismatch between directly propagated mode correlations and
/// the products of mode amplitudes that should reproduce them.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    pub max_f12_residual: f64,
    pub max_f11_residual: f64,
    pub n_modes: usize,
    pub n_samples: usize,
}

/// Check that correlations factorize into mode amplitudes.
///
/// For every grid momentum the correlation pair is integrated directly
/// and compared, at each sample time and at the end of the protocol,
/// against `conj(f+) g+` and `|g+|^2` built from the mode solution.  The
/// agreement is limited only by integration accuracy, so the residuals
/// shrink with `tol`; a persistent gap signals an inconsistency between
/// the two propagators.
pub fn factorization_check(
    params: &ModelParams,
    protocol: &Protocol,
    grid: &BzGrid,
    sample_times: &[f64],
    tol: f64,
) -> Result<FactorizationReport> {
    if grid.d != params.d {
        return Err(Error::PhysicsGuard(format!(
            "grid dimension {} does not match model dimension {}",
            grid.d, params.d
        )));
    }
    let mut times: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < protocol.t_final)
        .collect();
    times.push(protocol.t_final);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let per_mode: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| -> Result<(f64, f64)> {
            let k = grid.point(idx);
            let mut mode_states: Vec<ModeState> = Vec::with_capacity(times.len());
            let last = modes::evolve_mode_sampled(params, protocol, &k, tol, &times, &mut |s| {
                mode_states.push(s.clone());
            })?;
            if mode_states.last().map(|s| s.t) != Some(last.t) {
                mode_states.push(last);
            }
            let mut corr_states: Vec<KCorrelationState> = Vec::with_capacity(times.len());
            let final_corr =
                evolve_correlations_k(params, protocol, &k, tol, &times, &mut |s| {
                    corr_states.push(s.clone());
                })?;
            if corr_states.last().map(|s| s.t) != Some(final_corr.t) {
                corr_states.push(final_corr);
            }
            if corr_states.len() != mode_states.len() {
                return Err(Error::InvariantViolation(format!(
                    "sample bookkeeping mismatch: {} mode snapshots vs {} correlation snapshots",
                    mode_states.len(),
                    corr_states.len()
                )));
            }
            let mut worst12 = 0.0f64;
            let mut worst11 = 0.0f64;
            for (m, c) in mode_states.iter().zip(&corr_states) {
                let f12_product = m.f_plus.conj() * m.g_plus;
                let f11_product = m.g_plus.norm_sqr();
                worst12 = worst12.max((c.f12 - f12_product).norm());
                worst11 = worst11.max((c.f11 - f11_product).abs());
            }
            Ok((worst12, worst11))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut max12 = 0.0f64;
    let mut max11 = 0.0f64;
    for (a, b) in &per_mode {
        max12 = max12.max(*a);
        max11 = max11.max(*b);
    }
    Ok(FactorizationReport {
        max_f12_residual: max12,
        max_f11_residual: max11,
        n_modes: grid.len(),
        n_samples: times.len(),
    })
}
