//! Quasimomentum modes of the tilted Mott insulator. Each mode is a
//! two-level problem for the hole/doublon pair amplitudes,
//!
//!   i∂t ĥ_k = +½(3J·T_k − U)·ĥ_k + √2·J·T_k·p̂_k
//!   i∂t p̂_k = −½(3J·T_k − U)·p̂_k − √2·J·T_k·ĥ_k,
//!
//! with the tilt absorbed into T_k through k → k + A(t)·ê_axis. Out of the
//! evolved fundamental matrix come the in/out mixing coefficients, the pair
//! spectrum over a Brillouin-zone grid, and the tunneling-exponent scans.

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::model::{BzGrid, ModelParams, Protocol};
use crate::ode::{evolve_generator, integrate_dp5, CMat, Cf4Options, Dp5Options, C64, ONE, ZERO};
use crate::BogoliubovResult;
use rayon::prelude::*;
use serde::Serialize;

/// Residual above which a mode evolution is rejected.
pub const UNITARITY_REJECT: f64 = 1e-6;

/// Fundamental solution of one mode at time t: ĥ_k = f⁺Â + f⁻B̂ and
/// p̂_k = g⁺Â + g⁻B̂ in terms of the in operators Â = ĥ_in, B̂ = p̂_in.
#[derive(Debug, Clone, Serialize)]
pub struct ModeState {
    pub k: Vec<f64>,
    pub t: f64,
    pub f_plus: C64,
    pub g_plus: C64,
    pub f_minus: C64,
    pub g_minus: C64,
    /// ||f⁺|² − |g⁺|² − 1| as evolved.
    pub residual_plus: f64,
    /// ||g⁻|² − |f⁻|² − 1| as evolved.
    pub residual_minus: f64,
}

fn state_from_matrix(k: &[f64], t: f64, y: &CMat<2>) -> ModeState {
    ModeState {
        k: k.to_vec(),
        t,
        f_plus: y.m[0][0],
        g_plus: y.m[1][0],
        f_minus: y.m[0][1],
        g_minus: y.m[1][1],
        residual_plus: (y.m[0][0].norm_sqr() - y.m[1][0].norm_sqr() - 1.0).abs(),
        residual_minus: (y.m[1][1].norm_sqr() - y.m[0][1].norm_sqr() - 1.0).abs(),
    }
}

pub(crate) fn check_axis(params: &ModelParams, protocol: &Protocol) -> Result<()> {
    if protocol.gradient_axis >= params.d {
        return Err(Error::GaugeMismatch(format!(
            "tilt axis {} does not exist on a d = {} lattice",
            protocol.gradient_axis, params.d
        )));
    }
    Ok(())
}

/// Evolve one mode from t = 0 to the protocol end, reporting the state at
/// each requested sample time along the way. Sample times must be sorted
/// ascending and lie in (0, t_final].
pub fn evolve_mode_sampled(
    params: &ModelParams,
    protocol: &Protocol,
    k: &[f64],
    tol: f64,
    samples: &[f64],
    on_sample: &mut impl FnMut(&ModeState),
) -> Result<ModeState> {
    check_axis(params, protocol)?;
    let u = params.u;
    let g = |t: f64| {
        let j = protocol.j_at(t);
        let t_k = params.hopping_structure(k, protocol.gradient_axis, protocol.gauge_integral(t));
        let a = 0.5 * (3.0 * j * t_k - u);
        let b = std::f64::consts::SQRT_2 * j * t_k;
        CMat::<2> {
            m: [
                [C64::new(0.0, -a), C64::new(0.0, -b)],
                [C64::new(0.0, b), C64::new(0.0, a)],
            ],
        }
    };
    let t_final = protocol.t_final;
    let mut marks = protocol.breakpoints_within(0.0, t_final);
    marks.extend_from_slice(samples);
    let mut sample_iter = samples.iter().copied().peekable();
    let y = evolve_generator(
        &g,
        CMat::<2>::identity(),
        0.0,
        t_final,
        &marks,
        &mut |t, y| {
            while let Some(&s) = sample_iter.peek() {
                if s == t {
                    on_sample(&state_from_matrix(k, t, y));
                    sample_iter.next();
                } else if s < t {
                    sample_iter.next();
                } else {
                    break;
                }
            }
        },
        &Cf4Options { tol, ..Default::default() },
    )?;
    let state = state_from_matrix(k, t_final, &y);
    if state.residual_plus > UNITARITY_REJECT || state.residual_minus > UNITARITY_REJECT {
        return Err(Error::InvariantViolation(format!(
            "mode at k = {k:?}: hyperbolic norm drifted by {:e}",
            state.residual_plus.max(state.residual_minus)
        )));
    }
    Ok(state)
}

pub fn evolve_mode(params: &ModelParams, protocol: &Protocol, k: &[f64], tol: f64) -> Result<ModeState> {
    evolve_mode_sampled(params, protocol, k, tol, &[], &mut |_| {})
}

/// Same mode evolution with the accumulated tilt phase kept as an auxiliary
/// integration variable and the structure factor assembled from a complex
/// link factor e^{−iA}. Numerically a different code path; |β|² must agree
/// with `evolve_mode` to high accuracy.
pub fn evolve_mode_tracked_gauge(
    params: &ModelParams,
    protocol: &Protocol,
    k: &[f64],
    tol: f64,
) -> Result<ModeState> {
    check_axis(params, protocol)?;
    let d = params.d;
    let axis = protocol.gradient_axis;
    let u = params.u;
    let rest: f64 = k.iter().enumerate().filter(|&(i, _)| i != axis).map(|(_, ki)| ki.cos()).sum();
    let axis_phase = C64::new(0.0, -k[axis]).exp();
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let a_gauge = y[4].re;
        let link = axis_phase * C64::new(0.0, -a_gauge).exp();
        let t_k = (rest + link.re) / d as f64;
        let j = protocol.j_at(t);
        let a = C64::new(0.0, -0.5 * (3.0 * j * t_k - u));
        let b = C64::new(0.0, -std::f64::consts::SQRT_2 * j * t_k);
        dy[0] = a * y[0] + b * y[1];
        dy[1] = -b * y[0] - a * y[1];
        dy[2] = a * y[2] + b * y[3];
        dy[3] = -b * y[2] - a * y[3];
        dy[4] = C64::new(protocol.gradient_at(t), 0.0);
    };
    let mut y = vec![ONE, ZERO, ZERO, ONE, ZERO];
    let marks = protocol.breakpoints_within(0.0, protocol.t_final);
    integrate_dp5(
        &mut rhs,
        &mut y,
        0.0,
        protocol.t_final,
        &marks,
        &mut |_, _| {},
        &Dp5Options::with_tol(tol),
    )?;
    let state = ModeState {
        k: k.to_vec(),
        t: protocol.t_final,
        f_plus: y[0],
        g_plus: y[1],
        f_minus: y[2],
        g_minus: y[3],
        residual_plus: (y[0].norm_sqr() - y[1].norm_sqr() - 1.0).abs(),
        residual_minus: (y[3].norm_sqr() - y[2].norm_sqr() - 1.0).abs(),
    };
    if state.residual_plus > UNITARITY_REJECT || state.residual_minus > UNITARITY_REJECT {
        return Err(Error::InvariantViolation(format!(
            "mode at k = {k:?}: hyperbolic norm drifted by {:e}",
            state.residual_plus.max(state.residual_minus)
        )));
    }
    Ok(state)
}

/// Read the out-basis mixing off a final state. Valid only once both
/// envelopes have closed: in the free out regime ĥ rotates as e^{+iUt/2}
/// and p̂ as e^{−iUt/2}, so stripping that phase freezes the coefficients.
pub fn extract_bogoliubov(
    params: &ModelParams,
    protocol: &Protocol,
    state: &ModeState,
) -> Result<BogoliubovResult> {
    if !protocol.is_closed_at(state.t)
        || protocol.j_at(state.t) != 0.0
        || protocol.gradient_at(state.t) != 0.0
    {
        return Err(Error::InvalidProtocol(format!(
            "mixing is only defined after both envelopes close; t = {} is too early",
            state.t
        )));
    }
    let phase = C64::new(0.0, 0.5 * params.u * state.t).exp();
    let beta = state.g_plus * phase;
    let alpha = state.g_minus * phase;
    let residual = (alpha.norm_sqr() - beta.norm_sqr() - 1.0).abs();
    Ok(BogoliubovResult { alpha, beta, unitarity_residual: residual })
}

/// Pair spectrum over a Brillouin-zone grid, with a zero-tilt control run
/// per mode to expose what the switching ramps alone create.
#[derive(Debug, Clone, Serialize)]
pub struct PairSpectrum {
    pub grid: BzGrid,
    pub beta_sq: Vec<f64>,
    pub baseline_beta_sq: Vec<f64>,
    /// Per mode, the worse of the signal and control run residuals.
    pub unitarity_residual: Vec<f64>,
    /// Mean of |β_k|² over the grid: pairs per lattice site.
    pub pair_density: f64,
    pub max_unitarity_residual: f64,
}

pub fn pair_density(
    params: &ModelParams,
    protocol: &Protocol,
    grid: &BzGrid,
    tol: f64,
) -> Result<PairSpectrum> {
    if grid.d != params.d {
        return Err(Error::PhysicsGuard(format!(
            "grid dimension {} does not match lattice dimension {}",
            grid.d, params.d
        )));
    }
    let control = protocol.zero_gradient();
    let rows: Vec<(f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let k = grid.point(i);
            let state = evolve_mode(params, protocol, &k, tol)?;
            let mix = extract_bogoliubov(params, protocol, &state)?;
            let base_state = evolve_mode(params, &control, &k, tol)?;
            let base = extract_bogoliubov(params, &control, &base_state)?;
            let res = mix.unitarity_residual.max(base.unitarity_residual);
            Ok((mix.beta_sq(), base.beta_sq(), res))
        })
        .collect::<Result<Vec<_>>>()?;
    let beta_sq: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let baseline_beta_sq: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let unitarity_residual: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let max_res = unitarity_residual.iter().fold(0.0f64, |a, &r| a.max(r));
    let density = beta_sq.iter().sum::<f64>() / beta_sq.len() as f64;
    Ok(PairSpectrum {
        grid: *grid,
        beta_sq,
        baseline_beta_sq,
        unitarity_residual,
        pair_density: density,
        max_unitarity_residual: max_res,
    })
}

/// Mott depth window on which the tunneling-exponent scans are trusted:
/// U/U_c − 1 must lie in [0.02, 0.2].
pub const DEPTH_WINDOW: (f64, f64) = (0.02, 0.2);
/// Exponent window for scan points: deep enough for the tunneling form,
/// shallow enough to stay above integration noise.
pub const EXPONENT_WINDOW: (f64, f64) = (5.0, 25.0);

/// Predicted tunneling exponent π(Δℰ²/4 + c²k⊥²)/(c·G) of a mode at
/// transverse momentum squared k⊥² under gradient G.
pub fn tunneling_exponent(params: &ModelParams, gradient: f64, k_perp_sq: f64) -> Result<f64> {
    let gap = params.energy_gap()?;
    let c = params.effective_speed();
    Ok(std::f64::consts::PI * (0.25 * gap * gap + c * c * k_perp_sq) / (c * gradient))
}

/// Gradient at which the k⊥ = 0 exponent takes the requested value.
pub fn gradient_for_exponent(params: &ModelParams, exponent: f64) -> Result<f64> {
    let gap = params.energy_gap()?;
    let c = params.effective_speed();
    Ok(std::f64::consts::PI * gap * gap / (4.0 * c * exponent))
}

/// k⊥² at which the exponent under gradient G takes the requested value.
pub fn perp_sq_for_exponent(params: &ModelParams, gradient: f64, exponent: f64) -> Result<f64> {
    let gap = params.energy_gap()?;
    let c = params.effective_speed();
    Ok((exponent * c * gradient / std::f64::consts::PI - 0.25 * gap * gap) / (c * c))
}

/// Standard switching sequence for one gradient: slow cos² hopping ramps
/// (duration 300/Δℰ), margins of 5/Δℰ, tilt ramps of 4.2/G and a tilt
/// plateau of exactly one Bloch period 2π/G, so the accumulated phase
/// crosses the zone once at full speed and never reaches a second crossing.
/// The ramp length keeps the zero-gradient control leakage below 10⁻⁶
/// at any hold time; the cos² endpoint kink leaks as (Δℰ·ramp)⁻⁴, so
/// shorter ramps contaminate the deep tail of an exponent scan.
pub fn standard_protocol(params: &ModelParams, gradient: f64) -> Result<Protocol> {
    let gap = params.energy_gap()?;
    if gap <= 0.0 {
        return Err(Error::PhysicsGuard("switching times undefined for a closed gap".into()));
    }
    let ramp_j = 300.0 / gap;
    let margin = 5.0 / gap;
    if gradient == 0.0 {
        let proto = Protocol::tilted(params.j, ramp_j, margin, 0.0, 1.0, 1.0, 0)?;
        return Ok(proto);
    }
    let ramp_v = 4.2 / gradient;
    let plateau_v = 2.0 * std::f64::consts::PI / gradient;
    Protocol::tilted(params.j, ramp_j, margin, gradient, ramp_v, plateau_v, 0)
}

/// One point of a tunneling-exponent scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingPoint {
    /// Fit abscissa: 1/G for gradient scans, k⊥² for transverse scans.
    pub x: f64,
    pub gradient: f64,
    pub beta_sq: f64,
    pub baseline_beta_sq: f64,
    pub predicted_exponent: f64,
    pub included: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingScan {
    pub points: Vec<ScalingPoint>,
    pub fit: LineFit,
    pub predicted_slope: f64,
    pub max_unitarity_residual: f64,
}

fn require_depth_window(params: &ModelParams) -> Result<()> {
    params.require_mott()?;
    let delta = params.u / params.critical_u() - 1.0;
    if !(DEPTH_WINDOW.0..=DEPTH_WINDOW.1).contains(&delta) {
        return Err(Error::PhysicsGuard(format!(
            "Mott depth U/U_c - 1 = {delta:.4} outside [{}, {}]",
            DEPTH_WINDOW.0, DEPTH_WINDOW.1
        )));
    }
    Ok(())
}

fn require_exponent_window(e: f64) -> Result<()> {
    if !(EXPONENT_WINDOW.0..=EXPONENT_WINDOW.1).contains(&e) {
        return Err(Error::WindowViolation(format!(
            "predicted exponent {e:.2} outside [{}, {}]",
            EXPONENT_WINDOW.0, EXPONENT_WINDOW.1
        )));
    }
    Ok(())
}

fn scan_point(
    params: &ModelParams,
    gradient: f64,
    x: f64,
    k: &[f64],
    exponent: f64,
    tol: f64,
    floor: f64,
) -> Result<(ScalingPoint, f64)> {
    let protocol = standard_protocol(params, gradient)?;
    let state = evolve_mode(params, &protocol, k, tol)?;
    let mix = extract_bogoliubov(params, &protocol, &state)?;
    let control = protocol.zero_gradient();
    let base_state = evolve_mode(params, &control, k, tol)?;
    let base = extract_bogoliubov(params, &control, &base_state)?;
    let beta_sq = mix.beta_sq();
    let baseline = base.beta_sq();
    let included = beta_sq > floor && baseline <= 0.1 * beta_sq;
    Ok((
        ScalingPoint {
            x,
            gradient,
            beta_sq,
            baseline_beta_sq: baseline,
            predicted_exponent: exponent,
            included,
        },
        mix.unitarity_residual.max(base.unitarity_residual),
    ))
}

fn assemble_scan(rows: Vec<(ScalingPoint, f64)>, predicted_slope: f64) -> Result<ScalingScan> {
    let max_res = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    let points: Vec<ScalingPoint> = rows.into_iter().map(|r| r.0).collect();
    let xs: Vec<f64> = points.iter().filter(|p| p.included).map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().filter(|p| p.included).map(|p| p.beta_sq.ln()).collect();
    if xs.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "only {} of {} scan points usable",
            xs.len(),
            points.len()
        )));
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(ScalingScan { points, fit, predicted_slope, max_unitarity_residual: max_res })
}

/// ln|β₀|² against 1/G at k = 0. Slope prediction: −πΔℰ²/(4c).
pub fn gradient_scan(
    params: &ModelParams,
    gradients: &[f64],
    tol: f64,
    floor: f64,
) -> Result<ScalingScan> {
    require_depth_window(params)?;
    let gap = params.energy_gap()?;
    let c = params.effective_speed();
    for &g in gradients {
        if !(g > 0.0) {
            return Err(Error::PhysicsGuard(format!("gradient {g} must be > 0")));
        }
        require_exponent_window(tunneling_exponent(params, g, 0.0)?)?;
    }
    let k0 = vec![0.0; params.d];
    let rows: Vec<(ScalingPoint, f64)> = gradients
        .par_iter()
        .map(|&g| {
            let e = tunneling_exponent(params, g, 0.0)?;
            scan_point(params, g, 1.0 / g, &k0, e, tol, floor)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_scan(rows, -std::f64::consts::PI * gap * gap / (4.0 * c))
}

/// ln|β_k|² against k⊥² at fixed gradient, the transverse momentum on the
/// last axis (d >= 2). Slope prediction: −πc/G.
pub fn transverse_scan(
    params: &ModelParams,
    gradient: f64,
    k_perp_sq: &[f64],
    tol: f64,
    floor: f64,
) -> Result<ScalingScan> {
    require_depth_window(params)?;
    if params.d < 2 {
        return Err(Error::PhysicsGuard(
            "transverse scan needs a transverse direction, d >= 2".into(),
        ));
    }
    let c = params.effective_speed();
    for &kp in k_perp_sq {
        if kp < 0.0 {
            return Err(Error::PhysicsGuard(format!("k_perp_sq = {kp} must be >= 0")));
        }
        require_exponent_window(tunneling_exponent(params, gradient, kp)?)?;
    }
    let rows: Vec<(ScalingPoint, f64)> = k_perp_sq
        .par_iter()
        .map(|&kp| {
            let mut k = vec![0.0; params.d];
            k[params.d - 1] = kp.sqrt();
            let e = tunneling_exponent(params, gradient, kp)?;
            scan_point(params, gradient, kp, &k, e, tol, floor)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_scan(rows, -std::f64::consts::PI * c / gradient)
}
