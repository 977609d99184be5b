//! Acceptance gate: ten end-to-end checks of the library against its
//! quantitative contract. Every check prints a single `criterion NN
//! (...): PASS` or `: FAIL` line (visible with `--nocapture`), with the
//! offending numbers listed on failure. All tolerances are pinned here,
//! at the top, so the contract is explicit in one place.

use mottpair::correlations::{
    evolve_correlations_k, evolve_correlations_real, factorization_check, ring_momentum, Gauge,
    Lattice,
};
use mottpair::ed::{tilt_response, EdConfig, EdGeometry, EdSystem};
use mottpair::floquet::{
    correlation_monodromy, exponent_check, mode_monodromy, monodromy, perturbative_growth,
    resonance_scan, FloquetSystem,
};
use mottpair::model::{BzGrid, Envelope, ModelParams, Protocol, CRITICAL_RATIO};
use mottpair::modes::{
    evolve_mode, evolve_mode_sampled, evolve_mode_tracked_gauge, extract_bogoliubov,
    gradient_for_exponent, gradient_scan, pair_density, perp_sq_for_exponent, standard_protocol,
    transverse_scan,
};
use mottpair::ode::{CMat, C64, ONE, ZERO};
use mottpair::qed::perp_scan;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

/// 01: relative error allowed between the zone minimum of 2ω and the gap.
const GAP_REL: f64 = 1e-12;
/// 02: relative error allowed on the k² coefficient of ω²(k).
const SPEED_REL: f64 = 1e-4;
/// 02: finite-difference step; truncation enters at O(step²).
const SPEED_FD_STEP: f64 = 1e-3;
/// 03: relative error allowed on the fitted field-side slope.
const QED_SLOPE_REL: f64 = 0.05;
/// 03: unitarity residual allowed on every field-side mode.
const QED_UNITARITY: f64 = 1e-8;
const QED_TOL: f64 = 1e-12;
const QED_FLOOR: f64 = 1e-18;
/// 04: relative error allowed on both fitted lattice tunneling slopes.
const SCALING_SLOPE_REL: f64 = 0.10;
const SCALING_TOL: f64 = 1e-10;
const SCALING_FLOOR: f64 = 1e-16;
/// 05: worst factorization residual allowed at integrator tol 1e-10.
const FACTOR_RESIDUAL: f64 = 1e-8;
const FACTOR_TOL: f64 = 1e-10;
/// 06: ring Fourier transform against direct momentum integration.
const RING_MATCH: f64 = 1e-8;
/// 06: scalar-gauge open chain against the ring, bulk sites only.
const BULK_MATCH: f64 = 1e-6;
/// 07: growth factors from the one-period matrix against 50 periods.
const MONODROMY_REL: f64 = 0.01;
/// 07: allowed distance of the subharmonic center from U/2.
const SECOND_CENTER_OFF: f64 = 5e-3;
/// 07: linear-in-J scaling of the first band exponent.
const FIRST_SCALING_REL: f64 = 0.05;
/// 07: quadratic-in-J scaling of the second band exponent.
const SECOND_SCALING_REL: f64 = 0.10;
/// 07: the scaling laws are the primary claim; the absolute exponent
/// prefactors carry a normalization ambiguity and get a wider band.
const RATIO_BAND: (f64, f64) = (0.75, 1.25);
/// 08: relative error allowed on the secular growth laws.
const GROWTH_REL: f64 = 0.05;
/// 09: hyperbolic norm drift allowed at every output time.
const SU11_DRIFT: f64 = 1e-8;
/// 09: hermiticity residual of the occupation matrix.
const HERMITICITY: f64 = 1e-10;
/// 09: |det| distance from 1 for the one-period mode matrix.
const DET_UNIT: f64 = 1e-10;
/// 09: same for the augmented correlation matrix; its extra source row
/// leaves a larger truncation footprint, so the bound scales with the
/// integrator tolerance instead of being a hard contract.
const CORR_DET_UNIT: f64 = 1e-9;
/// 09: split allowed between the two tilt bookkeeping code paths.
const GAUGE_SPLIT: f64 = 1e-8;
/// 09: change allowed under k -> k + 2π and under k⊥ -> −k⊥.
const PERIODICITY: f64 = 1e-10;
/// 10: norm/energy/number drift allowed in a static evolution.
const ED_CONSERVE: f64 = 1e-9;
/// 10: relative holon-doublon imbalance allowed; only occupation beyond
/// the doublon level can unbalance the two at unit filling, and that
/// weight carries a fraction this small of the defect density at
/// J/U = 0.04.
const ED_IMBALANCE_REL: f64 = 0.02;
/// 10: required enhancement of the resonant defect yield.
const ED_ENHANCEMENT: f64 = 5.0;

fn verdict(tag: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("{tag}: PASS");
    } else {
        println!("{tag}: FAIL");
        for f in &failures {
            println!("  {f}");
        }
        panic!("{tag}: {}", failures.join("; "));
    }
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn matrix_power<const N: usize>(m: &CMat<N>, n: usize) -> CMat<N> {
    let mut acc = CMat::<N>::identity();
    for _ in 0..n {
        acc = acc.mul(m);
    }
    acc
}

/// The pair frequency is strictly decreasing in the structure factor
/// throughout the insulating regime, so the zone minimum of 2ω sits at
/// k = 0 and must reproduce √(J² − 6JU + U²) to near machine accuracy.
#[test]
fn c01_zone_minimum_reproduces_the_gap() {
    let mut failures = Vec::new();
    let mut seed = 0x5eed_0001u64;
    for i in 0..20 {
        let d = 1 + i % 3;
        let j = 0.2 + 1.3 * splitmix(&mut seed);
        let u = (6.2 + 7.0 * splitmix(&mut seed)) * j;
        let p = ModelParams::new(j, u, d).unwrap();
        let gap = p.energy_gap().unwrap();
        let n = if d == 3 { 20 } else { 64 };
        let grid = BzGrid::new(n, d).unwrap();
        let min2w = (0..grid.len())
            .map(|idx| 2.0 * p.dispersion(&grid.point(idx)).unwrap().omega_plus)
            .fold(f64::INFINITY, f64::min);
        if rel(min2w, gap) > GAP_REL {
            failures.push(format!(
                "J = {j:.4}, U = {u:.4}, d = {d}: zone minimum {min2w:.15e} vs gap {gap:.15e}"
            ));
        }
    }
    verdict("criterion 01 (zone minimum reproduces the gap)", failures);
}

/// ω²(k) grows from its k = 0 value as c²k² along every axis; a central
/// second difference at step 10⁻³ resolves that coefficient to ~10⁻⁶,
/// leaving two orders of headroom under the demanded 10⁻⁴.
#[test]
fn c02_dispersion_curvature_matches_the_effective_speed() {
    let mut failures = Vec::new();
    let mut seed = 0x5eed_0002u64;
    for d in 1..=3usize {
        for _ in 0..3 {
            let j = 0.3 + splitmix(&mut seed);
            let u = (6.5 + 5.0 * splitmix(&mut seed)) * j;
            let p = ModelParams::new(j, u, d).unwrap();
            let c_sq = p.effective_speed().powi(2);
            let w_sq = |k: &[f64]| p.dispersion(k).unwrap().omega_plus.powi(2);
            let origin = vec![0.0; d];
            for axis in 0..d {
                let mut hi = origin.clone();
                hi[axis] = SPEED_FD_STEP;
                let mut lo = origin.clone();
                lo[axis] = -SPEED_FD_STEP;
                let curv = (w_sq(&hi) + w_sq(&lo) - 2.0 * w_sq(&origin))
                    / (2.0 * SPEED_FD_STEP * SPEED_FD_STEP);
                if rel(curv, c_sq) > SPEED_REL {
                    failures.push(format!(
                        "J = {j:.4}, U = {u:.4}, d = {d}, axis {axis}: curvature {curv:.10e} vs c² {c_sq:.10e}"
                    ));
                }
            }
        }
    }
    verdict("criterion 02 (dispersion curvature matches c_eff²)", failures);
}

/// Slow field-side pulse at three strengths: the k⊥² slope of ln|β|²
/// must track −π/qE. At qEτ ≫ m the closed-form slope is
/// −πτ/√(m² + (qEτ)²), within half a percent of −π/qE for every case
/// here, so the 5% budget is spent on integration accuracy alone.
#[test]
fn c03_field_side_slope_tracks_the_tunneling_exponent() {
    let mut failures = Vec::new();
    let tau = 100.0;
    for qe in [0.1, 0.2, 0.4] {
        let grid: Vec<f64> = (0..6).map(|i| 0.15 * qe * i as f64).collect();
        match perp_scan(1.0, qe, tau, &grid, QED_TOL, QED_FLOOR) {
            Ok(scan) => {
                if !scan.points.iter().all(|pt| pt.included) {
                    failures.push(format!("qE = {qe}: some modes fell below the floor"));
                }
                let r = rel(scan.fit.slope, scan.predicted_slope);
                if r > QED_SLOPE_REL {
                    failures.push(format!(
                        "qE = {qe}: slope {:.6} vs predicted {:.6} (rel {r:.3})",
                        scan.fit.slope, scan.predicted_slope
                    ));
                }
                let worst =
                    scan.points.iter().map(|pt| pt.unitarity_residual).fold(0.0f64, f64::max);
                if worst > QED_UNITARITY {
                    failures.push(format!("qE = {qe}: unitarity residual {worst:.2e}"));
                }
            }
            Err(e) => failures.push(format!("qE = {qe}: {e}")),
        }
    }
    verdict("criterion 03 (field-side pair creation slope)", failures);
}

/// Near-critical tunneling exponents on the lattice: ln|β|² falls off
/// linearly in 1/G at k = 0 with slope −πΔℰ²/(4c) and linearly in k⊥²
/// at fixed G with slope −πc/G, over gradients whose predicted
/// exponents stay inside the trusted window. Exponents much past 12
/// push |β|² toward the residual leakage of the zero-tilt control run
/// (~10⁻⁷), where the baseline veto starts dropping points, so the
/// ladder stays in the shallow half of the window.
#[test]
fn c04_lattice_scaling_law() {
    let p = ModelParams::new(1.0, 1.05 * CRITICAL_RATIO, 2).unwrap();
    let mut failures = Vec::new();

    let exponents = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
    let gradients: Vec<f64> =
        exponents.iter().map(|&e| gradient_for_exponent(&p, e).unwrap()).collect();
    match gradient_scan(&p, &gradients, SCALING_TOL, SCALING_FLOOR) {
        Ok(scan) => {
            let r = rel(scan.fit.slope, scan.predicted_slope);
            if r > SCALING_SLOPE_REL {
                failures.push(format!(
                    "1/G slope {:.5} vs predicted {:.5} (rel {r:.3})",
                    scan.fit.slope, scan.predicted_slope
                ));
            }
            for pt in scan.points.iter().filter(|pt| !pt.included) {
                failures.push(format!(
                    "gradient scan dropped x = {:.4}: |β|² = {:.3e}, baseline {:.3e}",
                    pt.x, pt.beta_sq, pt.baseline_beta_sq
                ));
            }
        }
        Err(e) => failures.push(format!("gradient scan: {e}")),
    }

    let g = gradients[0];
    let perp_exponents = [5.5, 6.5, 7.5, 8.5, 9.5, 10.5, 11.5];
    let kps: Vec<f64> =
        perp_exponents.iter().map(|&e| perp_sq_for_exponent(&p, g, e).unwrap()).collect();
    match transverse_scan(&p, g, &kps, SCALING_TOL, SCALING_FLOOR) {
        Ok(scan) => {
            let r = rel(scan.fit.slope, scan.predicted_slope);
            if r > SCALING_SLOPE_REL {
                failures.push(format!(
                    "k⊥² slope {:.5} vs predicted {:.5} (rel {r:.3})",
                    scan.fit.slope, scan.predicted_slope
                ));
            }
            for pt in scan.points.iter().filter(|pt| !pt.included) {
                failures.push(format!(
                    "transverse scan dropped x = {:.4}: |β|² = {:.3e}, baseline {:.3e}",
                    pt.x, pt.beta_sq, pt.baseline_beta_sq
                ));
            }
        }
        Err(e) => failures.push(format!("transverse scan: {e}")),
    }
    verdict("criterion 04 (lattice pair creation scaling law)", failures);
}

/// The correlation pair at every momentum must equal the bilinears of
/// the independently integrated mode amplitudes, across three distinct
/// drive shapes, to 10⁻⁸ at integrator tolerance 10⁻¹⁰.
#[test]
fn c05_correlations_factorize_into_modes() {
    let mut failures = Vec::new();

    let p1 = ModelParams::new(0.3, 4.0, 1).unwrap();
    let proto1 = Protocol::tilted(p1.j, 2.0, 0.5, 0.8, 1.0, 4.0, 0).unwrap();
    let grid1 = BzGrid::new(64, 1).unwrap();
    let times1 = [3.0, 6.0, 9.0];

    let p2 = ModelParams::new(0.2, 5.0, 2).unwrap();
    let proto2 =
        Protocol::new(Envelope::Constant(p2.j), Envelope::Constant(p2.u), 0, 8.0).unwrap();
    let grid2 = BzGrid::new(8, 2).unwrap();
    let times2 = [2.0, 4.0, 6.0];

    let p3 = ModelParams::new(0.25, 6.0, 2).unwrap();
    let proto3 = Protocol::new(
        Envelope::Constant(p3.j),
        Envelope::pulse(0.5, 1.5, 5.0, 1.5, 1.2).unwrap(),
        1,
        10.0,
    )
    .unwrap();
    let grid3 = BzGrid::new(8, 2).unwrap();
    let times3 = [2.5, 5.0, 7.5];

    for (label, p, proto, grid, times) in [
        ("pulsed tilt, d = 1", &p1, &proto1, &grid1, &times1[..]),
        ("resonant constant drive, d = 2", &p2, &proto2, &grid2, &times2[..]),
        ("pulsed tilt on the second axis, d = 2", &p3, &proto3, &grid3, &times3[..]),
    ] {
        match factorization_check(p, proto, grid, times, FACTOR_TOL) {
            Ok(rep) => {
                let worst = rep.max_f12_residual.max(rep.max_f11_residual);
                if worst > FACTOR_RESIDUAL {
                    failures.push(format!(
                        "{label}: residuals f12 {:.2e}, f11 {:.2e} over {} modes",
                        rep.max_f12_residual, rep.max_f11_residual, rep.n_modes
                    ));
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    verdict("criterion 05 (mode factorization of correlations)", failures);
}

/// A 32-site ring with bond-phase tilt, Fourier transformed, must land
/// on the direct momentum integration; an open chain carrying the same
/// tilt as an on-site potential must agree in the bulk after undoing
/// the connecting phase, for times short of the edge light cone.
#[test]
fn c06_real_space_matches_momentum_space() {
    let mut failures = Vec::new();
    let n = 32usize;
    let p = ModelParams::new(0.5, 6.0, 1).unwrap();
    let proto = Protocol::tilted(p.j, 1.0, 0.3, 1.5, 0.8, 1.8, 0).unwrap();
    let light_cone = n as f64 / (2.0 * p.effective_speed());
    assert!(
        proto.t_final < light_cone,
        "comparison window {} must stay inside the edge light cone {light_cone}",
        proto.t_final
    );

    let ring = evolve_correlations_real(
        &p,
        &proto,
        Lattice::Ring { n },
        Gauge::PeierlsLink,
        1e-9,
        &[],
        &mut |_| {},
    )
    .unwrap();
    let mut worst = 0.0f64;
    for mode in 0..n {
        let (f12_ft, f11_ft) = ring_momentum(&ring, mode).unwrap();
        let k = [TAU * mode as f64 / n as f64];
        let direct = evolve_correlations_k(&p, &proto, &k, 1e-10, &[], &mut |_| {}).unwrap();
        worst = worst
            .max((f12_ft - direct.f12).norm())
            .max((f11_ft - C64::from(direct.f11)).norm());
    }
    if worst > RING_MATCH {
        failures.push(format!("ring transform vs momentum integration: {worst:.2e}"));
    }

    let open = evolve_correlations_real(
        &p,
        &proto,
        Lattice::OpenChain { n },
        Gauge::ScalarOnsite,
        1e-9,
        &[],
        &mut |_| {},
    )
    .unwrap();
    let a = proto.gauge_integral(proto.t_final);
    let mut worst_bulk = 0.0f64;
    for mu in 13..=19usize {
        for nu in 13..=19usize {
            let r = nu as f64 - mu as f64;
            let w = C64::from_polar(1.0, -a * r);
            worst_bulk = worst_bulk
                .max((w * open.f12_at(mu, nu) - ring.f12_at(mu, nu)).norm())
                .max((w * open.f11_at(mu, nu) - ring.f11_at(mu, nu)).norm());
        }
    }
    if worst_bulk > BULK_MATCH {
        failures.push(format!("scalar-gauge bulk vs ring: {worst_bulk:.2e}"));
    }
    verdict("criterion 06 (real space matches momentum space)", failures);
}

/// Driven band structure at J = 0.01, U = 1: the strongest band within
/// √2·J of ΔV = U with width within a factor 2 of √2·J, a subharmonic
/// near U/2, exponents scaling as J and J², and one-period matrices
/// whose 50th power reproduces 50 periods of direct integration.
#[test]
fn c07_bloch_resonance_bands() {
    let p = ModelParams::new(0.01, 1.0, 2).unwrap();
    let kt = FRAC_PI_2;
    let mut failures = Vec::new();
    let sqrt2j = SQRT_2 * p.j;

    match resonance_scan(&p, 0.35, 1.3, 0.0025, kt, 1e-8) {
        Ok(scan) => {
            if scan.resonances.len() < 2 {
                failures.push(format!("found {} band(s), need 2", scan.resonances.len()));
            } else {
                let first = scan
                    .resonances
                    .iter()
                    .max_by(|a, b| a.lambda_peak.partial_cmp(&b.lambda_peak).unwrap())
                    .unwrap();
                if (first.center - p.u).abs() > sqrt2j {
                    failures.push(format!(
                        "first band center {:.6} further than {sqrt2j:.4} from {}",
                        first.center, p.u
                    ));
                }
                if !(0.5 * sqrt2j..=2.0 * sqrt2j).contains(&first.width) {
                    failures.push(format!(
                        "first band width {:.5} vs {sqrt2j:.5} (factor-2 band)",
                        first.width
                    ));
                }
                let second = scan
                    .resonances
                    .iter()
                    .min_by(|a, b| a.center.partial_cmp(&b.center).unwrap())
                    .unwrap();
                if (second.center - 0.5 * p.u).abs() > SECOND_CENTER_OFF {
                    failures.push(format!(
                        "subharmonic center {:.6} not near {:.3}",
                        second.center,
                        0.5 * p.u
                    ));
                }
            }
        }
        Err(e) => failures.push(format!("band scan: {e}")),
    }

    match exponent_check(&p, kt, 1e-9) {
        Ok(check) => {
            if rel(check.first.doubling_ratio, 2.0) > FIRST_SCALING_REL {
                failures.push(format!(
                    "first band doubling ratio {:.4} (want 2, linear in J)",
                    check.first.doubling_ratio
                ));
            }
            if !(RATIO_BAND.0..=RATIO_BAND.1).contains(&check.first.ratio) {
                failures.push(format!(
                    "first band exponent ratio {:.4} outside {:?}",
                    check.first.ratio, RATIO_BAND
                ));
            }
            if rel(check.second.doubling_ratio, 4.0) > SECOND_SCALING_REL {
                failures.push(format!(
                    "second band doubling ratio {:.4} (want 4, quadratic in J)",
                    check.second.doubling_ratio
                ));
            }
            if !(RATIO_BAND.0..=RATIO_BAND.1).contains(&check.second.ratio) {
                failures.push(format!(
                    "second band exponent ratio {:.4} outside {:?}",
                    check.second.ratio, RATIO_BAND
                ));
            }
        }
        Err(e) => failures.push(format!("exponent check: {e}")),
    }

    // One-period matrix powers against direct long evolutions, on both
    // the mode pair and the sourced correlation set.
    let t50 = 50.0 * TAU / p.u;
    let proto =
        Protocol::new(Envelope::Constant(p.j), Envelope::Constant(p.u), 0, t50).unwrap();
    let k = [0.0, kt];
    let m2 = mode_monodromy(&p, p.u, kt, 1e-11).unwrap();
    let pow2 = matrix_power(&m2, 50);
    let state = evolve_mode(&p, &proto, &k, 1e-11).unwrap();
    for (label, got, want) in [
        ("f+", pow2.m[0][0], state.f_plus),
        ("g+", pow2.m[1][0], state.g_plus),
    ] {
        let r = (got - want).norm() / want.norm();
        if r > MONODROMY_REL {
            failures.push(format!("mode {label} after 50 periods: rel {r:.4}"));
        }
    }
    let m4 = correlation_monodromy(&p, p.u, kt, 1e-11).unwrap();
    let pow4 = matrix_power(&m4, 50);
    let v = pow4.mul_vec(&[ZERO, ZERO, ZERO, ONE]);
    let direct = evolve_correlations_k(&p, &proto, &k, 1e-11, &[], &mut |_| {}).unwrap();
    let r12 = (v[0] - direct.f12).norm() / direct.f12.norm();
    let r11 = (v[2] - C64::from(direct.f11)).norm() / direct.f11.abs();
    if r12 > MONODROMY_REL || r11 > MONODROMY_REL {
        failures.push(format!(
            "correlations after 50 periods: f12 rel {r12:.4}, f11 rel {r11:.4}"
        ));
    }
    verdict("criterion 07 (Bloch resonance structure)", failures);
}

/// At ΔV = U and J = 10⁻³U the driven correlations must follow the
/// leading secular laws |f12| = Jt/(2√2) and f11 = J²t²/8 within 5%
/// over Ut ≲ 100. The laws describe the envelope; the counter-rotating
/// micro-motion (relative size ~4/Ut) rides on top of it and vanishes
/// exactly at whole drive periods, so the run samples stroboscopically:
/// 15 periods, one sample per period, Ut up to 30π ≈ 94.
#[test]
fn c08_resonant_perturbative_growth() {
    let p = ModelParams::new(0.001, 1.0, 2).unwrap();
    let mut failures = Vec::new();
    match perturbative_growth(&p, 15.0 * TAU, 15, 1e-12) {
        Ok(rep) => {
            if rep.max_f12_rel_dev > GROWTH_REL {
                failures.push(format!("|f12| off by {:.4} relative", rep.max_f12_rel_dev));
            }
            if rep.max_f11_rel_dev > GROWTH_REL {
                failures.push(format!("f11 off by {:.4} relative", rep.max_f11_rel_dev));
            }
        }
        Err(e) => failures.push(format!("{e}")),
    }
    verdict("criterion 08 (leading-order resonant growth)", failures);
}

/// Structural invariants across the library: hyperbolic norms, stored
/// redundancy of the correlation pair, unit-modulus determinants and
/// transverse parity of one-period matrices, agreement of the two tilt
/// bookkeeping code paths, zone periodicity, and bitwise determinism
/// of a parallel scan.
#[test]
fn c09_invariant_suite() {
    let mut failures = Vec::new();

    // Hyperbolic norms at every output time of a full tilt sequence.
    let p1 = ModelParams::new(1.0, 6.2, 1).unwrap();
    let proto1 = standard_protocol(&p1, 0.35).unwrap();
    let samples: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64 * proto1.t_final).collect();
    let mut worst_drift = 0.0f64;
    let state = evolve_mode_sampled(&p1, &proto1, &[0.4], 1e-10, &samples, &mut |s| {
        worst_drift = worst_drift.max(s.residual_plus).max(s.residual_minus);
    })
    .unwrap();
    worst_drift = worst_drift.max(state.residual_plus).max(state.residual_minus);
    if worst_drift > SU11_DRIFT {
        failures.push(format!("hyperbolic norm drift {worst_drift:.2e}"));
    }

    // The stored correlation pair determines its mirror components.
    let p2 = ModelParams::new(0.2, 5.0, 2).unwrap();
    let proto2 =
        Protocol::new(Envelope::Constant(p2.j), Envelope::Constant(p2.u), 0, 6.0).unwrap();
    let kstate = evolve_correlations_k(&p2, &proto2, &[0.3, -1.1], 1e-10, &[], &mut |_| {}).unwrap();
    if kstate.f21() != kstate.f12.conj() || kstate.f22() != kstate.f11 {
        failures.push("mirror components diverged from the stored pair".into());
    }
    let ring = evolve_correlations_real(
        &ModelParams::new(0.4, 5.0, 1).unwrap(),
        &Protocol::tilted(0.4, 2.0, 0.5, 0.7, 1.0, 3.0, 0).unwrap(),
        Lattice::Ring { n: 8 },
        Gauge::PeierlsLink,
        1e-10,
        &[],
        &mut |_| {},
    )
    .unwrap();
    if ring.hermiticity_residual() > HERMITICITY {
        failures.push(format!(
            "occupation matrix hermiticity residual {:.2e}",
            ring.hermiticity_residual()
        ));
    }
    if ring.pair(1, 4).f21 != ring.f12_at(4, 1).conj() {
        failures.push("pair accessor disagrees with the stored matrix".into());
    }

    // One-period matrices: |det| = 1 and transverse parity.
    let pb = ModelParams::new(0.01, 1.0, 2).unwrap();
    for system in [FloquetSystem::Mode, FloquetSystem::Correlation] {
        let (tol, det_bound) = match system {
            FloquetSystem::Mode => (1e-10, DET_UNIT),
            FloquetSystem::Correlation => (1e-12, CORR_DET_UNIT),
        };
        for (dv, kt) in [(0.8, 0.7), (1.0, FRAC_PI_2)] {
            let r = monodromy(&pb, dv, kt, system, tol).unwrap();
            if (r.det_modulus - 1.0).abs() > det_bound {
                failures.push(format!(
                    "{system:?} at ΔV = {dv}: |det| − 1 = {:.2e}",
                    r.det_modulus - 1.0
                ));
            }
            let mirror = monodromy(&pb, dv, -kt, system, tol).unwrap();
            if (r.lambda - mirror.lambda).abs() > PERIODICITY {
                failures.push(format!(
                    "{system:?} at ΔV = {dv}: exponent parity broken by {:.2e}",
                    (r.lambda - mirror.lambda).abs()
                ));
            }
        }
    }

    // Tilt bookkeeping: pre-integrated phase against tracked phase.
    for k in [0.0, 0.7, -2.1] {
        let closed = evolve_mode(&p1, &proto1, &[k], 1e-11).unwrap();
        let tracked = evolve_mode_tracked_gauge(&p1, &proto1, &[k], 1e-11).unwrap();
        let b1 = extract_bogoliubov(&p1, &proto1, &closed).unwrap().beta_sq();
        let b2 = extract_bogoliubov(&p1, &proto1, &tracked).unwrap().beta_sq();
        if (b1 - b2).abs() > GAUGE_SPLIT * b1.max(1e-30) {
            failures.push(format!("k = {k}: bookkeeping split {b1:.6e} vs {b2:.6e}"));
        }
    }

    // Zone periodicity of |β|².
    let base = evolve_mode(&p1, &proto1, &[0.4], 1e-11).unwrap();
    let shifted = evolve_mode(&p1, &proto1, &[0.4 + TAU], 1e-11).unwrap();
    let b_base = extract_bogoliubov(&p1, &proto1, &base).unwrap().beta_sq();
    let b_shift = extract_bogoliubov(&p1, &proto1, &shifted).unwrap().beta_sq();
    if rel(b_shift, b_base) > PERIODICITY {
        failures.push(format!("k + 2π moved |β|² by {:.2e} relative", rel(b_shift, b_base)));
    }

    // Transverse parity of |β|².
    let p2d = ModelParams::new(1.0, 6.2, 2).unwrap();
    let proto2d = standard_protocol(&p2d, 0.35).unwrap();
    let up = evolve_mode(&p2d, &proto2d, &[0.3, 1.1], 1e-11).unwrap();
    let down = evolve_mode(&p2d, &proto2d, &[0.3, -1.1], 1e-11).unwrap();
    let b_up = extract_bogoliubov(&p2d, &proto2d, &up).unwrap().beta_sq();
    let b_down = extract_bogoliubov(&p2d, &proto2d, &down).unwrap().beta_sq();
    if rel(b_up, b_down) > PERIODICITY {
        failures.push(format!("k⊥ parity broken by {:.2e} relative", rel(b_up, b_down)));
    }

    // Bitwise determinism of a parallel spectrum scan.
    let grid = BzGrid::new(8, 1).unwrap();
    let one = pair_density(&p1, &proto1, &grid, 1e-9).unwrap();
    let two = pair_density(&p1, &proto1, &grid, 1e-9).unwrap();
    let same = one.pair_density.to_bits() == two.pair_density.to_bits()
        && one
            .beta_sq
            .iter()
            .zip(&two.beta_sq)
            .all(|(a, b)| a.to_bits() == b.to_bits())
        && one
            .baseline_beta_sq
            .iter()
            .zip(&two.baseline_beta_sq)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if !same {
        failures.push("repeated scan is not bit-identical".into());
    }

    verdict("criterion 09 (invariant suite)", failures);
}

/// The small-chain reference: Hermitian generator, machine-level
/// conservation in static evolution, holon-doublon balance within the
/// occupation cutoff, and a defect yield peaked near ΔV = U at least
/// five times the zero-tilt control.
#[test]
fn c10_exact_diagonalization_oracle() {
    let p = ModelParams::new(0.04, 1.0, 1).unwrap();
    let config = EdConfig { sites: 6, n_max: 4, geometry: EdGeometry::OpenChain };
    let mut failures = Vec::new();

    let system = EdSystem::new(&p, config).unwrap();
    let dim = system.dim();
    let mut seed = 0xace5_0010u64;
    let x: Vec<C64> = (0..dim)
        .map(|_| C64::new(splitmix(&mut seed) - 0.5, splitmix(&mut seed) - 0.5))
        .collect();
    let y: Vec<C64> = (0..dim)
        .map(|_| C64::new(splitmix(&mut seed) - 0.5, splitmix(&mut seed) - 0.5))
        .collect();
    let mut hx = vec![ZERO; dim];
    let mut hy = vec![ZERO; dim];
    system.apply(p.j, 0.3, &x, &mut hx);
    system.apply(p.j, 0.3, &y, &mut hy);
    let yhx: C64 = y.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum();
    let xhy: C64 = x.iter().zip(&hy).map(|(a, b)| a.conj() * b).sum();
    let scale: f64 = hx.iter().map(|c| c.norm()).sum::<f64>().max(1.0);
    if (yhx - xhy.conj()).norm() > 1e-13 * scale {
        failures.push(format!("generator not Hermitian: {:.2e}", (yhx - xhy.conj()).norm()));
    }

    // Conservation under a static protocol.
    let (e0, psi0) = system.ground_state(p.j).unwrap();
    let static_proto =
        Protocol::new(Envelope::Constant(p.j), Envelope::Zero, 0, 5.0).unwrap();
    let mut shots = Vec::new();
    system
        .evolve(&static_proto, &psi0, 200, 20, &[2.5, 5.0], &mut |o| shots.push(o.clone()))
        .unwrap();
    for o in &shots {
        if (o.norm - 1.0).abs() > ED_CONSERVE {
            failures.push(format!("t = {}: norm drift {:.2e}", o.t, (o.norm - 1.0).abs()));
        }
        if (o.energy - e0).abs() > ED_CONSERVE * e0.abs().max(1.0) {
            failures.push(format!("t = {}: energy drift {:.2e}", o.t, (o.energy - e0).abs()));
        }
        if (o.total_occupation - 6.0).abs() > ED_CONSERVE {
            failures.push(format!(
                "t = {}: particle number drift {:.2e}",
                o.t,
                (o.total_occupation - 6.0).abs()
            ));
        }
    }

    // Holon-doublon balance after a resonant quench.
    let quench =
        Protocol::new(Envelope::Constant(p.j), Envelope::Constant(p.u), 0, 120.0).unwrap();
    let psi = system.evolve(&quench, &psi0, 600, 24, &[], &mut |_| {}).unwrap();
    let obs = system.observables(&quench, 120.0, &psi);
    let imbalance = (obs.holon_density - obs.doublon_density).abs();
    if imbalance > ED_IMBALANCE_REL * obs.holon_density.max(obs.doublon_density) {
        failures.push(format!(
            "holon {:.5} vs doublon {:.5}: imbalance beyond the cutoff bound",
            obs.holon_density, obs.doublon_density
        ));
    }
    if obs.doublon_density < 0.05 {
        failures.push(format!("resonant quench made almost no pairs: {:.4}", obs.doublon_density));
    }

    // Resonance peak with a zero-tilt control.
    let run = |dv: f64| tilt_response(&p, config, dv, 0.0, 120.0, 600, 24).map(|r| r.excess_defect);
    match (run(p.u), run(0.75 * p.u), run(1.25 * p.u), run(0.0)) {
        (Ok(resonant), Ok(below), Ok(above), Ok(quiet)) => {
            let rivals = below.max(above).max(quiet.abs());
            if resonant < ED_ENHANCEMENT * rivals {
                failures.push(format!(
                    "resonant yield {resonant:.4} vs detuned/quiet {below:.4}/{above:.4}/{quiet:.1e}"
                ));
            }
            if resonant < 0.01 {
                failures.push(format!("resonant yield {resonant:.4} too small to mean anything"));
            }
        }
        other => failures.push(format!("tilt responses failed: {other:?}")),
    }

    verdict("criterion 10 (small-chain reference)", failures);
}
