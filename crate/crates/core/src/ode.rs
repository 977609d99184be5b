//! Numerical kernels: small complex matrices, matrix exponentials, a
//! commutator-free fourth-order Magnus stepper for linear generators, a
//! Dormand-Prince 5(4) integrator for general complex systems, and the
//! little dense/tridiagonal eigensolvers the rest of the crate needs.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense N×N complex matrix on the stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat<const N: usize> {
    pub m: [[C64; N]; N],
}

impl<const N: usize> CMat<N> {
    pub fn zero() -> Self {
        Self { m: [[ZERO; N]; N] }
    }

    pub fn identity() -> Self {
        let mut a = Self::zero();
        for i in 0..N {
            a.m[i][i] = ONE;
        }
        a
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for k in 0..N {
                let aik = self.m[i][k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.m[i][j] += aik * rhs.m[k][j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64; N]) -> [C64; N] {
        let mut out = [ZERO; N];
        for i in 0..N {
            for j in 0..N {
                out[i] += self.m[i][j] * v[j];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] += rhs.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] -= rhs.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] *= s;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.m[i][i]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.m {
            for x in row {
                s += x.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Determinant by cofactor expansion; intended for N <= 4.
    pub fn det(&self) -> C64 {
        match N {
            1 => self.m[0][0],
            2 => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
            _ => {
                let mut d = ZERO;
                let mut sign = ONE;
                for j in 0..N {
                    d += sign * self.m[0][j] * self.minor(0, j);
                    sign = -sign;
                }
                d
            }
        }
    }

    fn minor(&self, row: usize, col: usize) -> C64 {
        // cofactor determinant of the (N-1)×(N-1) submatrix, recursion
        // unrolled by expanding along the first remaining row
        let n = N - 1;
        let mut sub = vec![vec![ZERO; n]; n];
        let mut r = 0;
        for i in 0..N {
            if i == row {
                continue;
            }
            let mut c = 0;
            for j in 0..N {
                if j == col {
                    continue;
                }
                sub[r][c] = self.m[i][j];
                c += 1;
            }
            r += 1;
        }
        det_vec(&sub)
    }
}

fn det_vec(a: &[Vec<C64>]) -> C64 {
    let n = a.len();
    match n {
        0 => ONE,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            let mut d = ZERO;
            let mut sign = ONE;
            for j in 0..n {
                let sub: Vec<Vec<C64>> = (1..n)
                    .map(|i| (0..n).filter(|&c| c != j).map(|c| a[i][c]).collect())
                    .collect();
                d += sign * a[0][j] * det_vec(&sub);
                sign = -sign;
            }
            d
        }
    }
}

/// sinh(z)/z with a series branch near zero.
fn sinhc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

/// exp of a traceless 2×2 matrix: cosh(θ)·1 + sinh(θ)/θ·B with θ² = −det B.
fn exp_traceless_2x2(b: &CMat<2>) -> CMat<2> {
    let theta = (-b.det()).sqrt();
    let ch = theta.cosh();
    let sc = sinhc(theta);
    let mut out = CMat::<2>::zero();
    for i in 0..2 {
        for j in 0..2 {
            out.m[i][j] = sc * b.m[i][j];
        }
        out.m[i][i] += ch;
    }
    out
}

/// Matrix exponential. Traceless 2×2 goes through the closed form (keeping
/// group structure to rounding); everything else through scaling and
/// squaring with a Taylor kernel.
pub fn expm<const N: usize>(a: &CMat<N>) -> CMat<N> {
    if N == 2 {
        let tr = a.trace();
        if tr.norm() <= 1e-14 * (1.0 + a.frobenius()) {
            let mut b = CMat::<2>::zero();
            for i in 0..2 {
                for j in 0..2 {
                    b.m[i][j] = a.m[i][j];
                }
            }
            let e = exp_traceless_2x2(&b);
            let mut out = CMat::<N>::zero();
            for i in 0..2 {
                for j in 0..2 {
                    out.m[i][j] = e.m[i][j];
                }
            }
            return out;
        }
    }
    let norm = a.frobenius();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(1.0 / 2f64.powi(s as i32), 0.0));
    let mut term = CMat::<N>::identity();
    let mut sum = CMat::<N>::identity();
    for k in 1..=30 {
        term = term.mul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.frobenius() < 1e-18 * sum.frobenius() {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}

/// Options for the Magnus stepper.
#[derive(Debug, Clone, Copy)]
pub struct Cf4Options {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for Cf4Options {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 50_000_000 }
    }
}

const SQRT_3: f64 = 1.732050807568877293;
const GAUSS_OFFSET: f64 = SQRT_3 / 6.0;
const CF4_ALPHA_1: f64 = (3.0 - 2.0 * SQRT_3) / 12.0;
const CF4_ALPHA_2: f64 = (3.0 + 2.0 * SQRT_3) / 12.0;

/// One fourth-order commutator-free step of ∂t Y = G(t)·Y over [t, t + h].
fn cf4_step<const N: usize>(g: &impl Fn(f64) -> CMat<N>, y: &CMat<N>, t: f64, h: f64) -> CMat<N> {
    let a1 = g(t + h * (0.5 - GAUSS_OFFSET));
    let a2 = g(t + h * (0.5 + GAUSS_OFFSET));
    let xa = a1.scale(C64::new(h * CF4_ALPHA_1, 0.0)).add(&a2.scale(C64::new(h * CF4_ALPHA_2, 0.0)));
    let xb = a1.scale(C64::new(h * CF4_ALPHA_2, 0.0)).add(&a2.scale(C64::new(h * CF4_ALPHA_1, 0.0)));
    expm(&xa).mul(&expm(&xb).mul(y))
}

/// Propagate the fundamental system ∂t Y = G(t)·Y from t0 to t1 (either
/// direction) with step-doubling error control. The integrator lands exactly
/// on every interior `mark` and reports (t, Y) there and at t1 via
/// `observe`. Accuracy comes from halving the step, never from Richardson
/// extrapolation, so each accepted update stays a product of exponentials
/// of elements of the generator's Lie algebra.
pub fn evolve_generator<const N: usize>(
    g: &impl Fn(f64) -> CMat<N>,
    y0: CMat<N>,
    t0: f64,
    t1: f64,
    marks: &[f64],
    observe: &mut impl FnMut(f64, &CMat<N>),
    opts: &Cf4Options,
) -> Result<CMat<N>> {
    let span = t1 - t0;
    if span == 0.0 {
        observe(t1, &y0);
        return Ok(y0);
    }
    let dir = span.signum();
    let mut targets: Vec<f64> = marks
        .iter()
        .copied()
        .filter(|&m| (m - t0) * dir > 0.0 && (t1 - m) * dir > 0.0)
        .collect();
    targets.sort_by(|a, b| if dir > 0.0 { a.partial_cmp(b).unwrap() } else { b.partial_cmp(a).unwrap() });
    targets.dedup();
    targets.push(t1);

    let mut y = y0;
    let mut t = t0;
    let mut h = span / 64.0;
    let h_min = 1e-13 * span.abs();
    let mut steps = 0usize;

    for &target in &targets {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::ToleranceNotMet(format!(
                    "step budget {} exhausted at t = {t}",
                    opts.max_steps
                )));
            }
            let mut ha = h;
            let mut landing = false;
            if ha.abs() >= (target - t).abs() {
                ha = target - t;
                landing = true;
            }
            let y_one = cf4_step(g, &y, t, ha);
            let y_mid = cf4_step(g, &y, t, 0.5 * ha);
            let y_two = cf4_step(g, &y_mid, t + 0.5 * ha, 0.5 * ha);
            let err = y_two.sub(&y_one).frobenius();
            let scale = opts.tol * y_two.frobenius().max(1.0);
            let accepted = err <= scale;
            if accepted {
                y = y_two;
                t = if landing { target } else { t + ha };
            }
            let ratio = if err > 0.0 { (scale / err).powf(0.2) } else { 5.0 };
            if accepted && landing {
                // keep the pre-clamp working step for the next segment
            } else {
                h = ha * (0.9 * ratio).clamp(0.2, 5.0);
            }
            if h.abs() < h_min {
                return Err(Error::ToleranceNotMet(format!(
                    "step size collapsed below {h_min:e} at t = {t}"
                )));
            }
        }
        t = target;
        observe(t, &y);
    }
    Ok(y)
}

/// Fixed-step variant, mainly for convergence studies.
pub fn evolve_generator_fixed<const N: usize>(
    g: &impl Fn(f64) -> CMat<N>,
    y0: CMat<N>,
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> CMat<N> {
    let h = (t1 - t0) / n_steps as f64;
    let mut y = y0;
    for i in 0..n_steps {
        y = cf4_step(g, &y, t0 + i as f64 * h, h);
    }
    y
}

/// Options for the Dormand-Prince integrator.
#[derive(Debug, Clone, Copy)]
pub struct Dp5Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dp5Options {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: 1e-4 * tol, max_steps: 50_000_000 }
    }
}

/// Dormand-Prince 5(4) with FSAL over a complex state vector; lands exactly
/// on interior `marks` and reports there and at t1. Step acceptance uses the
/// usual mixed absolute/relative error norm.
pub fn integrate_dp5(
    rhs: &mut impl FnMut(f64, &[C64], &mut [C64]),
    y: &mut [C64],
    t0: f64,
    t1: f64,
    marks: &[f64],
    observe: &mut impl FnMut(f64, &[C64]),
    opts: &Dp5Options,
) -> Result<()> {
    let span = t1 - t0;
    if span == 0.0 {
        observe(t1, y);
        return Ok(());
    }
    let dir = span.signum();
    let mut targets: Vec<f64> = marks
        .iter()
        .copied()
        .filter(|&m| (m - t0) * dir > 0.0 && (t1 - m) * dir > 0.0)
        .collect();
    targets.sort_by(|a, b| if dir > 0.0 { a.partial_cmp(b).unwrap() } else { b.partial_cmp(a).unwrap() });
    targets.dedup();
    targets.push(t1);

    let n = y.len();
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut y_stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];

    let mut t = t0;
    rhs(t, y, &mut k[0]);

    // starter step from the magnitudes of y and f; the controller refines it
    let norm = |v: &[C64]| (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let f_norm = norm(&k[0]);
    let mut h = if f_norm > 1e-300 {
        dir * (0.1 * (norm(y) + 1.0) / f_norm).min(span.abs() / 10.0)
    } else {
        span / 100.0
    };
    let h_min = 1e-13 * span.abs();
    let mut steps = 0usize;

    #[rustfmt::skip]
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    for &target in &targets {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::ToleranceNotMet(format!(
                    "step budget {} exhausted at t = {t}",
                    opts.max_steps
                )));
            }
            let mut ha = h;
            let mut landing = false;
            if ha.abs() >= (target - t).abs() {
                ha = target - t;
                landing = true;
            }
            for stage in 0..6 {
                for i in 0..n {
                    let mut acc = ZERO;
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        let a = A[stage][j];
                        if a != 0.0 {
                            acc += a * kj[i];
                        }
                    }
                    y_stage[i] = y[i] + ha * acc;
                }
                if stage == 5 {
                    y_new.copy_from_slice(&y_stage);
                }
                let (_, rest) = k.split_at_mut(stage + 1);
                rhs(t + C[stage] * ha, &y_stage, &mut rest[0]);
            }
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += E[j] * kj[i];
                    }
                }
                let tol_i = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (ha * e).norm_sqr() / (tol_i * tol_i);
            }
            let err = (err_sq / n as f64).sqrt();
            let accepted = err <= 1.0;
            if accepted {
                t = if landing { target } else { t + ha };
                y.copy_from_slice(&y_new);
                k.swap(0, 6); // FSAL: k7 = f(t, y) for the next step
            }
            // on rejection k[0] still holds f(t, y), nothing to restore
            let ratio = if err > 0.0 { err.powf(-0.2) } else { 5.0 };
            if !(accepted && landing) {
                h = ha * (0.9 * ratio).clamp(0.2, 5.0);
            }
            if h.abs() < h_min {
                return Err(Error::ToleranceNotMet(format!(
                    "step size collapsed below {h_min:e} at t = {t}"
                )));
            }
        }
        t = target;
        observe(t, y);
    }
    Ok(())
}

/// Eigenvalues of an N×N complex matrix (N <= 4): characteristic polynomial
/// by the Faddeev-LeVerrier recursion, roots by Durand-Kerner with a
/// deterministic start, sorted by (re, im).
pub fn eigenvalues<const N: usize>(a: &CMat<N>) -> [C64; N] {
    assert!((1..=4).contains(&N), "eigenvalues supports N in 1..=4");
    if N == 1 {
        let mut out = [ZERO; N];
        out[0] = a.m[0][0];
        return out;
    }
    if N == 2 {
        let tr = a.trace();
        let disc = (tr * tr - 4.0 * a.det()).sqrt();
        let mut out = [ZERO; N];
        out[0] = 0.5 * (tr - disc);
        out[1] = 0.5 * (tr + disc);
        sort_c(&mut out);
        return out;
    }

    // monic characteristic polynomial λ^N + c[0]·λ^{N-1} + … + c[N-1]
    let mut c = [ZERO; 4];
    let mut mk = *a;
    c[0] = -mk.trace();
    for k in 1..N {
        let mut shifted = mk;
        for i in 0..N {
            shifted.m[i][i] += c[k - 1];
        }
        mk = a.mul(&shifted);
        c[k] = -mk.trace() / (k + 1) as f64;
    }

    let radius = 1.0 + (0..N).map(|i| c[i].norm()).fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut z = [ZERO; N];
    let mut w = seed;
    for zi in z.iter_mut() {
        *zi = radius * w;
        w *= seed;
    }
    let poly = |x: C64| {
        let mut p = ONE;
        for ci in c.iter().take(N) {
            p = p * x + ci;
        }
        p
    };
    for _ in 0..200 {
        let mut max_delta = 0.0f64;
        for i in 0..N {
            let mut denom = ONE;
            for j in 0..N {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom == ZERO {
                continue;
            }
            let delta = poly(z[i]) / denom;
            z[i] -= delta;
            max_delta = max_delta.max(delta.norm() / (1.0 + z[i].norm()));
        }
        if max_delta < 1e-15 {
            break;
        }
    }
    sort_c(&mut z);
    z
}

fn sort_c<const N: usize>(z: &mut [C64; N]) {
    z.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
}

/// Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix by QL
/// with implicit shifts. `off` holds the n−1 subdiagonal entries. Returns
/// eigenvalues ascending; column j of the returned matrix (as `vecs[j]`) is
/// the eigenvector for `vals[j]`.
pub fn tridiag_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n, "off-diagonal length must be n-1");
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![vec![0.0; n]; n]; // z[row][col]
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NonConvergence(format!(
                    "tridiagonal QL stalled on eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let vecs: Vec<Vec<f64>> = order.iter().map(|&j| z.iter().map(|row| row[j]).collect()).collect();
    Ok((vals, vecs))
}
