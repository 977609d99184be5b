//! Exact diagonalization of small bosonic chains at unit filling.
//!
//! This is the many-body check on the quadratic theory: no 1/Z
//! truncation, no operator linearization, just the full Hamiltonian in
//! the occupation basis with a cap on per-site occupation.  Feasible
//! sizes are tiny, but they are enough to see the Mott ground state,
//! the suppression of number fluctuations, and the resonant creation of
//! doublon-holon pairs when the tilt per site matches the interaction.
//!
//! The hopping is normalized by the maximum vertex degree of the finite
//! graph, so the coupling scale matches the quadratic theory on the
//! same geometry.  The tilt enters as an on-site potential decreasing
//! along the chain, the same orientation the quadratic modules use.

use crate::error::{Error, Result};
use crate::model::{Envelope, ModelParams, Protocol};
use crate::ode::{tridiag_eigen, C64, ZERO};
use serde::Serialize;
use std::collections::HashMap;

const MAX_SITES: usize = 10;
const MAX_DIM: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdGeometry {
    OpenChain,
    Ring,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EdConfig {
    pub sites: usize,
    /// Per-site occupation cutoff; at least 3 so that states beyond the
    /// doublon sector are represented.
    pub n_max: u8,
    pub geometry: EdGeometry,
}

/// Occupation-basis representation of the chain at unit filling.
#[derive(Debug)]
pub struct EdSystem {
    config: EdConfig,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// Interaction diagonal, (U/2) sum n(n-1).
    diag_u: Vec<f64>,
    /// Centered dipole diagonal, sum (x - center) n; the tilt couples to
    /// its negative.
    diag_x: Vec<f64>,
    /// Directed hop `(source state, target state, sqrt factor)`; scaled
    /// by -J/Z on application.
    hops: Vec<(usize, usize, f64)>,
    z: f64,
}

fn enumerate_basis(sites: usize, n_max: u8) -> Result<Vec<Vec<u8>>> {
    let mut basis = Vec::new();
    let mut occ = vec![0u8; sites];
    fn rec(
        basis: &mut Vec<Vec<u8>>,
        occ: &mut Vec<u8>,
        site: usize,
        remaining: u8,
        n_max: u8,
    ) -> Result<()> {
        if site + 1 == occ.len() {
            if remaining <= n_max {
                occ[site] = remaining;
                basis.push(occ.clone());
                if basis.len() > MAX_DIM {
                    return Err(Error::DimensionExceeded(format!(
                        "occupation basis exceeds {MAX_DIM} states"
                    )));
                }
            }
            return Ok(());
        }
        for n in 0..=remaining.min(n_max) {
            occ[site] = n;
            rec(basis, occ, site + 1, remaining - n, n_max)?;
        }
        Ok(())
    }
    rec(&mut basis, &mut occ, 0, sites as u8, n_max)?;
    Ok(basis)
}

impl EdSystem {
    pub fn new(params: &ModelParams, config: EdConfig) -> Result<Self> {
        if params.d != 1 {
            return Err(Error::PhysicsGuard(format!(
                "chains are one-dimensional, got d = {}",
                params.d
            )));
        }
        let min_sites = match config.geometry {
            EdGeometry::OpenChain => 2,
            EdGeometry::Ring => 3,
        };
        if config.sites < min_sites || config.sites > MAX_SITES {
            return Err(Error::DimensionExceeded(format!(
                "site count {} outside {min_sites}..={MAX_SITES}",
                config.sites
            )));
        }
        if config.n_max < 3 {
            return Err(Error::PhysicsGuard(
                "occupation cutoff below 3 truncates the doublon sector it is meant to check"
                    .into(),
            ));
        }
        if config.n_max > 8 {
            return Err(Error::DimensionExceeded(format!(
                "occupation cutoff {} above 8",
                config.n_max
            )));
        }

        let sites = config.sites;
        let basis = enumerate_basis(sites, config.n_max)?;
        let index: HashMap<Vec<u8>, usize> = basis
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.clone(), i))
            .collect();

        let mut bonds: Vec<(usize, usize)> = (0..sites - 1).map(|i| (i, i + 1)).collect();
        if config.geometry == EdGeometry::Ring {
            bonds.push((sites - 1, 0));
        }
        let mut degree = vec![0usize; sites];
        for &(a, b) in &bonds {
            degree[a] += 1;
            degree[b] += 1;
        }
        let z = degree.iter().copied().max().unwrap() as f64;

        let center = 0.5 * (sites as f64 - 1.0);
        let mut diag_u = Vec::with_capacity(basis.len());
        let mut diag_x = Vec::with_capacity(basis.len());
        let mut hops = Vec::new();
        let mut scratch = vec![0u8; sites];
        for (s, occ) in basis.iter().enumerate() {
            let mut eu = 0.0;
            let mut ex = 0.0;
            for (i, &n) in occ.iter().enumerate() {
                let n = n as f64;
                eu += 0.5 * params.u * n * (n - 1.0);
                ex += (i as f64 - center) * n;
            }
            diag_u.push(eu);
            diag_x.push(ex);
            scratch.copy_from_slice(occ);
            for &(a, b) in &bonds {
                for (from, to) in [(a, b), (b, a)] {
                    if scratch[from] == 0 || scratch[to] == config.n_max {
                        continue;
                    }
                    let factor =
                        ((scratch[from] as f64) * (scratch[to] as f64 + 1.0)).sqrt();
                    scratch[from] -= 1;
                    scratch[to] += 1;
                    let t = index[&scratch];
                    scratch[from] += 1;
                    scratch[to] -= 1;
                    hops.push((s, t, factor));
                }
            }
        }

        Ok(Self { config, basis, index, diag_u, diag_x, hops, z })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn config(&self) -> EdConfig {
        self.config
    }

    /// Hopping normalization, the maximum vertex degree.
    pub fn coordination(&self) -> f64 {
        self.z
    }

    pub fn state_index(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Apply the Hamiltonian with hopping `j` and tilt per site `grad`;
    /// the on-site potential is `-grad * (x - center)`.
    pub fn apply(&self, j: f64, grad: f64, psi: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        assert_eq!(psi.len(), dim);
        assert_eq!(out.len(), dim);
        for s in 0..dim {
            out[s] = (self.diag_u[s] - grad * self.diag_x[s]) * psi[s];
        }
        let scale = -j / self.z;
        for &(s, t, factor) in &self.hops {
            out[t] += scale * factor * psi[s];
        }
    }

    /// Lowest eigenpair at hopping `j` and zero tilt, by Lanczos with
    /// full reorthogonalization from a uniform start (which overlaps
    /// every occupation state, hence the ground state).
    pub fn ground_state(&self, j: f64) -> Result<(f64, Vec<C64>)> {
        let dim = self.dim();
        let v0: Vec<C64> = vec![C64::from(1.0 / (dim as f64).sqrt()); dim];
        let m_max = dim.min(180);
        let (alphas, betas, vectors) =
            lanczos(&|x, y| self.apply(j, 0.0, x, y), &v0, m_max);
        let m = alphas.len();
        let (vals, vecs) = tridiag_eigen(&alphas, &betas[..m - 1])?;
        let energy = vals[0];
        let mut state = vec![ZERO; dim];
        for (i, v) in vectors.iter().enumerate() {
            let w = vecs[0][i];
            for (s, c) in state.iter_mut().zip(v) {
                *s += w * c;
            }
        }
        let mut h_state = vec![ZERO; dim];
        self.apply(j, 0.0, &state, &mut h_state);
        let mut residual = 0.0f64;
        for (h, s) in h_state.iter().zip(&state) {
            residual += (h - energy * s).norm_sqr();
        }
        let scale = alphas.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
            + betas.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
            + 1.0;
        if residual.sqrt() > 1e-8 * scale {
            return Err(Error::NonConvergence(format!(
                "ground-state residual {:.3e} after {m} Lanczos steps",
                residual.sqrt()
            )));
        }
        Ok((energy, state))
    }

    /// Expectation values in `psi` under the couplings active at `t`.
    pub fn observables(&self, protocol: &Protocol, t: f64, psi: &[C64]) -> EdObservables {
        let dim = self.dim();
        let sites = self.config.sites;
        let norm_sqr: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let mut site_density = vec![0.0; sites];
        let mut holes = 0.0;
        let mut doubles = 0.0;
        let mut total = 0.0;
        for (occ, amp) in self.basis.iter().zip(psi) {
            let w = amp.norm_sqr();
            for (i, &n) in occ.iter().enumerate() {
                site_density[i] += w * n as f64;
                total += w * n as f64;
                if n == 0 {
                    holes += w;
                } else if n >= 2 {
                    doubles += w;
                }
            }
        }
        for d in &mut site_density {
            *d /= norm_sqr;
        }
        let holon_density = holes / (norm_sqr * sites as f64);
        let doublon_density = doubles / (norm_sqr * sites as f64);

        let mut h_psi = vec![ZERO; dim];
        self.apply(protocol.j_at(t), protocol.gradient_at(t), psi, &mut h_psi);
        let energy: f64 = psi
            .iter()
            .zip(&h_psi)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / norm_sqr;

        EdObservables {
            t,
            energy,
            norm: norm_sqr.sqrt(),
            total_occupation: total / norm_sqr,
            site_density,
            holon_density,
            doublon_density,
            defect_density: 0.5 * (holon_density + doublon_density),
        }
    }

    /// Propagate `psi` through the protocol with a Lanczos exponential
    /// per step, the Hamiltonian frozen at each step midpoint.  Sample
    /// times inside `(0, t_final]` are landed on exactly and reported.
    pub fn evolve(
        &self,
        protocol: &Protocol,
        psi0: &[C64],
        n_steps: usize,
        krylov_m: usize,
        samples: &[f64],
        on_sample: &mut impl FnMut(&EdObservables),
    ) -> Result<Vec<C64>> {
        if protocol.gradient_axis != 0 {
            return Err(Error::GaugeMismatch(format!(
                "chains only have axis 0, got tilt axis {}",
                protocol.gradient_axis
            )));
        }
        if self.config.geometry == EdGeometry::Ring && !protocol.gradient_envelope.is_zero() {
            return Err(Error::GaugeMismatch(
                "an on-site tilt cannot wind around a ring; use an open chain".into(),
            ));
        }
        if n_steps == 0 || krylov_m < 4 {
            return Err(Error::InvalidProtocol(
                "evolution needs n_steps >= 1 and a Krylov space of at least 4".into(),
            ));
        }
        let dim = self.dim();
        assert_eq!(psi0.len(), dim);

        let t_final = protocol.t_final;
        let mut events = protocol.breakpoints_within(0.0, t_final);
        let mut wanted: Vec<f64> = samples
            .iter()
            .copied()
            .filter(|&s| s > 0.0 && s <= t_final)
            .collect();
        wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        wanted.dedup();
        events.extend(wanted.iter().copied());
        events.push(t_final);
        events.sort_by(|a, b| a.partial_cmp(b).unwrap());
        events.dedup();
        let mut next = wanted.into_iter().peekable();

        let h_target = t_final / n_steps as f64;
        let m = krylov_m.min(dim);
        let mut psi = psi0.to_vec();
        let mut t = 0.0;
        for &event in &events {
            let span = event - t;
            if span > 0.0 {
                let n_sub = (span / h_target).ceil().max(1.0) as usize;
                let h = span / n_sub as f64;
                for i in 0..n_sub {
                    let mid = t + (i as f64 + 0.5) * h;
                    let j = protocol.j_at(mid);
                    let grad = protocol.gradient_at(mid);
                    krylov_exp_step(
                        &|x, y| self.apply(j, grad, x, y),
                        &mut psi,
                        h,
                        m,
                    )?;
                }
            }
            t = event;
            while let Some(&s) = next.peek() {
                if s < t {
                    next.next();
                } else if s == t {
                    next.next();
                    on_sample(&self.observables(protocol, t, &psi));
                } else {
                    break;
                }
            }
        }

        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let norm0: f64 = psi0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - norm0).abs() > 1e-6 * norm0.max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "norm drifted from {norm0:.12} to {norm:.12}"
            )));
        }
        Ok(psi)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdObservables {
    pub t: f64,
    pub energy: f64,
    pub norm: f64,
    pub total_occupation: f64,
    pub site_density: Vec<f64>,
    /// Fraction of sites with no particle.
    pub holon_density: f64,
    /// Fraction of sites with two or more.
    pub doublon_density: f64,
    /// Mean of the two: the pair density analogue.
    pub defect_density: f64,
}

/// Lanczos tridiagonalization with full reorthogonalization.  Stops at
/// `m_max` vectors or when the residual norm underflows (invariant
/// subspace).  Returns the diagonal, the subdiagonal (one shorter), and
/// the orthonormal basis.
fn lanczos(
    apply: &impl Fn(&[C64], &mut [C64]),
    v0: &[C64],
    m_max: usize,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<C64>>) {
    let dim = v0.len();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut vectors: Vec<Vec<C64>> = Vec::new();
    let norm0: f64 = v0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut v: Vec<C64> = v0.iter().map(|c| c / norm0).collect();
    let mut w = vec![ZERO; dim];

    for step in 0..m_max {
        apply(&v, &mut w);
        let alpha: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        alphas.push(alpha);
        vectors.push(v.clone());
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= alpha * vi;
        }
        if step > 0 {
            let beta_prev = betas[step - 1];
            for (wi, ui) in w.iter_mut().zip(&vectors[step - 1]) {
                *wi -= beta_prev * ui;
            }
        }
        // Full reorthogonalization, twice for good measure.
        for _ in 0..2 {
            for u in &vectors {
                let overlap: C64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= overlap * ui;
                }
            }
        }
        let beta: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let scale = alphas.iter().fold(0.0f64, |a, &b| a.max(b.abs())) + 1.0;
        if step + 1 == m_max || beta < 1e-13 * scale {
            break;
        }
        betas.push(beta);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / beta;
        }
    }
    (alphas, betas, vectors)
}

/// One step of `psi -> exp(-i h H) psi` in a Krylov space of dimension
/// at most `m`.
fn krylov_exp_step(
    apply: &impl Fn(&[C64], &mut [C64]),
    psi: &mut [C64],
    h: f64,
    m: usize,
) -> Result<()> {
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(());
    }
    let (alphas, betas, vectors) = lanczos(apply, psi, m);
    let k = alphas.len();
    let (vals, vecs) = tridiag_eigen(&alphas, &betas[..k - 1])?;
    // exp(-i h T) e1, assembled from the spectral decomposition.
    let mut y = vec![ZERO; k];
    for (val, vec) in vals.iter().zip(&vecs) {
        let phase = C64::from_polar(1.0, -h * val);
        let w = phase * vec[0];
        for (yi, &zi) in y.iter_mut().zip(vec.iter()) {
            *yi += w * zi;
        }
    }
    for p in psi.iter_mut() {
        *p = ZERO;
    }
    for (yi, v) in y.iter().zip(&vectors) {
        let c = norm * yi;
        for (p, vi) in psi.iter_mut().zip(v) {
            *p += c * vi;
        }
    }
    Ok(())
}

/// Outcome of pulsing a tilt onto the interacting ground state.
#[derive(Debug, Clone, Serialize)]
pub struct TiltResponse {
    pub delta_v: f64,
    pub ground_energy: f64,
    pub initial_defect: f64,
    pub final_defect: f64,
    /// Pair density created by the pulse.
    pub excess_defect: f64,
}

/// Prepare the ground state at hopping `J`, switch a tilt of `delta_v`
/// per site on, hold, and report the defect density created.
///
/// `ramp = 0` means a sudden switch-on held for the whole window; this
/// is the clean setting for resonance comparisons, since a smooth ramp
/// to any amplitude above the resonance must sweep through it on the
/// way up and again on the way down, creating pairs at every crossing.
pub fn tilt_response(
    params: &ModelParams,
    config: EdConfig,
    delta_v: f64,
    ramp: f64,
    hold: f64,
    n_steps: usize,
    krylov_m: usize,
) -> Result<TiltResponse> {
    if delta_v < 0.0 || !delta_v.is_finite() {
        return Err(Error::InvalidProtocol(format!(
            "tilt per site must be finite and nonnegative, got {delta_v}"
        )));
    }
    let system = EdSystem::new(params, config)?;
    let gradient = if delta_v == 0.0 {
        Envelope::Zero
    } else if ramp == 0.0 {
        Envelope::Constant(delta_v)
    } else {
        Envelope::pulse(0.0, ramp, hold, ramp, delta_v)?
    };
    let t_final = 2.0 * ramp + hold;
    let protocol = Protocol::new(Envelope::Constant(params.j), gradient, 0, t_final)?;

    let (ground_energy, psi0) = system.ground_state(params.j)?;
    let initial = system.observables(&protocol, 0.0, &psi0);
    let psi = system.evolve(&protocol, &psi0, n_steps, krylov_m, &[], &mut |_| {})?;
    let fin = system.observables(&protocol, t_final, &psi);
    Ok(TiltResponse {
        delta_v,
        ground_energy,
        initial_defect: initial.defect_density,
        final_defect: fin.defect_density,
        excess_defect: fin.defect_density - initial.defect_density,
    })
}
