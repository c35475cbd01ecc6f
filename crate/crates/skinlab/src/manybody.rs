//! Fixed particle-number sector: occupation basis, second-quantized
//! operators, the sector master equation, quantum-jump trajectories and the
//! density imbalance.
//!
//! Sites are 1..L in physical labels and bit `i` of an occupation mask is
//! site `i + 1`. The domain wall |0…01…1⟩ fills the last N sites.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionResult, Method};
use crate::error::{Error, Result};
use crate::io::{write_csv, Cell};
use crate::linalg::krylov::{arnoldi_rightmost, ArnoldiOptions};
use crate::linalg::ode::{self, OdeOptions};
use crate::linalg::{trace_norm_hermitian, Csr, I, ONE, ZERO};
use crate::model::{self, binomial, Basis, ModelSpec};
use crate::superop::{self, Lindbladian, LiouvillianSpectrum, Precision};

/// Largest sector dimension diagonalized densely (L = 8 half filling).
pub const SECTOR_DENSE_CAP: usize = 100;
/// Largest sector assembled at all.
pub const SECTOR_SPARSE_CAP: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub l: usize,
    pub n: usize,
    /// Occupation bitmasks, ascending.
    pub states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        if l == 0 || l > 63 || n > l {
            return Err(Error::InvalidModel(format!(
                "no sector with L = {l}, N = {n}"
            )));
        }
        let dim = binomial(l, n);
        if dim > SECTOR_SPARSE_CAP {
            return Err(Error::DimensionCap {
                dim,
                cap: SECTOR_SPARSE_CAP,
            });
        }
        let mut states = Vec::with_capacity(dim);
        if n == 0 {
            states.push(0);
        } else {
            // Gosper's hack enumerates equal-popcount masks in ascending order.
            let mut s: u64 = (1u64 << n) - 1;
            let limit = 1u64 << l;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(SectorBasis {
            l,
            n,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn domain_wall(&self) -> u64 {
        ((1u64 << self.n) - 1) << (self.l - self.n)
    }

    /// Mask with the given 1-based sites occupied.
    pub fn mask_of_sites(&self, sites: &[usize]) -> Result<u64> {
        let mut m = 0u64;
        for &s in sites {
            if s == 0 || s > self.l || m & (1 << (s - 1)) != 0 {
                return Err(Error::InvalidState(format!("bad site list {sites:?}")));
            }
            m |= 1 << (s - 1);
        }
        if m.count_ones() as usize != self.n {
            return Err(Error::InvalidState(format!(
                "{} sites given for N = {}",
                sites.len(),
                self.n
            )));
        }
        Ok(m)
    }

    pub fn basis_vector(&self, state: u64) -> Result<Vec<C64>> {
        let i = self
            .index_of(state)
            .ok_or_else(|| Error::InvalidState(format!("mask {state:#b} not in sector")))?;
        let mut v = vec![ZERO; self.dim()];
        v[i] = ONE;
        Ok(v)
    }
}

/// c†_i c_j |s⟩ for 0-based sites, with Jordan–Wigner signs counted over
/// the occupied sites below each operator. `None` if it annihilates.
pub fn hop(state: u64, i: usize, j: usize) -> Option<(u64, f64)> {
    if state & (1 << j) == 0 {
        return None;
    }
    let below = |s: u64, k: usize| (s & ((1u64 << k) - 1)).count_ones();
    let s1 = state ^ (1 << j);
    if s1 & (1 << i) != 0 {
        return None;
    }
    let parity = below(state, j) + below(s1, i);
    Some((s1 | (1 << i), if parity % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Σ_ij h_ij c†_i c_j restricted to the sector.
pub fn one_body(basis: &SectorBasis, h: ArrayView2<C64>) -> Csr {
    let l = basis.l;
    let mut t = Vec::new();
    for (col, &s) in basis.states.iter().enumerate() {
        for i in 0..l {
            for j in 0..l {
                let v = h[[i, j]];
                if v == ZERO {
                    continue;
                }
                if let Some((s2, sign)) = hop(s, i, j) {
                    let row = basis.index_of(s2).expect("number conserving");
                    t.push((row, col, v * sign));
                }
            }
        }
    }
    Csr::from_triplets(basis.dim(), basis.dim(), t)
}

/// Diagonal operator Π n_{sites}.
pub fn density_product(basis: &SectorBasis, sites: &[usize]) -> Csr {
    let mask: u64 = sites.iter().map(|&s| 1u64 << s).sum();
    let t = basis
        .states
        .iter()
        .enumerate()
        .filter(|(_, &s)| s & mask == mask)
        .map(|(i, _)| (i, i, ONE))
        .collect();
    Csr::from_triplets(basis.dim(), basis.dim(), t)
}

#[derive(Debug, Clone)]
pub struct SectorOperators {
    pub spec: ModelSpec,
    pub basis: SectorBasis,
    pub h: Csr,
    pub jumps: Vec<Csr>,
    pub h_eff: Csr,
}

/// Many-body H and jump operators. With feedback each bond carries
/// L = ½(n_a − n_b) + (i/2)(c†_a c_b + c†_b c_a) − n_a n_b; without it the
/// quadratic projector ½(n_a + n_b) + (i/2)(c†_a c_b − c†_b c_a).
pub fn build_sector_operators(spec: &ModelSpec, n: usize) -> Result<SectorOperators> {
    spec.validate()?;
    if n == 0 || n >= spec.l {
        return Err(Error::InvalidModel(format!(
            "need 0 < N < L, got N = {n}, L = {}",
            spec.l
        )));
    }
    let basis = SectorBasis::new(spec.l, n)?;
    let h = one_body(&basis, model::build_hamiltonian(spec)?.entries.view());
    let singles = model::build_jump_operators(spec)?;
    let jumps: Vec<Csr> = spec
        .bonds()
        .into_iter()
        .zip(&singles)
        .map(|((a, b), op)| {
            let q = one_body(&basis, op.entries.view());
            if spec.feedback {
                q.add_scaled(-ONE, &density_product(&basis, &[a, b]))
            } else {
                q
            }
        })
        .collect();
    let mut h_eff = h.clone();
    for j in &jumps {
        h_eff = h_eff.add_scaled(-I * (spec.gamma / 2.0), &j.adjoint().matmul(j));
    }
    Ok(SectorOperators {
        spec: *spec,
        basis,
        h,
        jumps,
        h_eff,
    })
}

impl SectorOperators {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn lindbladian(&self) -> Lindbladian {
        Lindbladian::new(
            Basis::Sector {
                l: self.basis.l,
                n: self.basis.n,
            },
            self.h_eff.clone(),
            self.jumps.clone(),
            self.spec.gamma,
        )
    }

    /// ⟨n_i⟩ for i = 1..L from a sector density matrix.
    pub fn densities(&self, rho: ArrayView2<C64>) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.l];
        for (k, &s) in self.basis.states.iter().enumerate() {
            let p = rho[[k, k]].re;
            for (i, o) in out.iter_mut().enumerate() {
                if s & (1 << i) != 0 {
                    *o += p;
                }
            }
        }
        out
    }

    pub fn densities_of_state(&self, psi: &[C64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.l];
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        for (k, &s) in self.basis.states.iter().enumerate() {
            let p = psi[k].norm_sqr() / norm;
            for (i, o) in out.iter_mut().enumerate() {
                if s & (1 << i) != 0 {
                    *o += p;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Dense,
    /// Restarted Arnoldi for the `nev` rightmost nonzero eigenvalues.
    Krylov {
        nev: usize,
    },
}

fn traceless_projector(d: usize) -> impl Fn(&mut [C64]) {
    move |x: &mut [C64]| {
        let tr: C64 = (0..d).map(|i| x[i * d + i]).sum::<C64>() / d as f64;
        for i in 0..d {
            x[i * d + i] -= tr;
        }
    }
}

fn random_hermitian(d: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![ZERO; d * d];
    for i in 0..d {
        a[i * d + i] = C64::new(rng.random::<f64>() - 0.5, 0.0);
        for j in i + 1..d {
            let z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            a[i * d + j] = z;
            a[j * d + i] = z.conj();
        }
    }
    a
}

fn krylov_apply(lv: &Lindbladian) -> impl Fn(&[C64], &mut [C64]) + '_ {
    let d = lv.dim;
    move |x: &[C64], y: &mut [C64]| {
        let rho = ArrayView2::from_shape((d, d), x).expect("d²");
        let mut out = Array2::zeros((d, d));
        lv.apply_into(rho, &mut out);
        y.copy_from_slice(out.as_slice().expect("contiguous"));
    }
}

/// Sector spectrum: complete (dense) or the rightmost part (Krylov). The
/// Krylov route works on traceless matrices, which the generator preserves,
/// so the trace-carrying steady state is deflated exactly; it is then
/// reported as one zero eigenvalue ahead of the computed ones.
pub fn manybody_spectrum(
    spec: &ModelSpec,
    n: usize,
    solver: Solver,
) -> Result<LiouvillianSpectrum> {
    let ops = build_sector_operators(spec, n)?;
    let d = ops.dim();
    let lv = ops.lindbladian();
    match solver {
        Solver::Dense => {
            if d > SECTOR_DENSE_CAP {
                return Err(Error::DimensionCap {
                    dim: d,
                    cap: SECTOR_DENSE_CAP,
                });
            }
            superop::spectrum_eigenvalues(&lv, Precision::Double)
        }
        Solver::Krylov { nev } => {
            let opts = ArnoldiOptions {
                nev,
                ncv: (3 * nev + 20).max(30),
                tol: 1e-10,
                ..Default::default()
            };
            let start = random_hermitian(d, 0x5eed);
            let r = arnoldi_rightmost(
                d * d,
                krylov_apply(&lv),
                traceless_projector(d),
                &start,
                &opts,
            )?;
            let mut eigs = vec![ZERO];
            eigs.extend(r.values);
            Ok(superop::partial_spectrum(d, &eigs, 1e-8))
        }
    }
}

/// Steady state of the sector master equation from the rightmost Krylov
/// eigenvector, trace-normalized and Hermitized.
pub fn sector_steady_state(ops: &SectorOperators) -> Result<Array2<C64>> {
    let d = ops.dim();
    let lv = ops.lindbladian();
    let mut start = random_hermitian(d, 0xface);
    for i in 0..d {
        start[i * d + i] += C64::new(1.0, 0.0);
    }
    let opts = ArnoldiOptions {
        nev: 1,
        ncv: 30,
        tol: 1e-11,
        ..Default::default()
    };
    let r = arnoldi_rightmost(d * d, krylov_apply(&lv), |_| {}, &start, &opts)?;
    if r.values[0].norm() > 1e-8 {
        return Err(Error::Linalg(format!(
            "rightmost eigenvalue {} is not zero",
            r.values[0]
        )));
    }
    let x = Array2::from_shape_vec((d, d), r.vectors[0].clone()).expect("d²");
    let tr: C64 = x.diag().sum();
    let x = x.mapv(|z| z / tr);
    Ok((&x + &x.t().mapv(|z| z.conj())).mapv(|z| z * 0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorEvolution {
    pub times: Vec<f64>,
    /// ⟨n_i(t)⟩, i = 1..L.
    pub densities: Vec<Vec<f64>>,
    /// Trace distance to the reference, when one was given.
    pub distances: Option<Vec<f64>>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

/// Master-equation evolution in the sector with the adaptive integrator.
pub fn evolve_sector(
    ops: &SectorOperators,
    rho0: ArrayView2<C64>,
    times: &[f64],
    ode_opts: OdeOptions,
    reference: Option<ArrayView2<C64>>,
) -> Result<SectorEvolution> {
    let d = ops.dim();
    if rho0.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.nrows(),
        });
    }
    let lv = ops.lindbladian();
    let y0: Vec<C64> = rho0.iter().copied().collect();
    let mut out = Array2::<C64>::zeros((d, d));
    let mut densities = Vec::with_capacity(times.len());
    let mut distances = reference.map(|_| Vec::with_capacity(times.len()));
    let mut max_trace_error = 0.0f64;
    let mut max_herm = 0.0f64;
    let mut err = None;
    ode::integrate(
        |_, y, dy| {
            lv.apply_into(ArrayView2::from_shape((d, d), y).expect("d²"), &mut out);
            dy.copy_from_slice(out.as_slice().expect("contiguous"));
        },
        0.0,
        &y0,
        times,
        ode_opts,
        |_, _, y| {
            let rho = ArrayView2::from_shape((d, d), y).expect("d²");
            let tr: C64 = rho.diag().sum();
            max_trace_error = max_trace_error.max((tr - ONE).norm());
            for i in 0..d {
                for j in 0..i {
                    max_herm = max_herm.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
                }
            }
            densities.push(ops.densities(rho));
            if let (Some(r), Some(ds)) = (reference, distances.as_mut()) {
                match trace_norm_hermitian((&rho - &r).view()) {
                    Ok(x) => ds.push(x),
                    Err(e) => err = Some(e),
                }
            }
        },
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SectorEvolution {
        times: times.to_vec(),
        densities,
        distances,
        max_trace_error,
        max_hermiticity_error: max_herm,
    })
}

/// Default horizon for [`sector_relaxation`]: enough for a decay by e⁻⁸
/// after a transit time of order L.
pub fn default_sector_t_max(gap: f64, l: usize) -> f64 {
    let a = if gap > 0.0 { 8.0 / gap } else { 0.0 };
    a + 4.0 * l as f64
}

/// Relaxation from the domain wall towards the sector steady state, in the
/// single-particle result format so that [`relaxation_time`] applies.
///
/// [`relaxation_time`]: crate::dynamics::relaxation_time
pub fn sector_relaxation(
    spec: &ModelSpec,
    n: usize,
    times: &[f64],
    ode_opts: OdeOptions,
) -> Result<EvolutionResult> {
    let ops = build_sector_operators(spec, n)?;
    let rho_ss = sector_steady_state(&ops)?;
    let d = ops.dim();
    let dw = ops
        .basis
        .index_of(ops.basis.domain_wall())
        .expect("domain wall lies in the sector");
    let mut rho0 = Array2::<C64>::zeros((d, d));
    rho0[[dw, dw]] = ONE;
    let ev = evolve_sector(&ops, rho0.view(), times, ode_opts, Some(rho_ss.view()))?;
    Ok(EvolutionResult {
        times: ev.times,
        distances: ev.distances.expect("reference was given"),
        observables: ev.densities,
        method: Method::Integrator,
        max_trace_error: ev.max_trace_error,
        max_hermiticity_error: ev.max_hermiticity_error,
        ill_conditioned: false,
    })
}

// ---------------------------------------------------------------------------
// Quantum-jump trajectories

/// One unravelled state: no-jump propagation with H_eff, norm tracking and
/// jumps. Jump weights are ‖L_μψ‖²/‖ψ‖² without the γ factor.
trait Unraveling: Clone {
    fn step(&mut self, dt: f64);
    fn norm_sqr(&self) -> f64;
    fn jump_weights(&self, w: &mut [f64]);
    fn jump(&mut self, mu: usize);
    fn densities(&self, out: &mut [f64]);
}

#[derive(Clone)]
struct StateVector<'a> {
    ops: &'a SectorOperators,
    psi: Vec<C64>,
}

impl StateVector<'_> {
    fn deriv(&self, x: &[C64], out: &mut [C64]) {
        self.ops.h_eff.matvec(x, out);
        out.iter_mut().for_each(|z| *z *= -I);
    }
}

impl Unraveling for StateVector<'_> {
    fn step(&mut self, dt: f64) {
        let n = self.psi.len();
        let (mut k, mut acc, mut tmp) = (vec![ZERO; n], self.psi.clone(), vec![ZERO; n]);
        let w = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        let c = [0.5, 0.5, 1.0];
        self.deriv(&self.psi, &mut k);
        for s in 0..4 {
            acc.iter_mut()
                .zip(&k)
                .for_each(|(a, b)| *a += b * (w[s] * dt));
            if s < 3 {
                tmp.iter_mut()
                    .zip(self.psi.iter().zip(&k))
                    .for_each(|(t, (p, b))| *t = p + b * (c[s] * dt));
                self.deriv(&tmp, &mut k);
            }
        }
        self.psi = acc;
    }

    fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }

    fn jump_weights(&self, w: &mut [f64]) {
        let n = self.norm_sqr();
        let mut y = vec![ZERO; self.psi.len()];
        for (wi, j) in w.iter_mut().zip(&self.ops.jumps) {
            j.matvec(&self.psi, &mut y);
            *wi = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        }
    }

    fn jump(&mut self, mu: usize) {
        let mut y = vec![ZERO; self.psi.len()];
        self.ops.jumps[mu].matvec(&self.psi, &mut y);
        let n = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        self.psi = y.into_iter().map(|z| z / n).collect();
    }

    fn densities(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.ops.densities_of_state(&self.psi));
    }
}

/// Single-particle data for Slater-determinant trajectories. Both jump
/// operators have the form Γ(u)·c_v†c_v with v = (|a⟩ − i|b⟩)/√2 on the bond
/// (a, b): u = 1 without feedback, and with feedback u = (−1)^{n_b}, the
/// second quantization of diag(1, −1) on the bond. On the two-site Fock
/// space this reproduces ½(n_a − n_b) + (i/2)(c†_a c_b + h.c.) − n_a n_b,
/// so jumps keep Slater determinants Slater determinants.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub l: usize,
    pub n: usize,
    pub h_eff: Csr,
    pub bonds: Vec<(usize, usize)>,
    pub feedback: bool,
}

impl GaussianModel {
    pub fn new(spec: &ModelSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n == 0 || n >= spec.l {
            return Err(Error::InvalidModel(format!(
                "need 0 < N < L, got N = {n}, L = {}",
                spec.l
            )));
        }
        let h = model::build_effective_hamiltonian(spec)?;
        Ok(GaussianModel {
            l: spec.l,
            n,
            h_eff: Csr::from_dense(h.entries.view()),
            bonds: spec.bonds(),
            feedback: spec.feedback,
        })
    }
}

const V_A: C64 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
const V_B: C64 = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);

/// Orbitals Φ (L × N, orthonormal after every step) and ln of the
/// accumulated norm² of the unnormalized many-body state.
#[derive(Clone)]
struct Slater<'a> {
    g: &'a GaussianModel,
    phi: Array2<C64>,
    log_norm: f64,
}

impl Slater<'_> {
    /// Modified Gram–Schmidt; returns ln Π|R_kk|².
    fn orthonormalize(phi: &mut Array2<C64>) -> f64 {
        let (l, n) = phi.dim();
        let mut logdet = 0.0;
        for k in 0..n {
            for p in 0..k {
                let c: C64 = (0..l).map(|i| phi[[i, p]].conj() * phi[[i, k]]).sum();
                for i in 0..l {
                    let v = phi[[i, p]];
                    phi[[i, k]] -= c * v;
                }
            }
            let nk = (0..l).map(|i| phi[[i, k]].norm_sqr()).sum::<f64>().sqrt();
            logdet += 2.0 * nk.ln();
            for i in 0..l {
                phi[[i, k]] /= nk;
            }
        }
        logdet
    }

    fn deriv(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros(x.dim());
        self.g.h_eff.mul_dense_acc(-I, x.view(), out.view_mut());
        out
    }
}

impl Unraveling for Slater<'_> {
    fn step(&mut self, dt: f64) {
        let k1 = self.deriv(&self.phi);
        let k2 = self.deriv(&(&self.phi + &(&k1 * C64::new(0.5 * dt, 0.0))));
        let k3 = self.deriv(&(&self.phi + &(&k2 * C64::new(0.5 * dt, 0.0))));
        let k4 = self.deriv(&(&self.phi + &(&k3 * C64::new(dt, 0.0))));
        let inc = (&k1 + &(&k2 * C64::new(2.0, 0.0)) + &(&k3 * C64::new(2.0, 0.0)) + &k4)
            * C64::new(dt / 6.0, 0.0);
        self.phi += &inc;
        self.log_norm += Self::orthonormalize(&mut self.phi);
    }

    fn norm_sqr(&self) -> f64 {
        self.log_norm.exp()
    }

    fn jump_weights(&self, w: &mut [f64]) {
        for (wi, &(a, b)) in w.iter_mut().zip(&self.g.bonds) {
            *wi = (0..self.g.n)
                .map(|k| (self.phi[[a, k]].conj() * V_A + self.phi[[b, k]].conj() * V_B).norm_sqr())
                .sum();
        }
    }

    fn jump(&mut self, mu: usize) {
        let (a, b) = self.g.bonds[mu];
        let (l, n) = self.phi.dim();
        // a_k = ⟨φ_k|v⟩; the occupied space orthogonal to v is Φ·H[:, 1..]
        // with H the Householder reflection taking â to a multiple of e₁.
        let av: Vec<C64> = (0..n)
            .map(|k| self.phi[[a, k]].conj() * V_A + self.phi[[b, k]].conj() * V_B)
            .collect();
        let na = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ah: Vec<C64> = av.iter().map(|z| z / na).collect();
        let alpha = if ah[0].norm() > 0.0 {
            -ah[0] / ah[0].norm()
        } else {
            -ONE
        };
        let mut u = ah.clone();
        u[0] -= alpha;
        let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let mut next = Array2::<C64>::zeros((l, n));
        next[[a, 0]] = V_A;
        next[[b, 0]] = V_B;
        for c in 1..n {
            // Column c of H = I − 2uu†/(u†u).
            let hc: Vec<C64> = (0..n)
                .map(|r| (if r == c { ONE } else { ZERO }) - u[r] * u[c].conj() * (2.0 / uu))
                .collect();
            for i in 0..l {
                next[[i, c]] = (0..n).map(|r| self.phi[[i, r]] * hc[r]).sum();
            }
        }
        if self.g.feedback {
            for c in 0..n {
                next[[b, c]] = -next[[b, c]];
            }
        }
        Self::orthonormalize(&mut next);
        self.phi = next;
        self.log_norm = 0.0;
    }

    fn densities(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.g.n).map(|k| self.phi[[i, k]].norm_sqr()).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Full sector state vector.
    StateVector,
    /// Slater determinant of N orbitals; exact for both models, reaches L ~ 30.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ManyBodyInit {
    DomainWall,
    /// 1-based occupied sites.
    Sites(Vec<usize>),
    /// Sector amplitudes (state-vector backend only).
    Vector(Vec<C64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryOptions {
    pub t_max: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub base_seed: u64,
    /// Sampling interval, rounded to a whole number of steps.
    pub sample_dt: f64,
    pub backend: Backend,
    pub init: ManyBodyInit,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            t_max: 10.0,
            dt: 0.01,
            n_traj: 100,
            base_seed: 0,
            sample_dt: 0.5,
            backend: Backend::StateVector,
            init: ManyBodyInit::DomainWall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JumpStats {
    pub mean: f64,
    pub std: f64,
    pub min: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub backend: Backend,
    pub times: Vec<f64>,
    /// Mean ⟨n_i⟩ per sample time.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub jump_counts: JumpStats,
    /// Largest per-step jump probability γ Σ⟨L†L⟩ dt seen in any trajectory.
    pub max_step_jump_probability: f64,
    pub warnings: Vec<String>,
}

impl TrajectoryEnsemble {
    pub fn imbalance(&self) -> ImbalanceSeries {
        imbalance(&self.times, &self.mean)
    }
}

/// Seed of trajectory `i`: ChaCha8 keyed by `base_seed`, stream `i`. Any
/// trajectory can be regenerated alone, in any order.
pub fn trajectory_rng(base_seed: u64, i: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base_seed);
    r.set_stream(i);
    r
}

struct Acc {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    jumps: f64,
    jumps_sq: f64,
    jmin: u64,
    jmax: u64,
    pmax: f64,
}

impl Acc {
    fn merge(mut self, o: Acc) -> Acc {
        self.sum.iter_mut().zip(&o.sum).for_each(|(a, b)| *a += b);
        self.sumsq
            .iter_mut()
            .zip(&o.sumsq)
            .for_each(|(a, b)| *a += b);
        self.jumps += o.jumps;
        self.jumps_sq += o.jumps_sq;
        self.jmin = self.jmin.min(o.jmin);
        self.jmax = self.jmax.max(o.jmax);
        self.pmax = self.pmax.max(o.pmax);
        self
    }
}

/// Fixed binary tree over trajectory indices: the floating-point sums do
/// not depend on thread scheduling.
fn pairwise<F: Fn(usize) -> Acc + Sync>(lo: usize, hi: usize, f: &F) -> Acc {
    if hi - lo == 1 {
        return f(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(|| pairwise(lo, mid, f), || pairwise(mid, hi, f));
    a.merge(b)
}

/// Advances `st` by `dt`, jumping whenever ‖ψ‖² falls below the current
/// threshold. The crossing time inside a step is located by regula falsi on
/// ln‖ψ‖².
fn advance<U: Unraveling>(
    st: &mut U,
    dt: f64,
    thr: &mut f64,
    rng: &mut ChaCha8Rng,
    w: &mut [f64],
    jumps: &mut u64,
) {
    let mut remaining = dt;
    loop {
        let prev = st.clone();
        st.step(remaining);
        if st.norm_sqr() >= *thr {
            return;
        }
        let target = thr.ln();
        let (mut lo, mut flo) = (0.0, prev.norm_sqr().ln() - target);
        let (mut hi, mut fhi) = (remaining, st.norm_sqr().ln() - target);
        let mut cand = prev.clone();
        let mut side = 0i32;
        for _ in 0..60 {
            let tau = if fhi != flo {
                lo - flo * (hi - lo) / (fhi - flo)
            } else {
                0.5 * (lo + hi)
            };
            let tau = tau.clamp(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
            cand = prev.clone();
            cand.step(tau);
            let f = cand.norm_sqr().ln() - target;
            if f.abs() < 1e-12 || hi - lo < 1e-13 {
                hi = tau;
                break;
            }
            if f > 0.0 {
                lo = tau;
                flo = f;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = tau;
                fhi = f;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
        }
        *st = cand;
        st.jump_weights(w);
        let total: f64 = w.iter().sum();
        let x = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut mu = w.len() - 1;
        for (k, &wk) in w.iter().enumerate() {
            acc += wk;
            if x < acc {
                mu = k;
                break;
            }
        }
        st.jump(mu);
        *jumps += 1;
        *thr = rng.random::<f64>();
        remaining -= hi;
        if remaining <= 1e-14 {
            return;
        }
    }
}

fn run_one<U: Unraveling>(
    mut st: U,
    l: usize,
    gamma: f64,
    n_jump_ops: usize,
    dt: f64,
    n_steps: usize,
    every: usize,
    mut rng: ChaCha8Rng,
) -> Acc {
    let n_samples = n_steps / every + 1;
    let mut sum = vec![0.0; n_samples * l];
    let mut sumsq = vec![0.0; n_samples * l];
    let mut dens = vec![0.0; l];
    let mut w = vec![0.0; n_jump_ops];
    let mut jumps = 0u64;
    let mut pmax = 0.0f64;
    let mut thr = rng.random::<f64>();
    let mut record = |k: usize, st: &U, sum: &mut [f64], sumsq: &mut [f64]| {
        st.densities(&mut dens);
        for i in 0..l {
            sum[k * l + i] = dens[i];
            sumsq[k * l + i] = dens[i] * dens[i];
        }
    };
    record(0, &st, &mut sum, &mut sumsq);
    for s in 1..=n_steps {
        if gamma > 0.0 {
            st.jump_weights(&mut w);
            pmax = pmax.max(gamma * w.iter().sum::<f64>() * dt);
            advance(&mut st, dt, &mut thr, &mut rng, &mut w, &mut jumps);
        } else {
            st.step(dt);
        }
        if s % every == 0 {
            record(s / every, &st, &mut sum, &mut sumsq);
        }
    }
    let j = jumps as f64;
    Acc {
        sum,
        sumsq,
        jumps: j,
        jumps_sq: j * j,
        jmin: jumps,
        jmax: jumps,
        pmax,
    }
}

/// Quantum-jump ensemble with the waiting-time algorithm: ‖ψ‖² decays under
/// H_eff until it drops below a uniform random threshold, then jump μ fires
/// with probability ∝ ‖L_μψ‖² and a fresh threshold is drawn.
pub fn run_trajectories(
    spec: &ModelSpec,
    n: usize,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryEnsemble> {
    if opts.n_traj == 0 || !(opts.dt > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::InvalidState(
            "need nTraj ≥ 1, dt > 0, tMax ≥ 0".into(),
        ));
    }
    let every = ((opts.sample_dt / opts.dt).round() as usize).max(1);
    let n_steps = ((opts.t_max / opts.dt).round() as usize / every) * every;
    let l = spec.l;
    let gamma = spec.gamma;
    let acc = match opts.backend {
        Backend::StateVector => {
            let ops = build_sector_operators(spec, n)?;
            let psi = match &opts.init {
                ManyBodyInit::DomainWall => ops.basis.basis_vector(ops.basis.domain_wall())?,
                ManyBodyInit::Sites(s) => ops.basis.basis_vector(ops.basis.mask_of_sites(s)?)?,
                ManyBodyInit::Vector(v) => {
                    if v.len() != ops.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: ops.dim(),
                            got: v.len(),
                        });
                    }
                    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if (nv - 1.0).abs() > 1e-10 {
                        return Err(Error::InvalidState(format!("initial state has norm {nv}")));
                    }
                    v.clone()
                }
            };
            let st = StateVector { ops: &ops, psi };
            let nj = ops.jumps.len();
            pairwise(0, opts.n_traj, &|i| {
                run_one(
                    st.clone(),
                    l,
                    gamma,
                    nj,
                    opts.dt,
                    n_steps,
                    every,
                    trajectory_rng(opts.base_seed, i as u64),
                )
            })
        }
        Backend::Gaussian => {
            let g = GaussianModel::new(spec, n)?;
            let sites: Vec<usize> = match &opts.init {
                ManyBodyInit::DomainWall => (l - n + 1..=l).collect(),
                ManyBodyInit::Sites(s) => s.clone(),
                ManyBodyInit::Vector(_) => {
                    return Err(Error::InvalidState(
                        "a Slater determinant needs an occupation list".into(),
                    ))
                }
            };
            let basis_check = SectorBasis {
                l,
                n,
                states: Vec::new(),
                index: HashMap::new(),
            };
            basis_check.mask_of_sites(&sites)?;
            let mut phi = Array2::<C64>::zeros((l, n));
            for (k, &s) in sites.iter().enumerate() {
                phi[[s - 1, k]] = ONE;
            }
            let st = Slater {
                g: &g,
                phi,
                log_norm: 0.0,
            };
            let nj = g.bonds.len();
            pairwise(0, opts.n_traj, &|i| {
                run_one(
                    st.clone(),
                    l,
                    gamma,
                    nj,
                    opts.dt,
                    n_steps,
                    every,
                    trajectory_rng(opts.base_seed, i as u64),
                )
            })
        }
    };
    let nt = opts.n_traj as f64;
    let n_samples = n_steps / every + 1;
    let times: Vec<f64> = (0..n_samples)
        .map(|k| (k * every) as f64 * opts.dt)
        .collect();
    let mut mean = Vec::with_capacity(n_samples);
    let mut stderr = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let m: Vec<f64> = (0..l).map(|i| acc.sum[k * l + i] / nt).collect();
        let se: Vec<f64> = (0..l)
            .map(|i| {
                if opts.n_traj < 2 {
                    return 0.0;
                }
                let var = ((acc.sumsq[k * l + i] - nt * m[i] * m[i]) / (nt - 1.0)).max(0.0);
                (var / nt).sqrt()
            })
            .collect();
        mean.push(m);
        stderr.push(se);
    }
    let jm = acc.jumps / nt;
    let jstd = if opts.n_traj > 1 {
        ((acc.jumps_sq - nt * jm * jm) / (nt - 1.0)).max(0.0).sqrt()
    } else {
        0.0
    };
    let mut warnings = Vec::new();
    if acc.pmax > 0.1 {
        warnings.push(format!(
            "per-step jump probability reached {:.3} (> 0.1); reduce dt",
            acc.pmax
        ));
    }
    Ok(TrajectoryEnsemble {
        n_traj: opts.n_traj,
        base_seed: opts.base_seed,
        dt: opts.dt,
        backend: opts.backend,
        times,
        mean,
        stderr,
        jump_counts: JumpStats {
            mean: jm,
            std: jstd,
            min: acc.jmin,
            max: acc.jmax,
        },
        max_step_jump_probability: acc.pmax,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Imbalance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImbalanceSeries {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    /// Sites 1..=left_sites form the left half (the middle site of an odd
    /// chain counts as left).
    pub left_sites: usize,
}

pub fn left_sites(l: usize) -> usize {
    l.div_ceil(2)
}

/// η = (N_left − N_right)/N_tot of one density profile.
pub fn imbalance_of_profile(n: &[f64]) -> f64 {
    let h = left_sites(n.len());
    let left: f64 = n[..h].iter().sum();
    let right: f64 = n[h..].iter().sum();
    let tot = left + right;
    if tot == 0.0 {
        0.0
    } else {
        (left - right) / tot
    }
}

pub fn imbalance(times: &[f64], profiles: &[Vec<f64>]) -> ImbalanceSeries {
    let l = profiles.first().map_or(0, |p| p.len());
    ImbalanceSeries {
        times: times.to_vec(),
        eta: profiles.iter().map(|p| imbalance_of_profile(p)).collect(),
        left_sites: left_sites(l),
    }
}

impl ImbalanceSeries {
    /// Time average over the last `fraction` of the samples.
    pub fn steady(&self, fraction: f64) -> f64 {
        let n = self.eta.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        self.eta[n - k..].iter().sum::<f64>() / k as f64
    }
}

/// Columns t, n_1..n_L, eta, se_1..se_L.
pub fn write_trajectory_csv(path: &Path, ens: &TrajectoryEnsemble) -> Result<()> {
    let l = ens.mean.first().map_or(0, |m| m.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=l).map(|i| format!("n_{i}")));
    header.push("eta".into());
    header.extend((1..=l).map(|i| format!("se_{i}")));
    let rows: Vec<Vec<Cell>> = ens
        .times
        .iter()
        .zip(ens.mean.iter().zip(&ens.stderr))
        .map(|(&t, (m, se))| {
            let mut r: Vec<Cell> = vec![t.into()];
            r.extend(m.iter().map(|&x| Cell::from(x)));
            r.push(imbalance_of_profile(m).into());
            r.extend(se.iter().map(|&x| Cell::from(x)));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}
