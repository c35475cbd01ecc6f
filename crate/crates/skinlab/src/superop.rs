//! Vectorized master equation and its spectral decomposition.
//!
//! The generator maps Hermitian matrices to Hermitian matrices, so in an
//! orthonormal Hermitian basis it is a real matrix. Diagonalizing that real
//! matrix makes the spectrum exactly closed under conjugation and halves
//! the cost. Left modes are the rows of the inverse eigenvector matrix,
//! which are biorthonormal to the right modes by construction, degenerate
//! clusters included.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eig, EigVals, Inverse};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::dd::Dd;
use crate::linalg::dense_eig::{self, Mat, Real};
use crate::linalg::{hs_inner, Csr, HermitianBasis, I, ZERO};
use crate::model::{self, Basis, ComplexOperator, ModelSpec};

/// Largest vectorized dimension assembled densely (L ≤ 80 single-particle).
pub const DENSE_CAP: usize = 6400;
/// Largest vectorized dimension for eigenvalues without eigenmodes.
pub const EIGENVALUE_CAP: usize = 10_000;
/// Diagonal overlaps of unit-norm left/right modes below this are flagged.
pub const OVERLAP_FLOOR: f64 = 1e-13;
/// Zero modes satisfy |λ| < ZERO_MODE_REL · ‖𝓛‖_max.
pub const ZERO_MODE_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Double,
    /// Decimal digits; served by double-double arithmetic up to 31 digits.
    Extended(u32),
}

pub const MAX_EXTENDED_DIGITS: u32 = 31;

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Double => f.write_str("double"),
            Precision::Extended(d) => write!(f, "extended:{d}"),
        }
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "double" {
            return Ok(Precision::Double);
        }
        if s == "extended" {
            return Ok(Precision::Extended(30));
        }
        if let Some(d) = s.strip_prefix("extended:") {
            let d: u32 = d
                .parse()
                .map_err(|_| Error::Parse(format!("bad digit count `{d}`")))?;
            return Ok(Precision::Extended(d));
        }
        Err(Error::Parse(format!("unknown precision `{s}`")))
    }
}

/// Master-equation generator 𝓛ρ = −i(H_eff ρ − ρ H_eff†) + γ Σ_μ L_μ ρ L_μ†,
/// stored with sparse operators so that one application costs O(nnz · d).
#[derive(Debug, Clone)]
pub struct Lindbladian {
    pub dim: usize,
    pub basis: Basis,
    pub gamma: f64,
    pub h_eff: Csr,
    pub jumps: Vec<Csr>,
    jump_rows: Vec<Vec<usize>>,
    /// Diagonal similarity S already applied (operators stored as S⁻¹ A S),
    /// with the max-norm of the untransformed generator.
    gauge: Option<(Vec<f64>, f64)>,
}

impl Lindbladian {
    pub fn new(basis: Basis, h_eff: Csr, jumps: Vec<Csr>, gamma: f64) -> Self {
        let jump_rows = jumps.iter().map(|j| j.occupied_rows()).collect();
        Lindbladian {
            dim: basis.dim(),
            basis,
            gamma,
            h_eff,
            jumps,
            jump_rows,
            gauge: None,
        }
    }

    /// Same spectrum, better conditioned: the generator conjugated by
    /// ρ ↦ SρS† for a positive diagonal S. Spectral routines undo the
    /// transformation on the eigenmodes.
    pub fn gauged(&self, s: Vec<f64>) -> Self {
        assert_eq!(s.len(), self.dim);
        let norm = self.norm_max();
        let tr = |m: &Csr| {
            let mut m = m.clone();
            for i in 0..m.nrows {
                for k in m.indptr[i]..m.indptr[i + 1] {
                    m.data[k] *= s[m.indices[k]] / s[i];
                }
            }
            m
        };
        let mut out = Self::new(
            self.basis,
            tr(&self.h_eff),
            self.jumps.iter().map(tr).collect(),
            self.gamma,
        );
        out.gauge = Some((s, norm));
        out
    }

    pub fn gauge(&self) -> Option<&[f64]> {
        self.gauge.as_ref().map(|(s, _)| s.as_slice())
    }

    /// The generator used for spectra of a model: skin-gauged under open
    /// boundaries (0 < γ ≠ t), untouched otherwise.
    pub fn spectral_from_spec(spec: &ModelSpec) -> Result<Self> {
        let lv = Self::from_spec(spec)?;
        Ok(match skin_gauge(spec) {
            Some(s) => lv.gauged(s),
            None => lv,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let heff = model::build_effective_hamiltonian(spec)?;
        let jumps = model::build_jump_operators(spec)?
            .iter()
            .map(|j| Csr::from_dense(j.entries.view()))
            .collect();
        Ok(Self::new(
            heff.basis,
            Csr::from_dense(heff.entries.view()),
            jumps,
            spec.gamma,
        ))
    }

    pub fn apply(&self, rho: ArrayView2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        self.apply_into(rho, &mut out);
        out
    }

    /// Overwrites `out` with 𝓛ρ.
    pub fn apply_into(&self, rho: ArrayView2<C64>, out: &mut Array2<C64>) {
        out.fill(ZERO);
        self.h_eff.mul_dense_acc(-I, rho, out.view_mut());
        self.h_eff.dense_mul_adj_acc(I, rho, out.view_mut());
        let d = self.dim;
        let mut x = Array2::<C64>::zeros((0, d));
        for (j, rows) in self.jumps.iter().zip(&self.jump_rows) {
            if x.nrows() != rows.len() {
                x = Array2::zeros((rows.len(), d));
            }
            for (r, &a) in rows.iter().enumerate() {
                let mut xr = x.row_mut(r);
                xr.fill(ZERO);
                for (b, v) in j.row(a) {
                    let pr = rho.row(b);
                    for c in 0..d {
                        xr[c] += v * pr[c];
                    }
                }
            }
            for (r, &a) in rows.iter().enumerate() {
                let xr = x.row(r);
                for &c in rows {
                    let mut acc = ZERO;
                    for (e, v) in j.row(c) {
                        acc += xr[e] * v.conj();
                    }
                    out[[a, c]] += acc * self.gamma;
                }
            }
        }
    }

    /// Heisenberg-picture generator, adjoint under tr(A†B):
    /// 𝓛†A = i(H_eff† A − A H_eff) + γ Σ_μ L_μ† A L_μ.
    pub fn apply_adjoint(&self, a: ArrayView2<C64>) -> Array2<C64> {
        let h = self.h_eff.to_dense();
        let hd = h.t().mapv(|z| z.conj());
        let mut out = (hd.dot(&a) - a.dot(&h)) * I;
        for j in &self.jumps {
            let jd = j.to_dense();
            let jdag = jd.t().mapv(|z| z.conj());
            out = out + jdag.dot(&a).dot(&jd) * self.gamma;
        }
        out
    }

    /// Largest entry modulus of the vectorized generator, computed from the
    /// sparse factors without assembling the d²×d² matrix.
    pub fn norm_max(&self) -> f64 {
        if let Some((_, n)) = &self.gauge {
            return *n;
        }
        use std::collections::BTreeMap;
        let mut pat: BTreeMap<(usize, usize), (C64, Vec<(usize, C64)>)> = BTreeMap::new();
        for i in 0..self.dim {
            pat.entry((i, i)).or_insert((ZERO, Vec::new()));
            for (k, v) in self.h_eff.row(i) {
                pat.entry((i, k)).or_insert((ZERO, Vec::new())).0 = v;
            }
        }
        for (mu, j) in self.jumps.iter().enumerate() {
            for i in 0..self.dim {
                for (k, v) in j.row(i) {
                    pat.entry((i, k))
                        .or_insert((ZERO, Vec::new()))
                        .1
                        .push((mu, v));
                }
            }
        }
        let entries: Vec<_> = pat.into_iter().collect();
        let mut best = 0.0f64;
        for ((i, k), (hik, lik)) in &entries {
            for ((jj, l), (hjl, ljl)) in &entries {
                let mut v = ZERO;
                if jj == l {
                    v += -I * hik;
                }
                if i == k {
                    v += I * hjl.conj();
                }
                let (mut p, mut q) = (0, 0);
                while p < lik.len() && q < ljl.len() {
                    match lik[p].0.cmp(&ljl[q].0) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            v += lik[p].1 * ljl[q].1.conj() * self.gamma;
                            p += 1;
                            q += 1;
                        }
                    }
                }
                best = best.max(v.norm());
            }
        }
        best
    }

    /// The generator in the orthonormal Hermitian basis: a real n×n matrix, n = d².
    pub fn real_matrix(&self) -> Array2<f64> {
        let d = self.dim;
        let hb = HermitianBasis::new(d);
        let n = hb.len();
        let mut r = Array2::<f64>::zeros((n, n));
        let mut e = Array2::<C64>::zeros((d, d));
        let mut out = Array2::<C64>::zeros((d, d));
        let mut col = vec![0.0; n];
        for beta in 0..n {
            let elem = hb.element(beta);
            for &(i, j, v) in &elem {
                e[[i, j]] = v;
            }
            self.apply_into(e.view(), &mut out);
            hb.coords_real(out.view(), &mut col);
            r.column_mut(beta).assign(&Array1::from(col.clone()));
            for &(i, j, _) in &elem {
                e[[i, j]] = ZERO;
            }
        }
        r
    }
}

const GAUGE_RATIO_CAP: f64 = 1.5;

/// Imaginary-gauge weights s_n = ρ^{−n} that tame the non-normality of the
/// open feedback chain, with ρ = min(√r, 1.5). `None` under periodic
/// boundaries, without feedback (the steady state is flat), at γ = 0 and at
/// γ = t.
pub fn skin_gauge(spec: &ModelSpec) -> Option<Vec<f64>> {
    if spec.bc != crate::model::Boundary::Obc || spec.gamma == 0.0 || !spec.feedback {
        return None;
    }
    // The full ratio r balances H_eff but overweights the jump term; the
    // spectrum is stable across roughly 1.2..1.75, so stay inside that band.
    let r = spec.skin_ratio()?.sqrt().min(GAUGE_RATIO_CAP);
    Some((0..spec.l).map(|n| r.powi(-(n as i32))).collect())
}

/// Dense d²×d² generator in the row-major pair basis.
pub fn vectorize_liouvillian(spec: &ModelSpec) -> Result<ComplexOperator> {
    vectorize_liouvillian_capped(spec, DENSE_CAP)
}

pub fn vectorize_liouvillian_capped(spec: &ModelSpec, cap: usize) -> Result<ComplexOperator> {
    spec.validate()?;
    let d = spec.l;
    if d * d > cap {
        return Err(Error::DimensionCap { dim: d * d, cap });
    }
    let lv = Lindbladian::from_spec(spec)?;
    vectorize(&lv)
}

/// Dense vectorization of any structured generator.
pub fn vectorize(lv: &Lindbladian) -> Result<ComplexOperator> {
    let d = lv.dim;
    let n = d * d;
    let h = lv.h_eff.to_dense();
    let mut m = Array2::<C64>::zeros((n, n));
    // −i(H ⊗ 1 − 1 ⊗ H*)
    for i in 0..d {
        for k in 0..d {
            let hik = h[[i, k]];
            if hik != ZERO {
                for j in 0..d {
                    m[[i * d + j, k * d + j]] += -I * hik;
                }
            }
        }
    }
    for j in 0..d {
        for l in 0..d {
            let hjl = h[[j, l]];
            if hjl != ZERO {
                for i in 0..d {
                    m[[i * d + j, i * d + l]] += I * hjl.conj();
                }
            }
        }
    }
    for jump in &lv.jumps {
        for i in 0..d {
            for (k, a) in jump.row(i) {
                for j in 0..d {
                    for (l, b) in jump.row(j) {
                        m[[i * d + j, k * d + l]] += a * b.conj() * lv.gamma;
                    }
                }
            }
        }
    }
    ComplexOperator::new(m, Basis::Vectorized { d })
}

/// Eigenvalues sorted by (−Re λ, Im λ, original index), with optional
/// biorthonormal right/left modes stored as columns of vec(ρ) (row-major).
#[derive(Debug, Clone)]
pub struct LiouvillianSpectrum {
    pub d: usize,
    pub precision: Precision,
    pub eigenvalues: Vec<C64>,
    pub right: Option<Array2<C64>>,
    pub left: Option<Array2<C64>>,
    /// |(ρ^L_i|ρ^R_i)| for unit-normalized left and right modes.
    pub conditioning: Vec<f64>,
    pub zero_mode_count: usize,
    pub norm_max: f64,
    pub gap: f64,
    pub gap_ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub ambiguous: bool,
}

impl LiouvillianSpectrum {
    pub fn zero_tol(&self) -> f64 {
        ZERO_MODE_REL * self.norm_max
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn has_modes(&self) -> bool {
        self.right.is_some()
    }

    pub fn right_mode(&self, i: usize) -> Array2<C64> {
        let r = self
            .right
            .as_ref()
            .expect("spectrum computed without modes");
        mode_matrix(r.column(i).iter().copied(), self.d)
    }

    pub fn left_mode(&self, i: usize) -> Array2<C64> {
        let l = self.left.as_ref().expect("spectrum computed without modes");
        mode_matrix(l.column(i).iter().copied(), self.d)
    }

    /// Smallest |(ρ^L_i|ρ^R_i)| and its index.
    pub fn min_overlap(&self) -> Option<(usize, f64)> {
        self.conditioning
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

    pub fn ill_conditioned(&self) -> bool {
        self.min_overlap().is_some_and(|(_, v)| v < OVERLAP_FLOOR)
    }

    pub fn check_conditioning(&self) -> Result<()> {
        match self.min_overlap() {
            Some((index, v)) if v < OVERLAP_FLOOR => Err(Error::IllConditioned {
                min_overlap: v,
                index,
            }),
            _ => Ok(()),
        }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of another.
    pub fn conjugate_closure_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for z in &self.eigenvalues {
            let c = z.conj();
            let best = self
                .eigenvalues
                .iter()
                .map(|w| (w - c).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

fn mode_matrix(it: impl Iterator<Item = C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), it.collect()).expect("d² entries")
}

pub fn liouvillian_gap(spec: &LiouvillianSpectrum) -> Gap {
    Gap {
        value: spec.gap,
        ambiguous: spec.gap_ambiguous,
    }
}

fn gap_of(eigs: &[C64], zero_count: usize, norm_max: f64) -> (f64, bool) {
    let tol = 1e-8 * norm_max.max(1.0);
    let mut ambiguous = false;
    let mut gap = f64::INFINITY;
    for z in &eigs[zero_count..] {
        let re = z.re.abs();
        if re <= tol {
            ambiguous = true;
            continue;
        }
        gap = gap.min(re);
    }
    if !gap.is_finite() {
        return (0.0, true);
    }
    (gap, ambiguous)
}

fn sort_order(eigs: &[C64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..eigs.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (eigs[a], eigs[b]);
        (-x.re)
            .partial_cmp(&-y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
            .then(a.cmp(&b))
    });
    idx
}

/// Zero modes are moved to the front: they have |λ| below the threshold,
/// and the remaining order is the (−Re, +Im, index) order.
fn order_with_zero_modes(eigs: &[C64], tol: f64) -> (Vec<usize>, usize) {
    let base = sort_order(eigs);
    let (zero, rest): (Vec<usize>, Vec<usize>) =
        base.into_iter().partition(|&i| eigs[i].norm() < tol);
    let z = zero.len();
    (zero.into_iter().chain(rest).collect(), z)
}

/// A spectrum known only in part (e.g. the rightmost eigenvalues from a
/// Krylov solver). Eigenvalues with |λ| < `zero_tol` count as zero modes.
pub fn partial_spectrum(d: usize, eigs: &[C64], zero_tol: f64) -> LiouvillianSpectrum {
    let (order, z) = order_with_zero_modes(eigs, zero_tol);
    let eigenvalues: Vec<C64> = order.iter().map(|&i| eigs[i]).collect();
    let (gap, gap_ambiguous) = gap_of(&eigenvalues, z, zero_tol / ZERO_MODE_REL);
    LiouvillianSpectrum {
        d,
        precision: Precision::Double,
        eigenvalues,
        right: None,
        left: None,
        conditioning: Vec::new(),
        zero_mode_count: z,
        norm_max: zero_tol / ZERO_MODE_REL,
        gap,
        gap_ambiguous,
    }
}

/// Complete eigendecomposition with biorthonormal right and left modes.
pub fn full_spectrum(lv: &Lindbladian, precision: Precision) -> Result<LiouvillianSpectrum> {
    spectrum_impl(lv, precision, true)
}

/// Full spectrum of a model, through the skin gauge where it applies.
pub fn model_spectrum(spec: &ModelSpec, precision: Precision) -> Result<LiouvillianSpectrum> {
    full_spectrum(&Lindbladian::spectral_from_spec(spec)?, precision)
}

/// Eigenvalues of a model, through the skin gauge where it applies.
pub fn model_eigenvalues(spec: &ModelSpec, precision: Precision) -> Result<LiouvillianSpectrum> {
    spectrum_eigenvalues(&Lindbladian::spectral_from_spec(spec)?, precision)
}

/// Eigenvalues, zero-mode count and gap without eigenvectors.
pub fn spectrum_eigenvalues(lv: &Lindbladian, precision: Precision) -> Result<LiouvillianSpectrum> {
    spectrum_impl(lv, precision, false)
}

/// Spectrum of an explicitly vectorized generator (row-major pair basis).
/// Hermiticity-preserving inputs take the real-basis route; anything else
/// is diagonalized as a general complex matrix.
pub fn full_spectrum_vectorized(
    op: &ComplexOperator,
    precision: Precision,
) -> Result<LiouvillianSpectrum> {
    let d = match op.basis {
        Basis::Vectorized { d } => d,
        _ => return Err(Error::InvalidModel("expected a vectorized operator".into())),
    };
    let n = d * d;
    let hb = HermitianBasis::new(d);
    let elems: Vec<Vec<(usize, usize, C64)>> = (0..n).map(|a| hb.element(a)).collect();
    let mut r = Array2::<f64>::zeros((n, n));
    let mut imag = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut v = ZERO;
            for &(i, j, x) in &elems[a] {
                for &(k, l, y) in &elems[b] {
                    v += x.conj() * op.entries[[i * d + j, k * d + l]] * y;
                }
            }
            imag = imag.max(v.im.abs());
            r[[a, b]] = v.re;
        }
    }
    let norm_max = op.entries.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if imag > 1e-12 * norm_max.max(1.0) {
        return complex_spectrum(op, d, norm_max);
    }
    finish_real(r, d, precision, true, norm_max, &hb)
}

fn complex_spectrum(op: &ComplexOperator, d: usize, norm_max: f64) -> Result<LiouvillianSpectrum> {
    let (vals, vecs) = op.entries.eig()?;
    let inv = vecs.inv()?;
    let eigs: Vec<C64> = vals.to_vec();
    let (order, z) = order_with_zero_modes(&eigs, ZERO_MODE_REL * norm_max);
    let n = eigs.len();
    let mut right = Array2::zeros((n, n));
    let mut left = Array2::zeros((n, n));
    let mut cond = Vec::with_capacity(n);
    for (p, &i) in order.iter().enumerate() {
        right.column_mut(p).assign(&vecs.column(i));
        let y = inv.row(i).mapv(|z| z.conj());
        let nl = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nr = vecs
            .column(i)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        cond.push(1.0 / (nl * nr));
        left.column_mut(p).assign(&y);
    }
    let eigs: Vec<C64> = order.iter().map(|&i| eigs[i]).collect();
    let (gap, amb) = gap_of(&eigs, z, norm_max);
    Ok(LiouvillianSpectrum {
        d,
        precision: Precision::Double,
        eigenvalues: eigs,
        right: Some(right),
        left: Some(left),
        conditioning: cond,
        zero_mode_count: z,
        norm_max,
        gap,
        gap_ambiguous: amb,
    })
}

fn spectrum_impl(
    lv: &Lindbladian,
    precision: Precision,
    vectors: bool,
) -> Result<LiouvillianSpectrum> {
    let d = lv.dim;
    let cap = if vectors { DENSE_CAP } else { EIGENVALUE_CAP };
    if d * d > cap {
        return Err(Error::DimensionCap { dim: d * d, cap });
    }
    let r = lv.real_matrix();
    let hb = HermitianBasis::new(d);
    let mut spec = finish_real(r, d, precision, vectors, lv.norm_max(), &hb)?;
    if let Some(s) = lv.gauge() {
        ungauge_modes(&mut spec, s);
    }
    Ok(spec)
}

/// Maps modes of the gauged generator back: ρ^R = S ρ'^R S, ρ^L = S⁻¹ ρ'^L S⁻¹.
fn ungauge_modes(spec: &mut LiouvillianSpectrum, s: &[f64]) {
    let d = spec.d;
    let (Some(right), Some(left)) = (spec.right.as_mut(), spec.left.as_mut()) else {
        return;
    };
    let n = right.ncols();
    for p in 0..n {
        let mut rc = right.column_mut(p);
        for i in 0..d {
            for j in 0..d {
                rc[i * d + j] *= s[i] * s[j];
            }
        }
        let nr = rc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        rc.mapv_inplace(|z| z / nr);
        let mut lc = left.column_mut(p);
        for i in 0..d {
            for j in 0..d {
                lc[i * d + j] /= s[i] * s[j];
            }
        }
        lc.mapv_inplace(|z| z * nr);
        let nl = lc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        spec.conditioning[p] = 1.0 / nl;
    }
}

fn finish_real(
    r: Array2<f64>,
    d: usize,
    precision: Precision,
    vectors: bool,
    norm_max: f64,
    hb: &HermitianBasis,
) -> Result<LiouvillianSpectrum> {
    let n = r.nrows();
    // Eigenvalues plus, when requested, eigenvectors and dual rows in Hermitian coordinates.
    let (eigs, coords): (Vec<C64>, Option<(Array2<C64>, Array2<C64>)>) = match precision {
        Precision::Double => {
            if vectors {
                let (vals, vecs) = r.eig()?;
                let inv = vecs.inv()?;
                (vals.to_vec(), Some((vecs, inv)))
            } else {
                (r.eigvals()?.to_vec(), None)
            }
        }
        Precision::Extended(digits) => {
            if digits > MAX_EXTENDED_DIGITS {
                return Err(Error::Precision(format!(
                    "{digits} digits requested; the extended backend provides at most {MAX_EXTENDED_DIGITS}"
                )));
            }
            extended_eigen(&r, vectors)?
        }
    };
    let tol = ZERO_MODE_REL * norm_max;
    let (order, z) = order_with_zero_modes(&eigs, tol);
    let sorted: Vec<C64> = order.iter().map(|&i| eigs[i]).collect();
    let (gap, amb) = gap_of(&sorted, z, norm_max);
    let mut spec = LiouvillianSpectrum {
        d,
        precision,
        eigenvalues: sorted,
        right: None,
        left: None,
        conditioning: Vec::new(),
        zero_mode_count: z,
        norm_max,
        gap,
        gap_ambiguous: amb,
    };
    if let Some((v, vinv)) = coords {
        let mut right = Array2::<C64>::zeros((n, n));
        let mut left = Array2::<C64>::zeros((n, n));
        let mut cond = Vec::with_capacity(n);
        for (p, &i) in order.iter().enumerate() {
            let x: Vec<C64> = v.column(i).to_vec();
            // Dual functional y·x; the left mode matrix is (Σ y_α e_α)†, i.e. Σ conj(y_α) e_α.
            let y: Vec<C64> = vinv.row(i).iter().map(|z| z.conj()).collect();
            let rm = hb.matrix(&x);
            let lm = hb.matrix(&y);
            let nr = rm.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nl = lm.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            cond.push(1.0 / (nr * nl));
            right
                .column_mut(p)
                .assign(&Array1::from_iter(rm.iter().copied()));
            left.column_mut(p)
                .assign(&Array1::from_iter(lm.iter().copied()));
        }
        spec.right = Some(right);
        spec.left = Some(left);
        spec.conditioning = cond;
    }
    Ok(spec)
}

type Coords = (Vec<C64>, Option<(Array2<C64>, Array2<C64>)>);

fn extended_eigen(r: &Array2<f64>, vectors: bool) -> Result<Coords> {
    let n = r.nrows();
    let flat: Vec<f64> = r.iter().copied().collect();
    let a = Mat::<Dd>::from_f64(n, &flat);
    let eig = dense_eig::real_eigen(&a, true)?;
    let eigs: Vec<C64> = eig
        .re
        .iter()
        .zip(&eig.im)
        .map(|(x, y)| C64::new(x.to_f(), y.to_f()))
        .collect();
    if !vectors {
        return Ok((eigs, None));
    }
    let v = eig.vectors.as_ref().expect("vectors requested");
    let vinv = dense_eig::invert(v)?;
    let mut vc = Array2::<C64>::zeros((n, n));
    let mut ic = Array2::<C64>::zeros((n, n));
    let mut j = 0;
    while j < n {
        if eig.im[j] == Dd::ZERO {
            for i in 0..n {
                vc[[i, j]] = C64::new(v[(i, j)].to_f(), 0.0);
                ic[[j, i]] = C64::new(vinv[(j, i)].to_f(), 0.0);
            }
            j += 1;
        } else {
            // Columns (a, b) span the pair; rows (p, q) of the inverse give
            // the duals (p ∓ i q)/2 of a ± i b.
            for i in 0..n {
                let (a, b) = (v[(i, j)].to_f(), v[(i, j + 1)].to_f());
                vc[[i, j]] = C64::new(a, b);
                vc[[i, j + 1]] = C64::new(a, -b);
                let (p, q) = (vinv[(j, i)].to_f(), vinv[(j + 1, i)].to_f());
                ic[[j, i]] = C64::new(0.5 * p, -0.5 * q);
                ic[[j + 1, i]] = C64::new(0.5 * p, 0.5 * q);
            }
            j += 2;
        }
    }
    Ok((eigs, Some((vc, ic))))
}

/// Coefficients of ρ0 on the non-steady right modes.
#[derive(Debug, Clone)]
pub struct ExpansionCoefficients {
    pub values: Vec<C64>,
    pub conditioning: Vec<f64>,
    /// Coefficients on the zero modes (the steady component of ρ0).
    pub steady: Vec<C64>,
    pub max_abs: f64,
    pub ill_conditioned: bool,
}

pub fn expansion_coefficients(
    spec: &LiouvillianSpectrum,
    rho0: ArrayView2<C64>,
) -> Result<ExpansionCoefficients> {
    let (left, right) = match (&spec.left, &spec.right) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(Error::InvalidModel("spectrum lacks eigenmodes".into())),
    };
    if rho0.nrows() != spec.d || rho0.ncols() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: rho0.nrows(),
        });
    }
    let v0: Vec<C64> = rho0.iter().copied().collect();
    let n = spec.len();
    let mut all = Vec::with_capacity(n);
    for i in 0..n {
        let l = left.column(i);
        let r = right.column(i);
        let num: C64 = l.iter().zip(&v0).map(|(a, b)| a.conj() * b).sum();
        let den: C64 = l.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
        all.push(num / den);
    }
    let z = spec.zero_mode_count;
    let values = all[z..].to_vec();
    let max_abs = values.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    Ok(ExpansionCoefficients {
        values,
        conditioning: spec.conditioning[z..].to_vec(),
        steady: all[..z].to_vec(),
        max_abs,
        ill_conditioned: spec.ill_conditioned(),
    })
}

impl ExpansionCoefficients {
    /// Σ_i c_i e^{λ_i t} ρ^R_i over all modes, steady ones included.
    pub fn evolve(&self, spec: &LiouvillianSpectrum, t: f64) -> Array2<C64> {
        let right = spec.right.as_ref().expect("modes");
        let z = spec.zero_mode_count;
        let mut v = Array1::<C64>::zeros(right.nrows());
        for (i, c) in self.steady.iter().enumerate() {
            v.scaled_add(*c, &right.column(i));
        }
        for (k, c) in self.values.iter().enumerate() {
            let i = z + k;
            let f = *c * (spec.eigenvalues[i] * t).exp();
            v.scaled_add(f, &right.column(i));
        }
        Array2::from_shape_vec((spec.d, spec.d), v.to_vec()).expect("d²")
    }

    pub fn reconstruct(&self, spec: &LiouvillianSpectrum) -> Array2<C64> {
        self.evolve(spec, 0.0)
    }

    /// Trace norm of c_i ρ^R_i + conj(c_i) ρ^R_i† for non-steady mode `k`.
    pub fn mode_weight(&self, spec: &LiouvillianSpectrum, k: usize) -> Result<f64> {
        let i = spec.zero_mode_count + k;
        let r = spec.right_mode(i) * self.values[k];
        let sum = &r + &crate::linalg::adjoint(r.view());
        let ev = crate::linalg::eigvalsh(sum.view())?;
        Ok(ev.iter().map(|x| x.abs()).sum())
    }
}

/// Spectrum file contents shared by single-particle, perturbative and
/// many-body dumps.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumDump {
    #[serde(rename = "L")]
    pub l: usize,
    pub gamma: f64,
    pub t: f64,
    pub bc: String,
    pub model: String,
    pub precision: String,
    pub eigenvalues: Vec<[f64; 2]>,
    /// NaN (null in JSON) where no gap is defined.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub gap: f64,
    #[serde(rename = "zeroModeCount", default)]
    pub zero_mode_count: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<u8>,
}

impl SpectrumDump {
    pub fn new(spec: &ModelSpec, s: &LiouvillianSpectrum) -> Self {
        SpectrumDump {
            l: spec.l,
            gamma: spec.gamma,
            t: spec.t,
            bc: spec.bc.to_string(),
            model: spec.model_name().to_string(),
            precision: s.precision.to_string(),
            eigenvalues: s.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            gap: s.gap,
            zero_mode_count: s.zero_mode_count,
            n: None,
            order: None,
        }
    }
}

/// |ρ| magnitude matrices of selected right modes, for mode maps.
pub fn mode_magnitudes(spec: &LiouvillianSpectrum, indices: &[usize]) -> Vec<Array2<f64>> {
    indices
        .iter()
        .map(|&i| spec.right_mode(i).mapv(|z| z.norm()))
        .collect()
}

/// Convenience: (ρ^L_i | ρ^R_j) for two stored modes.
pub fn mode_overlap(spec: &LiouvillianSpectrum, i: usize, j: usize) -> C64 {
    hs_inner(spec.left_mode(i).view(), spec.right_mode(j).view())
}

/// Slice of the first `k` eigenvalues (already sorted).
pub fn leading(spec: &LiouvillianSpectrum, k: usize) -> Vec<C64> {
    spec.eigenvalues[..k.min(spec.len())].to_vec()
}
