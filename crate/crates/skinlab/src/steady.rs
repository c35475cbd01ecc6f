//! Steady states: closed forms for periodic chains, numeric ones from a
//! spectrum or a null-space solve, and localization-length fits of the
//! diagonal profile.

use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, Solve, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Cell};
use crate::linalg::{
    adjoint, eigvalsh, hermitize, hs_inner, max_abs, trace, trace_norm_hermitian, HermitianBasis,
};
use crate::model::{plane_wave, Basis, Boundary, ModelSpec};
use crate::superop::{skin_gauge, Lindbladian, LiouvillianSpectrum};

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Trace-one, Hermitian, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: Array2<C64>,
    pub basis: Basis,
    pub trace: f64,
}

impl DensityMatrix {
    /// Validates without modifying.
    pub fn new(entries: Array2<C64>, basis: Basis) -> Result<Self> {
        let d = basis.dim();
        if entries.dim() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: entries.nrows(),
            });
        }
        let tr = trace(entries.view());
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = max_abs((&entries - &adjoint(entries.view())).view());
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |ρ − ρ†| = {herm:e}"
            )));
        }
        let min = eigvalsh(entries.view())?[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {min:e} is negative"
            )));
        }
        Ok(DensityMatrix {
            entries,
            basis,
            trace: tr.re,
        })
    }

    /// Hermitizes and divides by the trace, then validates.
    pub fn normalized(entries: ArrayView2<C64>, basis: Basis) -> Result<Self> {
        let h = hermitize(entries);
        let tr = trace(h.view()).re;
        if tr.abs() < 1e-14 * max_abs(h.view()).max(1e-300) {
            return Err(Error::InvalidState(
                "trace vanishes; cannot normalize".into(),
            ));
        }
        Self::new(h / C64::new(tr, 0.0), basis)
    }

    pub fn pure(psi: &[C64], basis: Basis) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let m = Array2::from_shape_fn((psi.len(), psi.len()), |(i, j)| psi[i] * psi[j].conj() / n);
        Self::new(m, basis)
    }

    /// |j⟩⟨j| on an `l`-site chain (0-based `j`).
    pub fn site(l: usize, j: usize) -> Self {
        let mut m = Array2::zeros((l, l));
        m[[j, j]] = C64::new(1.0, 0.0);
        DensityMatrix {
            entries: m,
            basis: Basis::Site { l },
            trace: 1.0,
        }
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        let d = basis.dim();
        let m = Array2::from_diag(&Array1::from_elem(d, C64::new(1.0 / d as f64, 0.0)));
        DensityMatrix {
            entries: m,
            basis,
            trace: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diag().iter().map(|z| z.re).collect()
    }

    /// Trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        trace_norm_hermitian((&self.entries - &other.entries).view())
    }
}

fn momentum_projector(l: usize, j: i64) -> Array2<C64> {
    let k = plane_wave(l, j);
    Array2::from_shape_fn((l, l), |(a, b)| k[a] * k[b].conj())
}

/// Closed-form steady state of the periodic feedback chain: a mixture of
/// plane-wave projectors with weights (1 − sin k)/(1 + sin k). When k = −π/2
/// is on the momentum grid (L divisible by 4) its weight dominates all
/// others and the state is that single projector.
pub fn analytic_steady_feedback_pbc(spec: &ModelSpec) -> Result<DensityMatrix> {
    if !spec.feedback || spec.bc != Boundary::Pbc {
        return Err(Error::InvalidModel(
            "closed form holds for the periodic feedback chain only".into(),
        ));
    }
    let l = spec.l;
    let basis = Basis::Site { l };
    if l.is_multiple_of(4) {
        return DensityMatrix::new(momentum_projector(l, (3 * l / 4) as i64), basis);
    }
    let mut rho = Array2::<C64>::zeros((l, l));
    let mut total = 0.0;
    for j in 1..=l as i64 {
        let s = (2.0 * std::f64::consts::PI * j as f64 / l as f64).sin();
        let w = (1.0 - s) / (1.0 + s);
        total += w;
        rho.scaled_add(C64::new(w, 0.0), &momentum_projector(l, j));
    }
    DensityMatrix::normalized((rho / C64::new(total, 0.0)).view(), basis)
}

/// Steady states of the model without feedback: the maximally mixed state,
/// plus the k = −π/2 projector on periodic chains with L divisible by 4.
pub fn analytic_steady_nofeedback(spec: &ModelSpec) -> Result<Vec<DensityMatrix>> {
    if spec.feedback {
        return Err(Error::InvalidModel(
            "expects the model without feedback".into(),
        ));
    }
    let l = spec.l;
    let basis = Basis::Site { l };
    let mut out = vec![DensityMatrix::maximally_mixed(basis)];
    if spec.bc == Boundary::Pbc && l.is_multiple_of(4) {
        out.push(DensityMatrix::new(
            momentum_projector(l, (3 * l / 4) as i64),
            basis,
        )?);
    }
    Ok(out)
}

/// Orthonormal (Hilbert–Schmidt) Hermitian basis of the span of `mats` and
/// their adjoints.
fn hermitian_span(mats: &[Array2<C64>], tol: f64) -> Vec<Array2<C64>> {
    let mut basis: Vec<Array2<C64>> = Vec::new();
    for m in mats {
        let a = hermitize(m.view());
        let b = hermitize((m * C64::new(0.0, -1.0)).view());
        for mut v in [a, b] {
            for _ in 0..2 {
                for e in &basis {
                    let c = hs_inner(e.view(), v.view()).re;
                    v.scaled_add(C64::new(-c, 0.0), e);
                }
            }
            let n = hs_inner(v.view(), v.view()).re.sqrt();
            if n > tol {
                basis.push(v / C64::new(n, 0.0));
            }
        }
    }
    basis
}

/// Trace-one Hermitian representatives of the zero-eigenvalue manifold.
///
/// One zero mode: the mode itself, Hermitized and normalized. Several: an
/// orthonormal Hermitian basis is rotated so a single element carries the
/// trace; that element (normalized) is returned first, followed for each
/// traceless direction by the purer endpoint of the positive segment
/// through it.
pub fn numeric_steady(spec: &LiouvillianSpectrum, basis: Basis) -> Result<Vec<DensityMatrix>> {
    if !spec.has_modes() {
        return Err(Error::InvalidModel("spectrum lacks eigenmodes".into()));
    }
    let z = spec.zero_mode_count;
    let modes: Vec<Array2<C64>> = (0..z).map(|i| spec.right_mode(i)).collect();
    if z == 1 {
        return Ok(vec![DensityMatrix::normalized(modes[0].view(), basis)?]);
    }
    let herm = hermitian_span(&modes, 1e-8);
    if herm.len() != z {
        return Err(Error::InvalidState(format!(
            "zero manifold spans {} Hermitian directions, expected {z}",
            herm.len()
        )));
    }
    // Householder reflection sending the trace vector to its first axis.
    let tr: Vec<f64> = herm.iter().map(|h| trace(h.view()).re).collect();
    let norm = tr.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::InvalidState("zero manifold is traceless".into()));
    }
    let sign = if tr[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = tr.clone();
    v[0] += sign * norm;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let rotated: Vec<Array2<C64>> = (0..z)
        .map(|a| {
            let mut m = Array2::<C64>::zeros(herm[0].dim());
            for (b, h) in herm.iter().enumerate() {
                let q = if a == b { 1.0 } else { 0.0 } - 2.0 * v[a] * v[b] / vv;
                m.scaled_add(C64::new(q, 0.0), h);
            }
            m
        })
        .collect();
    let rho1 = DensityMatrix::normalized(rotated[0].view(), basis)?;
    // ρ1^{-1/2} for the positivity segment.
    let (w, u) = rho1.entries.eigh(UPLO::Lower)?;
    if w[0] <= 1e-12 {
        return Err(Error::InvalidState(
            "trace-carrying steady state is singular; cannot build endpoints".into(),
        ));
    }
    let isq = {
        let dinv = Array2::from_diag(&w.mapv(|x| C64::new(1.0 / x.sqrt(), 0.0)));
        u.dot(&dinv).dot(&adjoint(u.view()))
    };
    let mut out = vec![rho1.clone()];
    for h in &rotated[1..] {
        let m = isq.dot(h).dot(&isq);
        let mu = eigvalsh(m.view())?;
        let (lo, hi) = (mu[0], mu[mu.len() - 1]);
        // ρ1 + s h ⪰ 0 for s ∈ [−1/hi, −1/lo].
        let ends = [-1.0 / lo, -1.0 / hi];
        let cands: Vec<Array2<C64>> = ends
            .iter()
            .map(|s| &rho1.entries + &(h * C64::new(*s, 0.0)))
            .collect();
        let purity = |m: &Array2<C64>| hs_inner(m.view(), m.view()).re;
        let best = if purity(&cands[0]) >= purity(&cands[1]) {
            &cands[0]
        } else {
            &cands[1]
        };
        out.push(DensityMatrix::normalized(best.view(), basis)?);
    }
    Ok(out)
}

/// Least-squares projection of each state onto the real span of `basis`
/// states, with the Frobenius residual of each projection.
pub fn project_onto_span(
    states: &[DensityMatrix],
    basis: &[DensityMatrix],
) -> Result<Vec<(DensityMatrix, f64)>> {
    let mats: Vec<Array2<C64>> = basis.iter().map(|b| b.entries.clone()).collect();
    let on = hermitian_span(&mats, 1e-10);
    states
        .iter()
        .map(|s| {
            let mut p = Array2::<C64>::zeros(s.entries.dim());
            for e in &on {
                p.scaled_add(C64::new(hs_inner(e.view(), s.entries.view()).re, 0.0), e);
            }
            let res = hs_inner((&s.entries - &p).view(), (&s.entries - &p).view())
                .re
                .sqrt();
            Ok((DensityMatrix::normalized(p.view(), s.basis)?, res))
        })
        .collect()
}

/// Single steady state from a dense null-space solve of the real-basis
/// generator, one equation replaced by unit trace. Goes through the skin
/// gauge when it applies; suited to open chains too long for a full
/// eigendecomposition.
pub fn steady_by_solve(spec: &ModelSpec) -> Result<DensityMatrix> {
    if !spec.feedback && spec.bc == Boundary::Pbc && spec.l.is_multiple_of(4) {
        return Err(Error::InvalidModel(
            "two-dimensional steady manifold; use numeric_steady".into(),
        ));
    }
    let lv = Lindbladian::from_spec(spec)?;
    let gauge = skin_gauge(spec);
    let lv = match &gauge {
        Some(s) => lv.gauged(s.clone()),
        None => lv,
    };
    let d = spec.l;
    let mut r = lv.real_matrix();
    let n = d * d;
    for c in 0..n {
        r[[0, c]] = 0.0;
    }
    // tr ρ = Σ_n s_n² ρ'_nn in gauged coordinates.
    for i in 0..d {
        r[[0, i]] = gauge.as_ref().map_or(1.0, |s| s[i] * s[i]);
    }
    let mut rhs = Array1::<f64>::zeros(n);
    rhs[0] = 1.0;
    let x = r.solve_into(rhs)?;
    let hb = HermitianBasis::new(d);
    let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut rho = hb.matrix(&xc);
    if let Some(s) = &gauge {
        for i in 0..d {
            for j in 0..d {
                rho[[i, j]] *= s[i] * s[j];
            }
        }
    }
    DensityMatrix::normalized(rho.view(), Basis::Site { l: d })
}

/// Exponential fit of a diagonal profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalizationFit {
    pub loc_length: f64,
    /// Half-open 0-based site window actually fitted.
    pub fit_range: (usize, usize),
    pub residual: f64,
    pub theory_length: Option<f64>,
    /// Residual above 0.5 in log units.
    pub rejected: bool,
    /// γ = t: the theoretical length is undefined.
    pub theory_undefined: bool,
}

pub const MIN_FIT_SITES: usize = 5;
pub const FIT_SKIP: usize = 2;
pub const FIT_FLOOR: f64 = 1e-13;
pub const FIT_MAX_RESIDUAL: f64 = 0.5;

/// Default window: skip the first two sites, stop before the first site
/// whose value is below the double-precision floor.
pub fn default_window(diag: &[f64]) -> Range<usize> {
    let start = FIT_SKIP.min(diag.len());
    let end = (start..diag.len())
        .find(|&i| diag[i] < FIT_FLOOR)
        .unwrap_or(diag.len());
    start..end
}

/// Least-squares fit ln p(x) = a − x/ξ over the window.
pub fn fit_profile(diag: &[f64], window: Option<Range<usize>>) -> Result<LocalizationFit> {
    let w = window.unwrap_or_else(|| default_window(diag));
    if w.end > diag.len() || w.len() < MIN_FIT_SITES {
        return Err(Error::Fit(format!(
            "window {w:?} has fewer than {MIN_FIT_SITES} usable sites"
        )));
    }
    if diag[w.clone()].iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit(
            "profile is not strictly positive over the window".into(),
        ));
    }
    let xs: Vec<f64> = w.clone().map(|i| i as f64).collect();
    let ys: Vec<f64> = w.clone().map(|i| diag[i].ln()).collect();
    let (slope, icpt) = linear_fit(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    if slope >= 0.0 {
        return Err(Error::Fit(format!(
            "profile does not decay (slope {slope})"
        )));
    }
    Ok(LocalizationFit {
        loc_length: -1.0 / slope,
        fit_range: (w.start, w.end),
        residual,
        theory_length: None,
        rejected: residual > FIT_MAX_RESIDUAL,
        theory_undefined: false,
    })
}

/// Fit of a steady state's diagonal with the Hatano–Nelson length 1/ln r
/// attached for comparison.
pub fn fit_localization_length(
    rho: &DensityMatrix,
    window: Option<Range<usize>>,
    spec: &ModelSpec,
) -> Result<LocalizationFit> {
    let mut fit = fit_profile(&rho.diagonal(), window)?;
    match spec.skin_ratio() {
        Some(r) if r > 1.0 => fit.theory_length = Some(1.0 / r.ln()),
        Some(_) => {}
        None => fit.theory_undefined = true,
    }
    Ok(fit)
}

/// Ordinary least squares y = a + b x, returns (b, a).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (b, my - b * mx)
}

/// Max-norm of 𝓛ρ.
pub fn steady_residual(spec: &ModelSpec, rho: &DensityMatrix) -> Result<f64> {
    let lv = Lindbladian::from_spec(spec)?;
    Ok(max_abs(lv.apply(rho.entries.view()).view()))
}

/// (row, col, re, im) with 1-based indices.
pub fn write_density_csv(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let header: Vec<String> = ["row", "col", "re", "im"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let d = rho.dim();
    let rows = (0..d * d).map(|k| {
        let (i, j) = (k / d, k % d);
        let z = rho.entries[[i, j]];
        vec![
            Cell::from(i + 1),
            Cell::from(j + 1),
            Cell::from(z.re),
            Cell::from(z.im),
        ]
    });
    io::write_csv(path, &header, rows)
}

pub fn read_density_csv(path: &Path) -> Result<Array2<C64>> {
    let t = io::read_csv(path)?;
    let rows = t.column_f64("row")?;
    let cols = t.column_f64("col")?;
    let re = t.column_f64("re")?;
    let im = t.column_f64("im")?;
    let d = (rows.len() as f64).sqrt().round() as usize;
    if d * d != rows.len() {
        return Err(Error::Parse(format!(
            "{} entries do not form a square matrix",
            rows.len()
        )));
    }
    let mut m = Array2::zeros((d, d));
    for k in 0..rows.len() {
        m[[rows[k] as usize - 1, cols[k] as usize - 1]] = C64::new(re[k], im[k]);
    }
    Ok(m)
}

/// (site, value) with 1-based sites.
pub fn write_profile_csv(path: &Path, diag: &[f64]) -> Result<()> {
    let header = vec!["site".to_string(), "value".to_string()];
    io::write_csv(
        path,
        &header,
        diag.iter()
            .enumerate()
            .map(|(i, v)| vec![Cell::from(i + 1), Cell::from(*v)]),
    )
}
