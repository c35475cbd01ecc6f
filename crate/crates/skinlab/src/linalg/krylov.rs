//! Restarted Arnoldi (Krylov–Schur style thick restart) for the eigenvalues
//! of largest real part of a large operator given only as a matvec.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, QR};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::ZERO;

#[derive(Debug, Clone)]
pub struct ArnoldiOptions {
    /// Number of wanted eigenvalues.
    pub nev: usize,
    /// Krylov subspace size before each restart.
    pub ncv: usize,
    /// Converged when the Ritz residual is below `tol · max(|θ|, scale)`.
    pub tol: f64,
    pub scale: f64,
    pub max_restarts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        ArnoldiOptions {
            nev: 4,
            ncv: 40,
            tol: 1e-9,
            scale: 1.0,
            max_restarts: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Wanted Ritz values, largest real part first.
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of largest real part of the linear map `apply(x, y): y = A x`
/// on Cⁿ. `project`, if given, is applied after every matvec (e.g. to stay
/// in an invariant subspace against roundoff).
pub fn arnoldi_rightmost<F, P>(
    n: usize,
    apply: F,
    project: P,
    start: &[C64],
    opts: &ArnoldiOptions,
) -> Result<ArnoldiResult>
where
    F: Fn(&[C64], &mut [C64]),
    P: Fn(&mut [C64]),
{
    let m = opts.ncv.min(n);
    let nev = opts.nev.min(m.saturating_sub(2)).max(1);
    // Keep a few more than wanted at each restart.
    let keep = (nev + (m - nev) / 2).min(m - 1);
    let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut x = start.to_vec();
    project(&mut x);
    let nx = norm(&x);
    if nx == 0.0 {
        return Err(Error::InvalidState("zero start vector".into()));
    }
    x.iter_mut().for_each(|z| *z /= nx);
    v.push(x);
    // A V_j = V_{j+1} G[..j+1, ..j]
    let mut g = Array2::<C64>::zeros((m + 1, m));
    let mut k = 0;
    let mut matvecs = 0;
    let mut w = vec![ZERO; n];
    let mut last_res = Vec::new();
    for restart in 0..=opts.max_restarts {
        for j in k..m {
            apply(&v[j], &mut w);
            project(&mut w);
            matvecs += 1;
            // Classical Gram–Schmidt, twice.
            for _ in 0..2 {
                let h: Vec<C64> = v.iter().map(|q| dot(q, &w)).collect();
                for (i, q) in v.iter().enumerate() {
                    let c = h[i];
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                    g[[i, j]] += c;
                }
            }
            // Roundoff from the subtraction is amplified by 1/β below.
            project(&mut w);
            let beta = norm(&w);
            g[[j + 1, j]] = C64::new(beta, 0.0);
            if beta < 1e-300 {
                return Err(Error::Linalg(
                    "Krylov breakdown: invariant subspace found".into(),
                ));
            }
            v.push(w.iter().map(|z| z / beta).collect());
        }
        let gm = g.slice(s![..m, ..m]).to_owned();
        let (theta, y) = gm.eig()?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            theta[b]
                .re
                .total_cmp(&theta[a].re)
                .then(theta[a].im.total_cmp(&theta[b].im))
        });
        let last = g.row(m).to_owned();
        let res: Vec<f64> = order
            .iter()
            .map(|&i| {
                let yi = y.column(i);
                let ny = yi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                last.iter()
                    .zip(yi.iter())
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
                    .norm()
                    / ny
            })
            .collect();
        last_res = res[..nev].to_vec();
        let converged =
            (0..nev).all(|q| res[q] <= opts.tol * theta[order[q]].norm().max(opts.scale));
        if converged || restart == opts.max_restarts {
            if !converged {
                return Err(Error::NoConvergence(last_res));
            }
            let values: Vec<C64> = order[..nev].iter().map(|&i| theta[i]).collect();
            let vectors = order[..nev]
                .iter()
                .map(|&i| {
                    let yi = y.column(i);
                    let mut out = vec![ZERO; n];
                    for (c, q) in yi.iter().zip(&v[..m]) {
                        out.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
                    }
                    let no = norm(&out);
                    out.iter_mut().for_each(|z| *z /= no);
                    out
                })
                .collect();
            return Ok(ArnoldiResult {
                values,
                vectors,
                residuals: last_res,
                matvecs,
                restarts: restart,
            });
        }
        // Thick restart on the span of the `keep` rightmost Ritz vectors,
        // which is invariant under G_m, so the Arnoldi-like relation survives.
        // A complex pair split at the boundary is harmless here.
        let mut yk = Array2::<C64>::zeros((m, keep));
        for (c, &i) in order[..keep].iter().enumerate() {
            yk.column_mut(c).assign(&y.column(i));
        }
        let (q, _) = yk.qr()?;
        let b = q.t().mapv(|z| z.conj()).dot(&gm).dot(&q);
        let brow: Array1<C64> = last.dot(&q);
        let mut nv: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        for c in 0..keep {
            let mut out = vec![ZERO; n];
            for (coef, vec) in q.column(c).iter().zip(&v[..m]) {
                out.iter_mut().zip(vec).for_each(|(a, bb)| *a += coef * bb);
            }
            nv.push(out);
        }
        nv.push(v.pop().expect("residual vector"));
        v = nv;
        g.fill(ZERO);
        g.slice_mut(s![..keep, ..keep]).assign(&b);
        g.slice_mut(s![keep, ..keep]).assign(&brow);
        k = keep;
    }
    Err(Error::NoConvergence(last_res))
}
