pub mod dd;
pub mod dense_eig;
pub mod hungarian;
pub mod krylov;
pub mod ode;
pub mod sparse;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

pub use sparse::Csr;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn max_abs(a: ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn adjoint(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn hermitize(a: ArrayView2<C64>) -> Array2<C64> {
    (&a + &adjoint(a)) * C64::new(0.5, 0.0)
}

pub fn trace(a: ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn eigvalsh(a: ArrayView2<C64>) -> Result<Array1<f64>> {
    Ok(hermitize(a).eigvalsh(UPLO::Lower)?)
}

/// Trace norm Σ|eigenvalues| of the Hermitian part of `a`.
pub fn trace_norm_hermitian(a: ArrayView2<C64>) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().map(|x| x.abs()).sum())
}

/// Hilbert-Schmidt inner product tr(a† b).
pub fn hs_inner(a: ArrayView2<C64>, b: ArrayView2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Orthonormal Hermitian basis of d×d matrices: the d diagonal units, then
/// for each pair i<j (lexicographic) the symmetric and antisymmetric
/// combinations (|ij⟩+|ji⟩)/√2 and i(|ij⟩−|ji⟩)/√2.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    pub d: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianBasis {
    pub fn new(d: usize) -> Self {
        let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                pairs.push((i, j));
            }
        }
        HermitianBasis { d, pairs }
    }

    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    /// Nonzero entries `(row, col, value)` of basis element `alpha`.
    pub fn element(&self, alpha: usize) -> Vec<(usize, usize, C64)> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        if alpha < self.d {
            return vec![(alpha, alpha, ONE)];
        }
        let q = alpha - self.d;
        let (i, j) = self.pairs[q / 2];
        if q.is_multiple_of(2) {
            vec![(i, j, C64::new(s, 0.0)), (j, i, C64::new(s, 0.0))]
        } else {
            vec![(i, j, C64::new(0.0, s)), (j, i, C64::new(0.0, -s))]
        }
    }

    /// Coordinates tr(e_α X) of an arbitrary complex matrix; real for Hermitian X.
    pub fn coords(&self, x: ArrayView2<C64>) -> Array1<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = Array1::zeros(self.len());
        for i in 0..self.d {
            c[i] = x[[i, i]];
        }
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            let (a, b) = (x[[i, j]], x[[j, i]]);
            c[self.d + 2 * q] = (a + b) * s;
            c[self.d + 2 * q + 1] = (a - b) * C64::new(0.0, -s);
        }
        c
    }

    /// Real coordinates of the Hermitian part of `x`.
    pub fn coords_real(&self, x: ArrayView2<C64>, out: &mut [f64]) {
        let s = std::f64::consts::SQRT_2;
        for i in 0..self.d {
            out[i] = x[[i, i]].re;
        }
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            let z = (x[[i, j]] + x[[j, i]].conj()) * 0.5;
            out[self.d + 2 * q] = s * z.re;
            out[self.d + 2 * q + 1] = s * z.im;
        }
    }

    /// Σ_α c_α e_α for complex coefficients.
    pub fn matrix(&self, c: &[C64]) -> Array2<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = Array2::zeros((self.d, self.d));
        for i in 0..self.d {
            x[[i, i]] = c[i];
        }
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            let cs = c[self.d + 2 * q];
            let ca = c[self.d + 2 * q + 1];
            x[[i, j]] = (cs + I * ca) * s;
            x[[j, i]] = (cs - I * ca) * s;
        }
        x
    }
}

/// Row-major vectorization, vec(X)[i·d + j] = X[i, j].
pub fn vec_of(x: ArrayView2<C64>) -> Array1<C64> {
    Array1::from_iter(x.iter().copied())
}

pub fn unvec(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), v.to_vec()).expect("length d²")
}
