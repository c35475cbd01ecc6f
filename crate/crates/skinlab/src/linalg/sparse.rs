use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64 as C64;

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    /// Drops exact zeros; column order within a row is ascending.
    pub fn from_dense(a: ArrayView2<C64>) -> Self {
        let (nrows, ncols) = a.dim();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = a[[i, j]];
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Builds from unsorted triplets, summing duplicates and dropping zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<C64> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (i, j, v) in trip {
            if let (Some(&li), Some(&lj)) = (rows.last(), indices.last()) {
                if li == i && lj == j {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            indices.push(j);
            data.push(v);
        }
        let zero = C64::new(0.0, 0.0);
        let keep: Vec<usize> = (0..data.len()).filter(|&k| data[k] != zero).collect();
        let indices: Vec<usize> = keep.iter().map(|&k| indices[k]).collect();
        let rows: Vec<usize> = keep.iter().map(|&k| rows[k]).collect();
        let data: Vec<C64> = keep.iter().map(|&k| data[k]).collect();
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.data[r].iter().copied())
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[[i, j]] += v;
            }
        }
        a
    }

    /// Rows that hold at least one entry.
    pub fn occupied_rows(&self) -> Vec<usize> {
        (0..self.nrows)
            .filter(|&i| self.indptr[i + 1] > self.indptr[i])
            .collect()
    }

    /// out += alpha * self * x
    pub fn mul_dense_acc(&self, alpha: C64, x: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        let n = x.ncols();
        for i in 0..self.nrows {
            let mut orow = out.row_mut(i);
            for (k, v) in self.row(i) {
                let a = alpha * v;
                let xr = x.row(k);
                for c in 0..n {
                    orow[c] += a * xr[c];
                }
            }
        }
    }

    /// out += alpha * x * self^dagger
    pub fn dense_mul_adj_acc(&self, alpha: C64, x: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        for r in 0..x.nrows() {
            let xr = x.row(r);
            let mut orow = out.row_mut(r);
            for c in 0..self.nrows {
                let mut s = C64::new(0.0, 0.0);
                for (e, v) in self.row(c) {
                    s += xr[e] * v.conj();
                }
                orow[c] += alpha * s;
            }
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let t = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v.conj()))
            .collect();
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn matmul(&self, other: &Csr) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push((i, j, a * b));
                }
            }
        }
        Csr::from_triplets(self.nrows, other.ncols, t)
    }

    /// self + alpha * other
    pub fn add_scaled(&self, alpha: C64, other: &Csr) -> Self {
        let mut t = self.triplets();
        t.extend(
            other
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (i, j, alpha * v)),
        );
        Csr::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }
}
