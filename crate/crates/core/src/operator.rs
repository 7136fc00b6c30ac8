//! Sparse operators on a register's state space. Compressed sparse rows with
//! complex entries; structural zeros are dropped on construction. Dense
//! conversion is available for small dimensions and for the reference paths.

use crate::linalg::{C64, ZERO};
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

#[derive(Debug, Clone)]
pub struct SpMat {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<C64>,
}

impl SpMat {
    pub fn zeros(dim: usize) -> Self {
        SpMat {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(
            dim,
            (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect(),
        )
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.iter()
                .enumerate()
                .map(|(i, &v)| (i, i, v))
                .collect(),
        )
    }

    /// Builds from (row, col, value) triplets; duplicates are summed, entries
    /// that cancel to zero are dropped.
    pub fn from_triplets(dim: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut row = 0usize;
        let mut i = 0usize;
        while i < t.len() {
            let (r, c, _) = t[i];
            assert!(r < dim && c < dim, "triplet out of bounds");
            while row < r {
                indptr.push(indices.len());
                row += 1;
            }
            let mut v = ZERO;
            let mut j = i;
            while j < t.len() && t[j].0 == r && t[j].1 == c {
                v += t[j].2;
                j += 1;
            }
            if v != ZERO {
                indices.push(c as u32);
                data.push(v);
            }
            i = j;
        }
        while row < dim {
            indptr.push(indices.len());
            row += 1;
        }
        SpMat {
            dim,
            indptr,
            indices,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.data[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn scale(&self, f: C64) -> SpMat {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= f;
        }
        out
    }

    pub fn add(&self, other: &SpMat) -> SpMat {
        assert_eq!(self.dim, other.dim);
        let mut t = self.triplets();
        t.extend(other.triplets());
        SpMat::from_triplets(self.dim, t)
    }

    pub fn dagger(&self) -> SpMat {
        SpMat::from_triplets(
            self.dim,
            self.triplets()
                .into_iter()
                .map(|(r, c, v)| (c, r, v.conj()))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1e-300);
        let d = self.dagger();
        let diff = self.add(&d.scale(C64::new(-1.0, 0.0)));
        diff.max_abs() <= tol * scale
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out[[i, j]] += v;
            }
        }
        out
    }

    /// y += f * A x
    pub fn matvec_acc(&self, f: C64, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = ZERO;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] += f * acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.matvec_acc(C64::new(1.0, 0.0), x, &mut y);
        y
    }

    /// Y += f * A X  (A sparse, X dense)
    pub fn spmm_left_acc(&self, f: C64, x: &ArrayView2<C64>, y: &mut ArrayViewMut2<C64>) {
        assert_eq!(x.nrows(), self.dim);
        for i in 0..self.dim {
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            for e in lo..hi {
                let k = self.indices[e] as usize;
                let c = f * self.data[e];
                let xr = x.row(k);
                let mut yr = y.row_mut(i);
                let xs = xr.as_slice().expect("contiguous row");
                let ys = yr.as_slice_mut().expect("contiguous row");
                for (yo, xo) in ys.iter_mut().zip(xs) {
                    *yo += c * xo;
                }
            }
        }
    }

    /// Y += f * X A  (X dense, A sparse)
    pub fn spmm_right_acc(&self, f: C64, x: &ArrayView2<C64>, y: &mut ArrayViewMut2<C64>) {
        assert_eq!(x.ncols(), self.dim);
        let n = x.nrows();
        for i in 0..n {
            let xr = x.row(i);
            let xs = xr.as_slice().expect("contiguous row");
            let mut yr = y.row_mut(i);
            let ys = yr.as_slice_mut().expect("contiguous row");
            for k in 0..self.dim {
                let xik = xs[k];
                if xik == ZERO {
                    continue;
                }
                let lo = self.indptr[k];
                let hi = self.indptr[k + 1];
                for e in lo..hi {
                    ys[self.indices[e] as usize] += f * xik * self.data[e];
                }
            }
        }
    }
}
