//! Dense complex vectors and matrices.
//!
//! Everything in the inversion is expressed through a handful of primitives:
//! Hermitian inner products, squared norms, axpy updates and dense
//! matrix-vector products with a matrix or its adjoint. Reductions always run
//! in a fixed order so results are bit-reproducible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// `u^H v`.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = [ZERO; 4];
    let chunks = u.len() / 4;
    for c in 0..chunks {
        let b = 4 * c;
        for l in 0..4 {
            acc[l] += u[b + l].conj() * v[b + l];
        }
    }
    let mut tail = ZERO;
    for k in 4 * chunks..u.len() {
        tail += u[k].conj() * v[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Re(u^H v)`.
pub fn re_dot(u: &[C64], v: &[C64]) -> f64 {
    dot(u, v).re
}

pub fn norm_sq(v: &[C64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.len() / 4;
    for c in 0..chunks {
        let b = 4 * c;
        for l in 0..4 {
            acc[l] += v[b + l].norm_sqr();
        }
    }
    let mut tail = 0.0;
    for z in &v[4 * chunks..] {
        tail += z.norm_sqr();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sq(v).sqrt()
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `y += a x` for a real scalar.
pub fn axpy_re(a: f64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

pub fn scale(a: f64, v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z * a).collect()
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn add(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a + b).collect()
}

/// Entrywise product `u ⊙ v`.
pub fn hadamard(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a * b).collect()
}

/// Entrywise `conj(u) ⊙ v`.
pub fn conj_hadamard(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).collect()
}

pub fn is_all_zero(v: &[C64]) -> bool {
    v.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Rows at or above this size are split across the rayon pool.
const PARALLEL_ROWS: usize = 64;

/// Dense row-major complex matrix that keeps its conjugate transpose alongside,
/// so both `A v` and `A^H v` run as contiguous row sweeps.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
    adjoint: Vec<C64>,
}

impl DenseMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        let mut adjoint = vec![ZERO; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                adjoint[c * rows + r] = data[r * cols + c].conj();
            }
        }
        Self {
            rows,
            cols,
            data,
            adjoint,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `A v`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in A v");
        sweep(&self.data, self.cols, self.rows, v)
    }

    /// `A^H v`.
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.rows, "dimension mismatch in A^H v");
        sweep(&self.adjoint, self.rows, self.cols, v)
    }

    /// Column sums of `|A|^2`, i.e. `diag(A^H A)`.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                self.adjoint[c * self.rows..(c + 1) * self.rows]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// `|A|^T u` for the entrywise squared modulus `|A|^2` and a real vector `u`.
    pub fn abs_sq_transpose_apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows);
        (0..self.cols)
            .map(|c| {
                self.adjoint[c * self.rows..(c + 1) * self.rows]
                    .iter()
                    .zip(u)
                    .map(|(z, w)| z.norm_sqr() * w)
                    .sum()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|k| self.get(k, k)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

fn sweep(data: &[C64], width: usize, height: usize, v: &[C64]) -> Vec<C64> {
    if height >= PARALLEL_ROWS && rayon::current_num_threads() > 1 {
        data.par_chunks(width).map(|row| dot_unconj(row, v)).collect()
    } else {
        data.chunks(width).map(|row| dot_unconj(row, v)).collect()
    }
}

/// `sum_k a_k b_k` without conjugation, four-way unrolled.
fn dot_unconj(a: &[C64], b: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let base = 4 * c;
        for l in 0..4 {
            let x = a[base + l];
            let y = b[base + l];
            re[l] += x.re * y.re - x.im * y.im;
            im[l] += x.re * y.im + x.im * y.re;
        }
    }
    let mut tail = ZERO;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    C64::new(
        (re[0] + re[1]) + (re[2] + re[3]) + tail.re,
        (im[0] + im[1]) + (im[2] + im[3]) + tail.im,
    )
}

/// LU factorization of a square system, reused across right-hand sides.
pub struct LuSolver {
    lu: nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl LuSolver {
    /// Factorizes `a`; fails when a pivot vanishes or the pivot spread
    /// indicates numerical singularity.
    pub fn new(a: DMatrix<C64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let lu = a.lu();
        let u = lu.u();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..n {
            let d = u[(k, k)].norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !condition.is_finite() || condition > 1e14 {
            return Err(Error::SingularSystem { condition });
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        assert_eq!(rhs.len(), self.n);
        let b = nalgebra::DVector::from_column_slice(rhs);
        let x = self
            .lu
            .solve(&b)
            .ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
        Ok(x.iter().copied().collect())
    }
}
