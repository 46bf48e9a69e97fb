//! Small dense-vector helpers and a symmetric banded matrix with a banded
//! Cholesky factorization. Every operator assembled by the models is
//! symmetric with a narrow band, so this is all the linear algebra needed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|xi| *xi *= alpha);
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| if v.abs() > m { v.abs() } else { m })
}

/// Error-free transformation `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Veltkamp split of `a` into two 26-bit halves.
#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Error-free transformation `a·b = p + e` (Dekker).
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, al * bl - (((p - ah * bh) - al * bh) - ah * bl))
}

/// Sum of products evaluated as if in twice the working precision, so the
/// result is accurate relative to the sum itself rather than to the size of
/// the terms.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Dot2 {
    sum: f64,
    err: f64,
}

impl Dot2 {
    #[inline]
    pub(crate) fn add_prod(&mut self, a: f64, b: f64) {
        let (p, ep) = two_prod(a, b);
        let (s, es) = two_sum(self.sum, p);
        self.sum = s;
        self.err += ep + es;
    }

    #[inline]
    pub(crate) fn add(&mut self, a: f64) {
        let (s, es) = two_sum(self.sum, a);
        self.sum = s;
        self.err += es;
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.sum + self.err
    }
}

/// Symmetric matrix with `bandwidth` nonzero sub-diagonals. Only the lower
/// band is stored: `band[i * (bw + 1) + d]` holds `A[i][i - d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        SymBand {
            n,
            bw: bandwidth,
            band: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        (0..n).for_each(|i| m.add(i, i, 1.0));
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), 0);
        d.iter().enumerate().for_each(|(i, &v)| m.add(i, i, v));
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + d]
        }
    }

    /// Adds `value` to the symmetric pair `(i, j)`/`(j, i)`.
    ///
    /// Panics if the entry lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        assert!(d <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        self.band[i * (self.bw + 1) + d] += value;
    }

    /// `self + alpha * other`, widening the band as needed.
    pub fn add_scaled(&self, alpha: f64, other: &SymBand) -> SymBand {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBand::zeros(self.n, bw);
        for i in 0..self.n {
            for d in 0..=bw.min(i) {
                let v = self.get(i, i - d) + alpha * other.get(i, i - d);
                out.band[i * (bw + 1) + d] = v;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..=self.bw.min(i) {
                let a = row[d];
                if a != 0.0 {
                    y[i] += a * x[i - d];
                    y[i - d] += a * x[i];
                }
            }
        }
    }

    /// Row-compressed copy holding only the nonzero entries.
    pub fn compress(&self) -> SparseSym {
        let w = self.bw + 1;
        let mut row_start = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.n {
            row_start.push(cols.len());
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n.saturating_sub(1));
            for j in lo..=hi {
                let a = if j <= i {
                    self.band[i * w + (i - j)]
                } else {
                    self.band[j * w + (j - i)]
                };
                if a != 0.0 {
                    cols.push(j);
                    vals.push(a);
                }
            }
        }
        row_start.push(cols.len());
        SparseSym {
            row_start,
            cols,
            vals,
        }
    }

    /// Banded Cholesky factorization `A = L Lᵀ`. Fails if `A` is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.band.clone();
        for j in 0..n {
            // diagonal
            let mut s = l[j * w];
            for k in 1..=bw.min(j) {
                let v = l[j * w + k];
                s -= v * v;
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Internal(alloc::format!(
                    "matrix is not positive definite (pivot {j} = {s:e})"
                )));
            }
            let d = libm::sqrt(s);
            l[j * w] = d;
            // column below the diagonal
            for i in j + 1..(j + 1 + bw).min(n) {
                let mut s = l[i * w + (i - j)];
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Symmetric matrix stored by full rows, used where products must be
/// summed in compensated arithmetic: banded difference operators cancel
/// heavily on smooth vectors, and compensation keeps the rounding error
/// relative to the result instead of to the individual terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.row_start.len() - 1
    }

    fn row(&self, i: usize, x: &[f64], mut acc: Dot2, sign: f64) -> f64 {
        for k in self.row_start[i]..self.row_start[i + 1] {
            acc.add_prod(sign * self.vals[k], x[self.cols[k]]);
        }
        acc.value()
    }

    pub fn mul_vec_accurate(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.row(i, x, Dot2::default(), 1.0))
            .collect()
    }

    /// `b − A x`
    pub fn residual_accurate(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let mut acc = Dot2::default();
                acc.add(b[i]);
                self.row(i, x, acc, -1.0)
            })
            .collect()
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        // L y = b
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        // Lᵀ x = y
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + 1 + self.bw).min(self.n) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}
