//! Minimal dense complex matrices for the separable map kernels.

use crate::{Complex64, Exec};

#[derive(Clone, Debug)]
pub(crate) struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    /// `self * rhs`. Rows of the product are independent work items; each is
    /// accumulated over the inner index in ascending order.
    pub fn matmul(&self, rhs: &CMat, exec: Exec) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        if rhs.cols == 0 {
            return out;
        }
        exec.for_each_chunk_mut(&mut out.data, rhs.cols, |r, dst| {
            for (l, &a) in self.row(r).iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                axpy(a, rhs.row(l), dst);
            }
        });
        out
    }
}

#[inline]
pub(crate) fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive() {
        let a = CMat::from_fn(3, 4, |r, c| Complex64::new(r as f64 + 1.0, c as f64 - 2.0));
        let b = CMat::from_fn(4, 2, |r, c| Complex64::new((r * c) as f64, 1.0));
        for exec in [Exec::Sequential, Exec::Parallel] {
            let p = a.matmul(&b, exec);
            for r in 0..3 {
                for c in 0..2 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for l in 0..4 {
                        s += a.get(r, l) * b.get(l, c);
                    }
                    assert!((p.get(r, c) - s).norm() < 1e-12);
                }
            }
        }
    }
}
