//! Dense and banded symmetric positive-definite solvers used by the
//! baselines. The dense factorization is blocked and leans on `dgemm` for
//! its trailing updates, which is where almost all of the flops are.

use crate::{BaselineError, Result};

const BLOCK: usize = 96;

/// In-place lower Cholesky factorization of a row-major symmetric matrix.
/// Only the lower triangle is read and written.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    assert_eq!(a.len(), n * n);
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + BLOCK).min(n);

        // Unblocked factor of the diagonal block plus its panel.
        for j in k0..k1 {
            let mut d = a[j * n + j];
            for k in k0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(BaselineError::Conditioning(format!(
                    "non-positive pivot {d:.3e} at column {j}"
                )));
            }
            let l = d.sqrt();
            a[j * n + j] = l;
            for i in j + 1..k1 {
                let mut s = a[i * n + j];
                for k in k0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / l;
            }
            for i in k1..n {
                let mut s = a[i * n + j];
                for k in k0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / l;
            }
        }

        // Trailing update C -= P Pᵀ, block-column by block-column so only
        // the lower trapezoid is touched.
        let panel_rows = n - k1;
        if panel_rows > 0 {
            let nb = k1 - k0;
            let mut j0 = k1;
            while j0 < n {
                let j1 = (j0 + BLOCK).min(n);
                let m = n - j0;
                let cols = j1 - j0;
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        nb,
                        cols,
                        -1.0,
                        a.as_ptr().add(j0 * n + k0),
                        n as isize,
                        1,
                        a.as_ptr().add(j0 * n + k0),
                        1,
                        n as isize,
                        1.0,
                        a.as_mut_ptr().add(j0 * n + j0),
                        n as isize,
                        1,
                    );
                }
                j0 = j1;
            }
        }
        k0 = k1;
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` given the Cholesky factor in the lower triangle.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    // Forward: L y = b.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    // Backward: Lᵀ x = y.
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Symmetric banded matrix stored by rows: entry (i, j) with
/// `0 <= i - j <= bandwidth` lives at `data[i * (bandwidth + 1) + (i - j)]`.
pub struct BandedSpd {
    pub n: usize,
    pub bandwidth: usize,
    pub data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, data: vec![0.0; n * (bandwidth + 1)] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        // Accumulate into the lower triangle.
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bandwidth);
        self.data[i * (self.bandwidth + 1) + (i - j)] += v;
    }

    /// In-place banded Cholesky.
    pub fn factor(&mut self) -> Result<()> {
        let bw = self.bandwidth;
        let stride = bw + 1;
        for j in 0..self.n {
            let start = j.saturating_sub(bw);
            let mut d = self.data[j * stride];
            for k in start..j {
                let v = self.data[j * stride + (j - k)];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(BaselineError::Conditioning(format!(
                    "banded factorization pivot {d:.3e} at column {j}"
                )));
            }
            let ljj = d.sqrt();
            self.data[j * stride] = ljj;
            let imax = (j + bw).min(self.n - 1);
            for i in j + 1..=imax {
                let istart = i.saturating_sub(bw).max(start);
                let mut s = self.data[i * stride + (i - j)];
                for k in istart..j {
                    s -= self.data[i * stride + (i - k)] * self.data[j * stride + (j - k)];
                }
                self.data[i * stride + (i - j)] = s / ljj;
            }
        }
        Ok(())
    }

    /// Solves with the factored matrix.
    pub fn solve(&self, b: &mut [f64]) {
        let bw = self.bandwidth;
        let stride = bw + 1;
        for i in 0..self.n {
            let start = i.saturating_sub(bw);
            let mut s = b[i];
            for k in start..i {
                s -= self.data[i * stride + (i - k)] * b[k];
            }
            b[i] = s / self.data[i * stride];
        }
        for i in (0..self.n).rev() {
            let end = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=end {
                s -= self.data[k * stride + (k - i)] * b[k];
            }
            b[i] = s / self.data[i * stride];
        }
    }
}
