//! Dense row-major matrices and the batched matrix-vector kernel that the
//! recurrent dynamics spend nearly all of their time in.
//!
//! The kernel multiplies one matrix against a small batch of vectors per pass
//! over the matrix. Recurrent weight matrices at the sizes used here do not fit
//! in L2, so streaming the matrix once for several trajectories is what keeps
//! Benettin pairs and multi-gain sweeps affordable.

use std::sync::OnceLock;

/// Owned row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Borrowed row-major matrix (possibly a row block of a larger one).
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    rows: usize,
    cols: usize,
    data: &'a [f64],
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn view(&self) -> MatRef<'_> {
        MatRef {
            rows: self.rows,
            cols: self.cols,
            data: &self.data,
        }
    }

    /// Rows `start..start + len` as a view.
    pub fn row_block(&self, start: usize, len: usize) -> MatRef<'_> {
        self.view().row_block(start, len)
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl<'a> MatRef<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_block(&self, start: usize, len: usize) -> MatRef<'a> {
        assert!(start + len <= self.rows, "row block out of range");
        MatRef {
            rows: len,
            cols: self.cols,
            data: &self.data[start * self.cols..(start + len) * self.cols],
        }
    }

    pub fn to_owned(&self) -> Mat {
        Mat::from_vec(self.rows, self.cols, self.data.to_vec())
    }

    /// `y = A x` for a single vector.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        mul_batch(*self, x, 1, y);
    }
}

/// `out[r * batch + j] = sum_c a[r, c] * xs[j * a.cols + c]`.
///
/// `xs` holds `batch` vectors of length `a.cols()` back to back; `out` is the
/// `a.rows() x batch` product in row-major order.
pub fn mul_batch(a: MatRef<'_>, xs: &[f64], batch: usize, out: &mut [f64]) {
    assert_eq!(xs.len(), batch * a.cols, "input batch has wrong length");
    assert_eq!(out.len(), batch * a.rows, "output batch has wrong length");
    if batch == 0 || a.rows == 0 {
        return;
    }
    let mut j0 = 0;
    while j0 < batch {
        let group = (batch - j0).min(4);
        let xg = &xs[j0 * a.cols..(j0 + group) * a.cols];
        match group {
            1 => dispatch::<1>(a, xg, out, batch, j0),
            2 => dispatch::<2>(a, xg, out, batch, j0),
            3 => dispatch::<3>(a, xg, out, batch, j0),
            _ => dispatch::<4>(a, xg, out, batch, j0),
        }
        j0 += group;
    }
}

fn simd_available() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma")
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    })
}

fn dispatch<const K: usize>(a: MatRef<'_>, xs: &[f64], out: &mut [f64], stride: usize, j0: usize) {
    #[cfg(target_arch = "x86_64")]
    if simd_available() {
        // SAFETY: avx2 and fma were detected at runtime.
        unsafe { x86::kernel::<K>(a, xs, out, stride, j0) };
        return;
    }
    portable_kernel::<K>(a, xs, out, stride, j0);
}

fn portable_kernel<const K: usize>(
    a: MatRef<'_>,
    xs: &[f64],
    out: &mut [f64],
    stride: usize,
    j0: usize,
) {
    let n = a.cols;
    let nc = n / 4 * 4;
    for r in 0..a.rows {
        let row = a.row(r);
        for j in 0..K {
            let x = &xs[j * n..(j + 1) * n];
            let mut acc = [0.0f64; 4];
            for (rc, xc) in row[..nc].chunks_exact(4).zip(x[..nc].chunks_exact(4)) {
                for l in 0..4 {
                    acc[l] += rc[l] * xc[l];
                }
            }
            let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for c in nc..n {
                s += row[c] * x[c];
            }
            out[r * stride + j0 + j] = s;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use super::MatRef;
    use std::arch::x86_64::*;

    #[inline(always)]
    unsafe fn hsum(v: __m256d) -> f64 {
        let mut t = [0.0f64; 4];
        _mm256_storeu_pd(t.as_mut_ptr(), v);
        (t[0] + t[1]) + (t[2] + t[3])
    }

    /// Register-blocked 4 rows x K vectors, 4 lanes per FMA.
    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn kernel<const K: usize>(
        a: MatRef<'_>,
        xs: &[f64],
        out: &mut [f64],
        stride: usize,
        j0: usize,
    ) {
        let n = a.cols;
        let m = a.rows;
        let nc = n / 4 * 4;
        let ap = a.data.as_ptr();
        let xp = xs.as_ptr();
        let mut r = 0;
        while r + 4 <= m {
            let mut acc = [[_mm256_setzero_pd(); K]; 4];
            let mut c = 0;
            while c < nc {
                let a0 = _mm256_loadu_pd(ap.add(r * n + c));
                let a1 = _mm256_loadu_pd(ap.add((r + 1) * n + c));
                let a2 = _mm256_loadu_pd(ap.add((r + 2) * n + c));
                let a3 = _mm256_loadu_pd(ap.add((r + 3) * n + c));
                for j in 0..K {
                    let x = _mm256_loadu_pd(xp.add(j * n + c));
                    acc[0][j] = _mm256_fmadd_pd(a0, x, acc[0][j]);
                    acc[1][j] = _mm256_fmadd_pd(a1, x, acc[1][j]);
                    acc[2][j] = _mm256_fmadd_pd(a2, x, acc[2][j]);
                    acc[3][j] = _mm256_fmadd_pd(a3, x, acc[3][j]);
                }
                c += 4;
            }
            for q in 0..4 {
                let row = &a.data[(r + q) * n..(r + q + 1) * n];
                for j in 0..K {
                    let mut s = hsum(acc[q][j]);
                    for cc in nc..n {
                        s += row[cc] * xs[j * n + cc];
                    }
                    out[(r + q) * stride + j0 + j] = s;
                }
            }
            r += 4;
        }
        while r < m {
            let mut acc = [_mm256_setzero_pd(); K];
            let mut c = 0;
            while c < nc {
                let a0 = _mm256_loadu_pd(ap.add(r * n + c));
                for j in 0..K {
                    let x = _mm256_loadu_pd(xp.add(j * n + c));
                    acc[j] = _mm256_fmadd_pd(a0, x, acc[j]);
                }
                c += 4;
            }
            let row = &a.data[r * n..(r + 1) * n];
            for j in 0..K {
                let mut s = hsum(acc[j]);
                for cc in nc..n {
                    s += row[cc] * xs[j * n + cc];
                }
                out[r * stride + j0 + j] = s;
            }
            r += 1;
        }
    }
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
