//! Dense complex kernels: LU factorization with partial pivoting and the
//! matrix exponential.
//!
//! The LU factor stores real and imaginary parts in separate row-major
//! buffers so the elimination inner loop is a pair of plain `f64` axpys.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization `P·A = L·U` of a square complex matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    /// Factorizes `a`. A pivot below `n·ε·max|aᵢⱼ|` is reported as singular.
    pub fn new(a: &Array2<Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
        }
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        let mut scale = 0.0_f64;
        for z in a.iter() {
            re.push(z.re);
            im.push(z.im);
            scale = scale.max(z.re.abs() + z.im.abs());
        }
        let tiny = (n as f64) * f64::EPSILON * scale;
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut p = k;
            let mut best = -1.0;
            for i in k..n {
                let m = re[i * n + k].abs() + im[i * n + k].abs();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::DegenerateSteadyState { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    re.swap(k * n + j, p * n + j);
                    im.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (pr, pi) = (re[k * n + k], im[k * n + k]);
            let den = pr * pr + pi * pi;
            let (inv_r, inv_i) = (pr / den, -pi / den);

            let (re_top, re_bot) = re.split_at_mut((k + 1) * n);
            let (im_top, im_bot) = im.split_at_mut((k + 1) * n);
            let urow_re = &re_top[k * n + k + 1..(k + 1) * n];
            let urow_im = &im_top[k * n + k + 1..(k + 1) * n];
            for (row_re, row_im) in re_bot.chunks_exact_mut(n).zip(im_bot.chunks_exact_mut(n)) {
                let (ar, ai) = (row_re[k], row_im[k]);
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let lr = ar * inv_r - ai * inv_i;
                let li = ar * inv_i + ai * inv_r;
                row_re[k] = lr;
                row_im[k] = li;
                let tail_re = &mut row_re[k + 1..];
                let tail_im = &mut row_im[k + 1..];
                for j in 0..tail_re.len() {
                    let (ur, ui) = (urow_re[j], urow_im[j]);
                    tail_re[j] -= lr * ur - li * ui;
                    tail_im[j] -= lr * ui + li * ur;
                }
            }
        }
        Ok(Self { n, re, im, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &Array1<Complex64>) -> Result<Array1<Complex64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut xr: Vec<f64> = self.perm.iter().map(|&p| b[p].re).collect();
        let mut xi: Vec<f64> = self.perm.iter().map(|&p| b[p].im).collect();
        for i in 0..n {
            let (mut sr, mut si) = (xr[i], xi[i]);
            let row = i * n;
            for j in 0..i {
                let (lr, li) = (self.re[row + j], self.im[row + j]);
                sr -= lr * xr[j] - li * xi[j];
                si -= lr * xi[j] + li * xr[j];
            }
            xr[i] = sr;
            xi[i] = si;
        }
        for i in (0..n).rev() {
            let (mut sr, mut si) = (xr[i], xi[i]);
            let row = i * n;
            for j in i + 1..n {
                let (ur, ui) = (self.re[row + j], self.im[row + j]);
                sr -= ur * xr[j] - ui * xi[j];
                si -= ur * xi[j] + ui * xr[j];
            }
            let (dr, di) = (self.re[row + i], self.im[row + i]);
            let den = dr * dr + di * di;
            xr[i] = (sr * dr + si * di) / den;
            xi[i] = (si * dr - sr * di) / den;
        }
        Ok(xr.into_iter().zip(xi).map(|(r, i)| Complex64::new(r, i)).collect())
    }
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(a: &Array2<Complex64>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));

    // ‖scaled‖ ≤ 1/2, so 20 terms put the remainder below 1e-22.
    let mut result = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::eye(n);
    for k in 1..=20 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}
