//! Dense symmetric matrices and jittered Cholesky factorization.

use crate::error::{Error, Result};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        CovMatrix { n, data }
    }

    /// Takes a full row-major matrix; fails if it is not square or not exactly symmetric.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidModel(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidModel(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CovMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean_diagonal(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (0..self.n).map(|i| self.get(i, i)).sum::<f64>() / self.n as f64
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Estimate of the smallest eigenvalue by power iteration on `σI - C`,
    /// with `σ` a Gershgorin bound.
    pub fn min_eigenvalue_estimate(&self, iterations: usize) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let sigma = (0..n).map(|i| (0..n).map(|j| self.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
        let mut lambda = 0.0;
        let mut w = vec![0.0; n];
        for _ in 0..iterations {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            for i in 0..n {
                let row = &self.data[i * n..(i + 1) * n];
                w[i] = sigma * v[i] - dot(row, &v);
            }
            lambda = dot(&v, &w);
            std::mem::swap(&mut v, &mut w);
        }
        sigma - lambda
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = C + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for i in 4 * chunks..n {
        s0 += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3)
}

/// In-place row-oriented Cholesky of the lower triangle of `a` (row-major,
/// `n x n`); each inner product reads two contiguous rows.
/// Exactly zero pivots are accepted when the rest of their column is exactly
/// zero, so lattice points with zero variance need no jitter.
fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row = &mut rest[..n];
        for j in 0..i {
            let rj = &done[j * n..j * n + j + 1];
            let s = row[j] - dot(&row[..j], &rj[..j]);
            let d = rj[j];
            row[j] = if d > 0.0 {
                s / d
            } else if s == 0.0 {
                0.0
            } else {
                return Err(j);
            };
        }
        let s = row[i] - dot(&row[..i], &row[..i]);
        if s > 0.0 {
            row[i] = s.sqrt();
        } else if s == 0.0 {
            row[i] = 0.0;
        } else {
            return Err(i);
        }
        row[i + 1..].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

/// Jitter schedule relative to the mean diagonal: 0, then 1e-12 to 1e-6 by factors of 10.
pub fn jitter_schedule(mean_diagonal: f64) -> Vec<f64> {
    let scale = if mean_diagonal > 0.0 { mean_diagonal } else { 1.0 };
    std::iter::once(0.0).chain((0..=6).map(|k| scale * 10f64.powi(k - 12))).collect()
}

/// Factor `C + jitter·I`, escalating the jitter until the factorization succeeds.
pub fn factor_psd(c: &CovMatrix) -> Result<Factor> {
    let n = c.n;
    let schedule = jitter_schedule(c.mean_diagonal());
    for &jitter in &schedule {
        let mut a = c.data.clone();
        for i in 0..n {
            a[i * n + i] += jitter;
        }
        match cholesky_in_place(&mut a, n) {
            Ok(()) => {
                if jitter > 0.0 {
                    log::debug!("cholesky succeeded with jitter {jitter:e}");
                }
                return Ok(Factor { n, lower: a, jitter });
            }
            Err(col) => log::debug!("cholesky failed at column {col} with jitter {jitter:e}"),
        }
    }
    Err(Error::Factorization {
        jitter: *schedule.last().expect("non-empty"),
        min_eigenvalue: c.min_eigenvalue_estimate(500),
    })
}

impl Factor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// `L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = dot(&self.lower[i * self.n..i * self.n + i + 1], &z[..i + 1]);
        }
    }

    /// `|L Lᵀ - (C + jitter I)|_F / |C|_F`.
    pub fn reconstruction_error(&self, c: &CovMatrix) -> f64 {
        let n = self.n;
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = i.min(j) + 1;
                let llt = dot(&self.lower[i * n..i * n + k], &self.lower[j * n..j * n + k]);
                let target = c.get(i, j) + if i == j { self.jitter } else { 0.0 };
                num += (llt - target) * (llt - target);
            }
        }
        let den = c.frobenius();
        if den == 0.0 {
            num.sqrt()
        } else {
            num.sqrt() / den
        }
    }
}
