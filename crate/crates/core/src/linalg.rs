//! Small dense symmetric solves used by the regression routines.

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive-definite `n x n` matrix
/// stored row-major. Returns `None` when a pivot is not strictly positive
/// relative to `tol * max_diag`.
pub fn cholesky(a: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let floor = tol * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d.is_nan() || d <= floor {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Inverse of the matrix whose factor is `l`.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

/// Outcome of a symmetric solve.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// Diagonal jitter that had to be added, zero when none was needed.
    pub jitter: f64,
}

/// Relative pivot floor separating "singular" from "positive definite".
pub const PIVOT_TOL: f64 = 1e-13;

/// Solves a symmetric positive-semidefinite system. When the plain factorisation
/// fails, `1e-10 * max(1, max_diag)` is added to the diagonal and the result
/// reports the jitter used.
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Result<SpdSolution> {
    if let Some(l) = cholesky(a, n, PIVOT_TOL) {
        return Ok(SpdSolution {
            x: cholesky_solve(&l, n, b),
            jitter: 0.0,
        });
    }
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let jitter = 1e-10 * max_diag.max(1.0);
    let mut aj = a.to_vec();
    for i in 0..n {
        aj[i * n + i] += jitter;
    }
    let l = cholesky(&aj, n, 0.0)
        .ok_or_else(|| Error::RankDeficient("system not positive semidefinite".into()))?;
    Ok(SpdSolution {
        x: cholesky_solve(&l, n, b),
        jitter,
    })
}

/// Ordinary least squares with an explicit design, returning coefficients,
/// the residual variance estimate and the coefficient covariance.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub sigma2: f64,
    pub cov: Vec<f64>,
    pub residuals: Vec<f64>,
    pub p: usize,
}

impl OlsFit {
    pub fn se(&self, j: usize) -> f64 {
        self.cov[j * self.p + j].max(0.0).sqrt()
    }
}

/// OLS of `y` on the rows of `design` (each row already holds the intercept if
/// one is wanted). Fails on a rank-deficient design.
pub fn ols(design: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = design.len();
    let p = design.first().map_or(0, Vec::len);
    if n != y.len() {
        return Err(Error::Dimension(format!(
            "{n} design rows, {} responses",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::RankDeficient(format!("{n} rows for {p} regressors")));
    }
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in design.iter().zip(y) {
        for j in 0..p {
            xty[j] += row[j] * yi;
            for k in 0..=j {
                xtx[j * p + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            xtx[k * p + j] = xtx[j * p + k];
        }
    }
    // a standardised pivot check so column scale does not matter
    let scale: Vec<f64> = (0..p)
        .map(|j| xtx[j * p + j].sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut corr = xtx.clone();
    for j in 0..p {
        for k in 0..p {
            corr[j * p + k] /= scale[j] * scale[k];
        }
    }
    let lc = cholesky(&corr, p, 1e-10)
        .ok_or_else(|| Error::RankDeficient("collinear regressors".into()))?;
    let inv_corr = cholesky_inverse(&lc, p);
    let mut inv = vec![0.0; p * p];
    for j in 0..p {
        for k in 0..p {
            inv[j * p + k] = inv_corr[j * p + k] / (scale[j] * scale[k]);
        }
    }
    let coef: Vec<f64> = (0..p)
        .map(|j| (0..p).map(|k| inv[j * p + k] * xty[k]).sum())
        .collect();
    let residuals: Vec<f64> = design
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n - p) as f64;
    let cov = inv.iter().map(|v| v * sigma2).collect();
    Ok(OlsFit {
        coef,
        sigma2,
        cov,
        residuals,
        p,
    })
}
