//! Dense in-memory reference fits used to check the streaming path.
//!
//! Everything here works on the raw design matrix: cross products are formed
//! with plain loops, inverses come from the adjugate (`p ≤ 3`) or from an
//! eigendecomposition computed by `nalgebra`, and variances come from explicit
//! residuals. Matrices are row-major `n × p` slices. Only `f64` is supported.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::estimators::{BoxCoxFit, FitResult, ModelKind, DEGENERATE_REL_TOL};
use crate::linalg::SymMatrix;

fn check_shape(x: &[f64], p: usize, y: &[f64]) -> Result<usize> {
    let n = y.len();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput);
    }
    if x.len() != n * p {
        return Err(Error::DimensionMismatch { expected: n * p, found: x.len() });
    }
    Ok(n)
}

/// `XᵀWX` and `XᵀWy` by explicit summation.
fn cross_products(x: &[f64], p: usize, y: &[f64], w: Option<&[f64]>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (i, row) in x.chunks_exact(p).enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        for a in 0..p {
            xty[a] += wi * row[a] * y[i];
            for b in 0..p {
                xtx[a][b] += wi * row[a] * row[b];
            }
        }
    }
    (xtx, xty)
}

fn rank_tol(p: usize) -> f64 {
    1e-12 * p as f64
}

/// Inverse of a symmetric matrix and whether a pseudo-inverse was needed.
fn dense_inverse(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, bool) {
    let p = a.len();
    let m = DMatrix::from_fn(p, p, |i, j| a[i][j]);
    let eig = SymmetricEigen::new(m);
    let wmax = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let singular = wmax == 0.0 || eig.eigenvalues.iter().any(|&v| v <= rank_tol(p) * wmax);
    if !singular && p <= 3 {
        return (adjugate_inverse(a), false);
    }
    let mut inv = vec![vec![0.0; p]; p];
    for k in 0..p {
        let w = eig.eigenvalues[k];
        if w.abs() <= rank_tol(p) * wmax || w == 0.0 {
            continue;
        }
        for i in 0..p {
            for j in 0..p {
                inv[i][j] += eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)] / w;
            }
        }
    }
    (inv, singular)
}

fn adjugate_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match a.len() {
        1 => vec![vec![1.0 / a[0][0]]],
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            vec![vec![a[1][1] / det, -a[0][1] / det], vec![-a[1][0] / det, a[0][0] / det]]
        }
        3 => {
            let c = |i: usize, j: usize| {
                let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
            };
            let det = a[0][0] * c(0, 0) + a[0][1] * c(0, 1) + a[0][2] * c(0, 2);
            (0..3).map(|i| (0..3).map(|j| c(j, i) / det).collect()).collect()
        }
        _ => unreachable!("adjugate inverse is only used for p <= 3"),
    }
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = b[0].len();
    a.iter().map(|r| (0..p).map(|j| r.iter().enumerate().map(|(k, v)| v * b[k][j]).sum()).collect()).collect()
}

fn to_sym(a: &[Vec<f64>], scale: f64) -> SymMatrix<f64> {
    SymMatrix::from_upper_fn(a.len(), |i, j| 0.5 * (a[i][j] + a[j][i]) * scale)
}

fn residuals(x: &[f64], p: usize, y: &[f64], beta: &[f64]) -> Vec<f64> {
    x.chunks_exact(p).zip(y).map(|(row, yi)| yi - row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).collect()
}

/// Applies the exact-fit clamp to a raw variance estimate.
fn clamp_variance(raw: f64, yty: f64, n: usize) -> (f64, bool) {
    if raw <= DEGENERATE_REL_TOL * yty / n as f64 {
        (0.0, true)
    } else {
        (raw, false)
    }
}

fn gaussian_loglik(n: usize, sigma2: f64, sse: f64) -> f64 {
    let nf = n as f64;
    -nf / 2.0 * (2.0 * std::f64::consts::PI * sigma2).ln() - sse / (2.0 * sigma2)
}

fn least_squares(x: &[f64], p: usize, y: &[f64], w: Option<&[f64]>) -> Result<(Vec<f64>, Vec<Vec<f64>>, bool)> {
    let (xtx, xty) = cross_products(x, p, y, w);
    if xtx.iter().flatten().chain(&xty).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross products".into()));
    }
    let (inv, generalized) = dense_inverse(&xtx);
    Ok((mat_vec(&inv, &xty), inv, generalized))
}

/// Ordinary least squares on raw data.
pub fn dense_ols(x: &[f64], p: usize, y: &[f64]) -> Result<FitResult<f64>> {
    let n = check_shape(x, p, y)?;
    let (beta, inv, generalized) = least_squares(x, p, y, None)?;
    let r = residuals(x, p, y, &beta);
    let sse: f64 = r.iter().map(|v| v * v).sum();
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let (sigma2, degenerate) = clamp_variance(sse / n as f64, yty, n);
    let score = if degenerate { f64::INFINITY } else { gaussian_loglik(n, sigma2, sse) };
    Ok(FitResult {
        kind: ModelKind::Linear,
        param: None,
        cov: to_sym(&inv, sigma2),
        n: n as u64,
        p,
        beta,
        sigma2,
        score,
        used_generalized_inverse: generalized,
        degenerate,
    })
}

/// Weighted least squares; `n` counts every row, including zero weights.
pub fn dense_weighted(x: &[f64], p: usize, y: &[f64], w: &[f64]) -> Result<FitResult<f64>> {
    let n = check_shape(x, p, y)?;
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    if let Some(&bad) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativeWeight(bad));
    }
    let (beta, inv, generalized) = least_squares(x, p, y, Some(w))?;
    let r = residuals(x, p, y, &beta);
    let sse: f64 = r.iter().zip(w).map(|(v, wi)| wi * v * v).sum();
    let wyy: f64 = y.iter().zip(w).map(|(v, wi)| wi * v * v).sum();
    let (sigma2, degenerate) = clamp_variance(sse / n as f64, wyy, n);
    Ok(FitResult {
        kind: ModelKind::Weighted,
        param: None,
        cov: to_sym(&inv, sigma2),
        n: n as u64,
        p,
        beta,
        sigma2,
        score: if degenerate { 0.0 } else { sse },
        used_generalized_inverse: generalized,
        degenerate,
    })
}

/// `(y^c − 1)/c` by direct powering, `ln y` at `c = 0`.
pub fn dense_boxcox_transform(y: f64, c: f64) -> f64 {
    if c == 0.0 {
        y.ln()
    } else {
        (y.powf(c) - 1.0) / c
    }
}

/// Box-Cox fits for every power in `grid`, each with its profile loglikelihood.
pub fn dense_boxcox(x: &[f64], p: usize, y: &[f64], grid: &[f64]) -> Result<Vec<BoxCoxFit<f64>>> {
    let n = check_shape(x, p, y)?;
    if let Some(&bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveResponse(bad));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let log_sum: f64 = y.iter().map(|v| v.ln()).sum();
    grid.iter()
        .map(|&c| {
            let yc: Vec<f64> = y.iter().map(|&v| dense_boxcox_transform(v, c)).collect();
            let base = dense_ols(x, p, &yc)?;
            let profile_loglik = if base.degenerate {
                f64::INFINITY
            } else {
                let sse: f64 = residuals(x, p, &yc, &base.beta).iter().map(|v| v * v).sum();
                gaussian_loglik(n, base.sigma2, sse) + (c - 1.0) * log_sum
            };
            let fit = FitResult { kind: ModelKind::BoxCox, param: Some(c), score: profile_loglik, ..base };
            Ok(BoxCoxFit { c, fit, profile_loglik })
        })
        .collect()
}

/// Ridge fit `(XᵀX + λI)⁻¹Xᵀy`. The variance is `yᵀ(y − Xβ)/n` and the
/// covariance the sandwich `σ²·A⁻¹XᵀXA⁻¹`.
pub fn dense_ridge(x: &[f64], p: usize, y: &[f64], lambda: f64) -> Result<FitResult<f64>> {
    let n = check_shape(x, p, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda));
    }
    let (xtx, xty) = cross_products(x, p, y, None);
    let mut a = xtx.clone();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let (inv, generalized) = dense_inverse(&a);
    let beta = mat_vec(&inv, &xty);
    let r = residuals(x, p, y, &beta);
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let raw = y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let (sigma2, degenerate) = clamp_variance(raw, yty, n);
    let sandwich = if lambda == 0.0 { inv.clone() } else { mat_mul(&mat_mul(&inv, &xtx), &inv) };
    let sse: f64 = if degenerate { 0.0 } else { r.iter().map(|v| v * v).sum() };
    let penalty = n as f64 * lambda * beta.iter().map(|b| b * b).sum::<f64>();
    Ok(FitResult {
        kind: ModelKind::Ridge,
        param: Some(lambda),
        cov: to_sym(&sandwich, sigma2),
        n: n as u64,
        p,
        beta,
        sigma2,
        score: sse + penalty,
        used_generalized_inverse: generalized,
        degenerate,
    })
}

/// In-sample mean squared error of `beta` on raw data.
pub fn dense_mse(x: &[f64], p: usize, y: &[f64], beta: &[f64]) -> Result<f64> {
    let n = check_shape(x, p, y)?;
    Ok(residuals(x, p, y, beta).iter().map(|v| v * v).sum::<f64>() / n as f64)
}
