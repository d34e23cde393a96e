//! Closed-form fits computed from sufficient statistics alone.
//!
//! Variances use the maximum-likelihood divisor `n`. When the residual
//! variance is indistinguishable from zero (`σ̂² ≤ 1e-12·Σy²/n`) the fit is
//! flagged degenerate: `σ̂²` is clamped to zero and a loglikelihood score
//! becomes `+∞`, so exact fits win any selection.
//!
//! The ridge estimator is `(Σxxᵀ + λI)⁻¹Σxy` and its reported score is
//! `‖y − Xβ‖² + nλ‖β‖²`. Note the estimator minimizes the `λ‖β‖²`-penalized
//! criterion, not the `nλ`-penalized one the score reports.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{NormalSolver, SymMatrix};
use crate::scalar::{dot, Scalar};
use crate::suffstats::{BoxCoxStats, LinRegStats, SuffStats, WeightedStats};

/// Relative threshold below which `σ̂²` is treated as an exact fit.
pub const DEGENERATE_REL_TOL: f64 = 1e-12;

/// Default stabilization threshold for ridge-trace selection.
pub const DEFAULT_TRACE_TAU: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Weighted,
    BoxCox,
    Ridge,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Weighted => "weighted",
            ModelKind::BoxCox => "boxcox",
            ModelKind::Ridge => "ridge",
        }
    }

    /// Whether `score` is a loglikelihood (higher is better) rather than an SSE.
    pub fn score_is_loglik(self) -> bool {
        matches!(self, ModelKind::Linear | ModelKind::BoxCox)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "weighted" => Ok(ModelKind::Weighted),
            "boxcox" => Ok(ModelKind::BoxCox),
            "ridge" => Ok(ModelKind::Ridge),
            other => Err(Error::Schema(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Estimated coefficients and inference quantities for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub kind: ModelKind,
    /// Box-Cox power `c` or ridge `λ`.
    pub param: Option<T>,
    pub beta: Vec<T>,
    pub sigma2: T,
    /// Estimated covariance of `beta`.
    pub cov: SymMatrix<T>,
    pub n: u64,
    pub p: usize,
    /// Loglikelihood for linear and Box-Cox fits, SSE for weighted and ridge fits.
    pub score: T,
    pub used_generalized_inverse: bool,
    pub degenerate: bool,
}

impl<T: Scalar> FitResult<T> {
    /// Square roots of the covariance diagonal.
    pub fn std_errors(&self) -> Vec<T> {
        self.cov.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
    }
}

/// Clamped variance `(s_yy − s_xyᵀβ)/n` and whether it was degenerate.
fn residual_variance<T: Scalar>(s_yy: T, s_xy: &[T], beta: &[T], n: u64) -> (T, bool) {
    let nf = T::from_u64(n).unwrap();
    let raw = (s_yy - dot(s_xy, beta)) / nf;
    if raw <= T::lit(DEGENERATE_REL_TOL) * s_yy / nf {
        (T::zero(), true)
    } else {
        (raw, false)
    }
}

/// `s_yy − 2·s_xyᵀβ + βᵀSβ`, the residual sum of squares at `β`.
fn sse_at<T: Scalar>(s_yy: T, s_xy: &[T], s_xx: &SymMatrix<T>, beta: &[T]) -> Result<T> {
    let two = T::lit(2.0);
    Ok(s_yy - two * dot(s_xy, beta) + s_xx.quad_form(beta)?)
}

fn gaussian_loglik<T: Scalar>(n: u64, sigma2: T, sse: T) -> Result<T> {
    if !(sigma2 > T::zero()) {
        return Err(Error::NonPositiveVariance(sigma2.to_f64_lossy()));
    }
    let nf = T::from_u64(n).unwrap();
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    Ok(-nf / T::lit(2.0) * (two_pi * sigma2).ln() - sse / (T::lit(2.0) * sigma2))
}

/// Gaussian loglikelihood of `(β, σ²)` expressed through the sums.
pub fn loglik_linear<T: Scalar>(ss: &LinRegStats<T>, beta: &[T], sigma2: T) -> Result<T> {
    let sse = sse_at(ss.s_yy(), ss.s_xy(), &ss.s_xx(), beta)?;
    gaussian_loglik(ss.n(), sigma2, sse)
}

fn require_data(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyAccumulator)
    } else {
        Ok(())
    }
}

pub fn fit_linear<T: Scalar>(ss: &LinRegStats<T>) -> Result<FitResult<T>> {
    require_data(ss.n())?;
    let s_xx = ss.s_xx();
    let solver = NormalSolver::factor(&s_xx)?;
    let beta = solver.solve(ss.s_xy())?;
    let (sigma2, degenerate) = residual_variance(ss.s_yy(), ss.s_xy(), &beta, ss.n());
    let score = if degenerate {
        T::infinity()
    } else {
        gaussian_loglik(ss.n(), sigma2, sse_at(ss.s_yy(), ss.s_xy(), &s_xx, &beta)?)?
    };
    Ok(FitResult {
        kind: ModelKind::Linear,
        param: None,
        cov: solver.inverse().scaled(sigma2),
        n: ss.n(),
        p: ss.p(),
        beta,
        sigma2,
        score,
        used_generalized_inverse: solver.used_generalized(),
        degenerate,
    })
}

pub fn fit_weighted<T: Scalar>(ss: &WeightedStats<T>) -> Result<FitResult<T>> {
    require_data(ss.n())?;
    let s_wxx = ss.s_wxx();
    let solver = NormalSolver::factor(&s_wxx)?;
    let beta = solver.solve(ss.s_wxy())?;
    let (sigma2, degenerate) = residual_variance(ss.s_wyy(), ss.s_wxy(), &beta, ss.n());
    let score = if degenerate {
        T::zero()
    } else {
        sse_at(ss.s_wyy(), ss.s_wxy(), &s_wxx, &beta)?.max(T::zero())
    };
    Ok(FitResult {
        kind: ModelKind::Weighted,
        param: None,
        cov: solver.inverse().scaled(sigma2),
        n: ss.n(),
        p: ss.p(),
        beta,
        sigma2,
        score,
        used_generalized_inverse: solver.used_generalized(),
        degenerate,
    })
}

/// One grid entry of a Box-Cox fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCoxFit<T> {
    pub c: T,
    /// `fit.score` carries the same profile loglikelihood.
    pub fit: FitResult<T>,
    pub profile_loglik: T,
}

/// Fits every power parameter of the grid, factoring `Σxxᵀ` once.
pub fn fit_boxcox_all<T: Scalar>(ss: &BoxCoxStats<T>) -> Result<Vec<BoxCoxFit<T>>> {
    require_data(ss.n())?;
    let s_xx = ss.s_xx();
    let solver = NormalSolver::factor(&s_xx)?;
    let inverse = solver.inverse();
    let used_generalized_inverse = solver.used_generalized();
    let mut out = Vec::with_capacity(ss.grid().len());
    for (k, &c) in ss.grid().iter().enumerate() {
        let (s_cyy, s_cxy) = (ss.s_cyy(k), ss.s_cxy(k));
        let beta = solver.solve(s_cxy)?;
        let (sigma2, degenerate) = residual_variance(s_cyy, s_cxy, &beta, ss.n());
        let profile_loglik = if degenerate {
            T::infinity()
        } else {
            let base = gaussian_loglik(ss.n(), sigma2, sse_at(s_cyy, s_cxy, &s_xx, &beta)?)?;
            base + (c - T::one()) * ss.s_logy()
        };
        out.push(BoxCoxFit {
            c,
            fit: FitResult {
                kind: ModelKind::BoxCox,
                param: Some(c),
                cov: inverse.scaled(sigma2),
                n: ss.n(),
                p: ss.p(),
                beta,
                sigma2,
                score: profile_loglik,
                used_generalized_inverse,
                degenerate,
            },
            profile_loglik,
        });
    }
    Ok(out)
}

/// Picks the grid entry with the largest profile loglikelihood. Ties prefer
/// the smaller `|c|`, then the smaller `c`; NaN scores rank last.
pub fn select_boxcox<T: Scalar>(results: &[BoxCoxFit<T>]) -> Result<&BoxCoxFit<T>> {
    let key = |r: &BoxCoxFit<T>| if r.profile_loglik.is_nan() { T::neg_infinity() } else { r.profile_loglik };
    results
        .iter()
        .min_by(|a, b| {
            key(b)
                .partial_cmp(&key(a))
                .unwrap_or(Ordering::Equal)
                .then(a.c.abs().partial_cmp(&b.c.abs()).unwrap_or(Ordering::Equal))
                .then(a.c.partial_cmp(&b.c).unwrap_or(Ordering::Equal))
        })
        .ok_or(Error::EmptyGrid)
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda.to_f64_lossy()));
    }
    Ok(())
}

pub fn fit_ridge<T: Scalar>(ss: &LinRegStats<T>, lambda: T) -> Result<FitResult<T>> {
    check_lambda(lambda)?;
    require_data(ss.n())?;
    let s_xx = ss.s_xx();
    let shrunk = if lambda == T::zero() { s_xx.clone() } else { s_xx.add_diagonal(lambda) };
    let solver = NormalSolver::factor(&shrunk)?;
    let beta = solver.solve(ss.s_xy())?;
    let (sigma2, degenerate) = residual_variance(ss.s_yy(), ss.s_xy(), &beta, ss.n());
    let inverse = solver.inverse();
    // at λ = 0 the sandwich A⁻¹SA⁻¹ collapses to A⁻¹
    let cov = if lambda == T::zero() { inverse } else { inverse.sandwich(&s_xx)? }.scaled(sigma2);
    let residual = if degenerate { T::zero() } else { sse_at(ss.s_yy(), ss.s_xy(), &s_xx, &beta)?.max(T::zero()) };
    let nf = T::from_u64(ss.n()).unwrap();
    let score = residual + nf * lambda * dot(&beta, &beta);
    Ok(FitResult {
        kind: ModelKind::Ridge,
        param: Some(lambda),
        cov,
        n: ss.n(),
        p: ss.p(),
        beta,
        sigma2,
        score,
        used_generalized_inverse: solver.used_generalized(),
        degenerate,
    })
}

/// Coefficient path over a grid of ridge parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeTrace<T> {
    /// One fit per grid entry, `λ` increasing; each row's `score` is its SSE.
    pub rows: Vec<FitResult<T>>,
    pub selected_index: usize,
    pub selected_lambda: T,
    pub tau: T,
    /// Set when no step along the grid stabilized below `tau`.
    pub warning: Option<String>,
}

impl<T> RidgeTrace<T> {
    pub const SELECTION_RULE: &'static str = "max-relative-step-below-tau";

    pub fn selected(&self) -> &FitResult<T> {
        &self.rows[self.selected_index]
    }
}

/// Ridge grids must be non-empty, non-negative and strictly increasing.
pub fn validate_ridge_grid<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &l in grid {
        check_lambda(l)?;
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("ridge grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Fits every `λ` from the same sums and selects the smallest `λ` whose step
/// to the next grid point moves no coefficient by `tau` or more, relative to
/// `max(1, |β_j|)`.
pub fn ridge_trace<T: Scalar>(ss: &LinRegStats<T>, grid: &[T], tau: T) -> Result<RidgeTrace<T>> {
    validate_ridge_grid(grid)?;
    let rows = grid.iter().map(|&l| fit_ridge(ss, l)).collect::<Result<Vec<_>>>()?;
    let stable = rows.windows(2).position(|w| {
        w[0].beta
            .iter()
            .zip(&w[1].beta)
            .map(|(&a, &b)| (b - a).abs() / a.abs().max(T::one()))
            .fold(T::zero(), T::max)
            < tau
    });
    let (selected_index, warning) = match stable {
        Some(i) => (i, None),
        None => (
            rows.len() - 1,
            Some(format!("ridge trace did not stabilize below tau={tau}; selected the largest lambda")),
        ),
    };
    Ok(RidgeTrace { selected_lambda: grid[selected_index], selected_index, rows, tau, warning })
}

/// `xᵀβ`, optionally mapped back through the inverse Box-Cox transform.
pub fn predict<T: Scalar>(fit: &FitResult<T>, x: &[T], inverse_transform: bool) -> Result<T> {
    if x.len() != fit.beta.len() {
        return Err(Error::DimensionMismatch { expected: fit.beta.len(), found: x.len() });
    }
    let yhat = dot(x, &fit.beta);
    match (fit.kind, fit.param, inverse_transform) {
        (ModelKind::BoxCox, Some(c), true) => inverse_boxcox(yhat, c),
        _ => Ok(yhat),
    }
}

pub fn inverse_boxcox<T: Scalar>(value: T, c: T) -> Result<T> {
    if c == T::zero() {
        return Ok(value.exp());
    }
    let base = c * value + T::one();
    if !(base > T::zero()) {
        return Err(Error::InverseTransformDomain { c: c.to_f64_lossy(), value: value.to_f64_lossy() });
    }
    Ok(base.powf(T::one() / c))
}

/// Mean squared error.
pub fn mse<T: Scalar>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), found: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sse = y_true.iter().zip(y_pred).fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v));
    Ok(sse / T::from_usize(y_true.len()).unwrap())
}
