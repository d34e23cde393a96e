//! Sufficient-statistics accumulators.
//!
//! Every accumulator is a fixed-size set of additive sums over rows, so
//! shards can be accumulated independently and combined with [`SuffStats::merge`],
//! or removed again with [`SuffStats::subtract`]. Sums use plain `T` arithmetic
//! in row order (no compensated summation).
//!
//! Batch updates form `XᵀX` with a dense GEMM; the upper triangle of the Gram
//! buffer is authoritative and mirrored on read.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

/// Batch size used when none is configured.
pub const DEFAULT_BATCH_SIZE: usize = 128;

/// Operations common to all accumulators.
pub trait SuffStats: Sized {
    /// Number of observations folded in.
    fn n(&self) -> u64;
    /// Feature dimension.
    fn p(&self) -> usize;
    /// Fieldwise sum of two accumulators over the same feature space.
    fn merge(&self, other: &Self) -> Result<Self>;
    /// Fieldwise difference; removes a previously merged shard.
    fn subtract(&self, other: &Self) -> Result<Self>;
}

/// `y^(c)`: `(y^c − 1)/c` for `c ≠ 0`, `log y` for `c = 0`.
pub fn boxcox_transform<T: Scalar>(y: T, c: T) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::NonPositiveResponse(y.to_f64_lossy()));
    }
    Ok(boxcox_from_log(y, y.ln(), c))
}

/// Transform given a precomputed `log y`. `expm1` keeps `(y^c − 1)/c` accurate as `c → 0`.
#[inline]
fn boxcox_from_log<T: Scalar>(y: T, log_y: T, c: T) -> T {
    if c == T::zero() {
        log_y
    } else if c == T::one() {
        y - T::one()
    } else {
        (c * log_y).exp_m1() / c
    }
}

/// Accumulated `Σ xᵢxᵢᵀ`, upper triangle authoritative.
#[derive(Debug, Clone)]
struct Gram<T> {
    p: usize,
    full: Vec<T>,
}

impl<T: PartialEq> PartialEq for Gram<T> {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && (0..self.p).all(|i| self.full[i * self.p + i..(i + 1) * self.p] == other.full[i * self.p + i..(i + 1) * self.p])
    }
}

impl<T: Scalar> Gram<T> {
    fn new(p: usize) -> Self {
        Self { p, full: vec![T::zero(); p * p] }
    }

    fn from_sym(s: &SymMatrix<T>) -> Self {
        Self { p: s.dim(), full: s.as_slice().to_vec() }
    }

    #[inline]
    fn add_row(&mut self, x: &[T], w: T) {
        let p = self.p;
        for i in 0..p {
            let xi = w * x[i];
            if xi == T::zero() {
                continue;
            }
            let row = &mut self.full[i * p + i..(i + 1) * p];
            for (s, &xj) in row.iter_mut().zip(&x[i..]) {
                *s += xi * xj;
            }
        }
    }

    /// `+= Xᵀ·B` where `b_rows` is `m×p` (X itself, or W·X).
    fn add_batch(&mut self, x: &[T], b_rows: &[T], m: usize) {
        T::gemm_tn_acc(m, self.p, self.p, x, b_rows, &mut self.full);
    }

    fn to_sym(&self) -> SymMatrix<T> {
        SymMatrix::from_upper_of(self.p, &self.full)
    }

    fn combine(&self, other: &Self, sign: T) -> Self {
        let p = self.p;
        let mut out = Self::new(p);
        for i in 0..p {
            for j in i..p {
                let v = self.full[i * p + j] + sign * other.full[i * p + j];
                out.full[i * p + j] = v;
                out.full[j * p + i] = v;
            }
        }
        out
    }
}

fn check_batch<T>(x: &[T], y_len: usize, p: usize) -> Result<usize> {
    if p == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    if x.len() % p != 0 {
        return Err(Error::DimensionMismatch { expected: p, found: x.len() % p });
    }
    let m = x.len() / p;
    if m != y_len {
        return Err(Error::DimensionMismatch { expected: m, found: y_len });
    }
    Ok(m)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn axpy<T: Scalar>(acc: &mut [T], x: &[T], a: T) {
    for (s, &v) in acc.iter_mut().zip(x) {
        *s += a * v;
    }
}

fn combine_vec<T: Scalar>(a: &[T], b: &[T], sign: T) -> Vec<T> {
    a.iter().zip(b).map(|(&u, &v)| u + sign * v).collect()
}

fn checked_counts(a: u64, b: u64, subtracting: bool) -> Result<u64> {
    if subtracting {
        a.checked_sub(b).ok_or(Error::NegativeCount { left: a, right: b })
    } else {
        Ok(a + b)
    }
}

/// Sums for ordinary least squares: `(n, Σy², Σxy, Σxxᵀ)`. Also the ridge statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegStats<T> {
    n: u64,
    s_yy: T,
    s_xy: Vec<T>,
    gram: Gram<T>,
}

/// Ridge regression reuses the least-squares sums unchanged.
pub type RidgeStats<T> = LinRegStats<T>;

impl<T: Scalar> LinRegStats<T> {
    pub fn new(p: usize) -> Self {
        Self { n: 0, s_yy: T::zero(), s_xy: vec![T::zero(); p], gram: Gram::new(p) }
    }

    pub fn from_parts(n: u64, s_yy: T, s_xy: Vec<T>, s_xx: SymMatrix<T>) -> Result<Self> {
        check_len(s_xx.dim(), s_xy.len())?;
        Ok(Self { n, s_yy, s_xy, gram: Gram::from_sym(&s_xx) })
    }

    pub fn s_yy(&self) -> T {
        self.s_yy
    }

    pub fn s_xy(&self) -> &[T] {
        &self.s_xy
    }

    pub fn s_xx(&self) -> SymMatrix<T> {
        self.gram.to_sym()
    }

    pub fn update_row(&mut self, x: &[T], y: T) -> Result<()> {
        check_len(self.p(), x.len())?;
        self.n += 1;
        self.s_yy += y * y;
        axpy(&mut self.s_xy, x, y);
        self.gram.add_row(x, T::one());
        Ok(())
    }

    /// Folds in an `m×p` row-major batch.
    pub fn update_batch(&mut self, x: &[T], y: &[T]) -> Result<()> {
        let p = self.p();
        let m = check_batch(x, y.len(), p)?;
        if m <= 1 {
            return x.chunks_exact(p).zip(y).try_for_each(|(row, &yi)| self.update_row(row, yi));
        }
        self.n += m as u64;
        self.s_yy += y.iter().fold(T::zero(), |a, &v| a + v * v);
        T::gemm_tn_acc(m, p, 1, x, y, &mut self.s_xy);
        self.gram.add_batch(x, x, m);
        Ok(())
    }
}

impl<T: Scalar> SuffStats for LinRegStats<T> {
    fn n(&self) -> u64 {
        self.n
    }

    fn p(&self) -> usize {
        self.s_xy.len()
    }

    fn merge(&self, other: &Self) -> Result<Self> {
        self.combine(other, false)
    }

    fn subtract(&self, other: &Self) -> Result<Self> {
        self.combine(other, true)
    }
}

impl<T: Scalar> LinRegStats<T> {
    fn combine(&self, other: &Self, subtracting: bool) -> Result<Self> {
        check_len(self.p(), other.p())?;
        let sign = if subtracting { -T::one() } else { T::one() };
        Ok(Self {
            n: checked_counts(self.n, other.n, subtracting)?,
            s_yy: self.s_yy + sign * other.s_yy,
            s_xy: combine_vec(&self.s_xy, &other.s_xy, sign),
            gram: self.gram.combine(&other.gram, sign),
        })
    }
}

/// Weighted sums `(n, Σwy², Σwxy, Σwxxᵀ)`.
///
/// `n` counts every row, including zero-weight rows, because the weighted
/// variance estimate divides by the total number of observations.
#[derive(Debug, Clone)]
pub struct WeightedStats<T> {
    n: u64,
    s_wyy: T,
    s_wxy: Vec<T>,
    gram: Gram<T>,
    scratch: Vec<T>,
}

impl<T: PartialEq> PartialEq for WeightedStats<T> {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.s_wyy == o.s_wyy && self.s_wxy == o.s_wxy && self.gram == o.gram
    }
}

impl<T: Scalar> WeightedStats<T> {
    pub fn new(p: usize) -> Self {
        Self {
            n: 0,
            s_wyy: T::zero(),
            s_wxy: vec![T::zero(); p],
            gram: Gram::new(p),
            scratch: Vec::new(),
        }
    }

    pub fn from_parts(n: u64, s_wyy: T, s_wxy: Vec<T>, s_wxx: SymMatrix<T>) -> Result<Self> {
        check_len(s_wxx.dim(), s_wxy.len())?;
        Ok(Self { n, s_wyy, s_wxy, gram: Gram::from_sym(&s_wxx), scratch: Vec::new() })
    }

    pub fn s_wyy(&self) -> T {
        self.s_wyy
    }

    pub fn s_wxy(&self) -> &[T] {
        &self.s_wxy
    }

    pub fn s_wxx(&self) -> SymMatrix<T> {
        self.gram.to_sym()
    }

    pub fn update_row(&mut self, x: &[T], y: T, w: T) -> Result<()> {
        check_len(self.p(), x.len())?;
        check_weight(w)?;
        self.n += 1;
        let wy = w * y;
        self.s_wyy += wy * y;
        axpy(&mut self.s_wxy, x, wy);
        self.gram.add_row(x, w);
        Ok(())
    }

    pub fn update_batch(&mut self, x: &[T], y: &[T], w: &[T]) -> Result<()> {
        let p = self.p();
        let m = check_batch(x, y.len(), p)?;
        check_len(m, w.len())?;
        w.iter().try_for_each(|&wi| check_weight(wi))?;
        if m <= 1 {
            for ((row, &yi), &wi) in x.chunks_exact(p).zip(y).zip(w) {
                self.update_row(row, yi, wi)?;
            }
            return Ok(());
        }
        self.n += m as u64;
        let wy: Vec<T> = y.iter().zip(w).map(|(&yi, &wi)| wi * yi).collect();
        self.s_wyy += wy.iter().zip(y).fold(T::zero(), |a, (&u, &v)| a + u * v);
        T::gemm_tn_acc(m, p, 1, x, &wy, &mut self.s_wxy);
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        for (row, &wi) in x.chunks_exact(p).zip(w) {
            scratch.extend(row.iter().map(|&v| wi * v));
        }
        self.gram.add_batch(x, &scratch, m);
        self.scratch = scratch;
        Ok(())
    }

    fn combine(&self, other: &Self, subtracting: bool) -> Result<Self> {
        check_len(self.p(), other.p())?;
        let sign = if subtracting { -T::one() } else { T::one() };
        Ok(Self {
            n: checked_counts(self.n, other.n, subtracting)?,
            s_wyy: self.s_wyy + sign * other.s_wyy,
            s_wxy: combine_vec(&self.s_wxy, &other.s_wxy, sign),
            gram: self.gram.combine(&other.gram, sign),
            scratch: Vec::new(),
        })
    }
}

fn check_weight<T: Scalar>(w: T) -> Result<()> {
    if w < T::zero() || !w.is_finite() {
        return Err(Error::NegativeWeight(w.to_f64_lossy()));
    }
    Ok(())
}

impl<T: Scalar> SuffStats for WeightedStats<T> {
    fn n(&self) -> u64 {
        self.n
    }

    fn p(&self) -> usize {
        self.s_wxy.len()
    }

    fn merge(&self, other: &Self) -> Result<Self> {
        self.combine(other, false)
    }

    fn subtract(&self, other: &Self) -> Result<Self> {
        self.combine(other, true)
    }
}

/// Box-Cox sums for a whole grid of power parameters.
///
/// `Σxxᵀ` and `Σ log y` are shared by every grid entry; each `c` owns its
/// `Σ(y^(c))²` and `Σx·y^(c)` slot. One batch updates every slot.
#[derive(Debug, Clone)]
pub struct BoxCoxStats<T> {
    n: u64,
    grid: Vec<T>,
    s_logy: T,
    s_cyy: Vec<T>,
    /// `|C|×p` row-major; row `k` is `Σx·y^(c_k)`.
    s_cxy: Vec<T>,
    gram: Gram<T>,
    scratch: Vec<T>,
}

impl<T: PartialEq> PartialEq for BoxCoxStats<T> {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n
            && self.grid == o.grid
            && self.s_logy == o.s_logy
            && self.s_cyy == o.s_cyy
            && self.s_cxy == o.s_cxy
            && self.gram == o.gram
    }
}

impl<T: Scalar> BoxCoxStats<T> {
    pub fn new(p: usize, grid: Vec<T>) -> Result<Self> {
        validate_power_grid(&grid)?;
        let k = grid.len();
        Ok(Self {
            n: 0,
            grid,
            s_logy: T::zero(),
            s_cyy: vec![T::zero(); k],
            s_cxy: vec![T::zero(); k * p],
            gram: Gram::new(p),
            scratch: Vec::new(),
        })
    }

    pub fn from_parts(
        n: u64,
        grid: Vec<T>,
        s_logy: T,
        s_cyy: Vec<T>,
        s_cxy: Vec<Vec<T>>,
        s_xx: SymMatrix<T>,
    ) -> Result<Self> {
        validate_power_grid(&grid)?;
        check_len(grid.len(), s_cyy.len())?;
        check_len(grid.len(), s_cxy.len())?;
        let p = s_xx.dim();
        let mut flat = Vec::with_capacity(grid.len() * p);
        for row in &s_cxy {
            check_len(p, row.len())?;
            flat.extend_from_slice(row);
        }
        Ok(Self { n, grid, s_logy, s_cyy, s_cxy: flat, gram: Gram::from_sym(&s_xx), scratch: Vec::new() })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn s_logy(&self) -> T {
        self.s_logy
    }

    pub fn s_cyy(&self, k: usize) -> T {
        self.s_cyy[k]
    }

    pub fn s_cxy(&self, k: usize) -> &[T] {
        let p = self.p();
        &self.s_cxy[k * p..(k + 1) * p]
    }

    pub fn s_xx(&self) -> SymMatrix<T> {
        self.gram.to_sym()
    }

    pub fn update_row(&mut self, x: &[T], y: T) -> Result<()> {
        let (x_ref, y_ref) = (x, [y]);
        self.update_batch(x_ref, &y_ref)
    }

    pub fn update_batch(&mut self, x: &[T], y: &[T]) -> Result<()> {
        let p = self.p();
        let m = check_batch(x, y.len(), p)?;
        if let Some(&bad) = y.iter().find(|&&v| !(v > T::zero())) {
            return Err(Error::NonPositiveResponse(bad.to_f64_lossy()));
        }
        if m == 0 {
            return Ok(());
        }
        let k = self.grid.len();
        // transformed responses, m×|C| row-major
        let mut yc = std::mem::take(&mut self.scratch);
        yc.clear();
        for &yi in y {
            let ly = yi.ln();
            self.s_logy += ly;
            yc.extend(self.grid.iter().map(|&c| boxcox_from_log(yi, ly, c)));
        }
        for row in yc.chunks_exact(k) {
            for (s, &v) in self.s_cyy.iter_mut().zip(row) {
                *s += v * v;
            }
        }
        if m == 1 {
            for (slot, &v) in self.s_cxy.chunks_exact_mut(p).zip(&yc) {
                axpy(slot, x, v);
            }
            self.gram.add_row(x, T::one());
        } else {
            T::gemm_tn_acc(m, k, p, &yc, x, &mut self.s_cxy);
            self.gram.add_batch(x, x, m);
        }
        self.n += m as u64;
        self.scratch = yc;
        Ok(())
    }

    fn combine(&self, other: &Self, subtracting: bool) -> Result<Self> {
        check_len(self.p(), other.p())?;
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let sign = if subtracting { -T::one() } else { T::one() };
        Ok(Self {
            n: checked_counts(self.n, other.n, subtracting)?,
            grid: self.grid.clone(),
            s_logy: self.s_logy + sign * other.s_logy,
            s_cyy: combine_vec(&self.s_cyy, &other.s_cyy, sign),
            s_cxy: combine_vec(&self.s_cxy, &other.s_cxy, sign),
            gram: self.gram.combine(&other.gram, sign),
            scratch: Vec::new(),
        })
    }
}

impl<T: Scalar> SuffStats for BoxCoxStats<T> {
    fn n(&self) -> u64 {
        self.n
    }

    fn p(&self) -> usize {
        self.gram.p
    }

    fn merge(&self, other: &Self) -> Result<Self> {
        self.combine(other, false)
    }

    fn subtract(&self, other: &Self) -> Result<Self> {
        self.combine(other, true)
    }
}

/// Power grids must be non-empty, finite and free of duplicates.
pub fn validate_power_grid<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for (i, c) in grid.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite power parameter {c}")));
        }
        if grid[..i].contains(c) {
            return Err(Error::InvalidGrid(format!("duplicate power parameter {c}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T1_X: [f64; 4] = [1.0, 0.0, 1.0, 1.0];
    const T1_Y: [f64; 2] = [1.0, 3.0];
    const T2_X: [f64; 6] = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0];
    const T2_Y: [f64; 3] = [1.0, 3.0, 4.0];

    /// Dense `(Σy², Σxy, Σxxᵀ)` straight from the row definitions.
    fn dense_sums(x: &[f64], y: &[f64], w: &[f64], p: usize) -> (f64, Vec<f64>, Vec<f64>) {
        let mut syy = 0.0;
        let mut sxy = vec![0.0; p];
        let mut sxx = vec![0.0; p * p];
        for (i, (&yi, &wi)) in y.iter().zip(w).enumerate() {
            let xi = &x[i * p..(i + 1) * p];
            syy += wi * yi * yi;
            for a in 0..p {
                sxy[a] += wi * xi[a] * yi;
                for b in 0..p {
                    sxx[a * p + b] += wi * xi[a] * xi[b];
                }
            }
        }
        (syy, sxy, sxx)
    }

    fn lin(x: &[f64], y: &[f64]) -> LinRegStats<f64> {
        let mut s = LinRegStats::new(2);
        s.update_batch(x, y).unwrap();
        s
    }

    fn rel(a: f64, b: f64) -> f64 {
        let s = a.abs().max(b.abs());
        if s == 0.0 { 0.0 } else { (a - b).abs() / s }
    }

    fn vrel(a: &[f64], b: &[f64]) -> f64 {
        let s = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
        if s == 0.0 { 0.0 } else { a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / s }
    }

    fn lin_close(a: &LinRegStats<f64>, b: &LinRegStats<f64>, tol: f64) -> bool {
        a.n() == b.n()
            && rel(a.s_yy(), b.s_yy()) <= tol
            && vrel(a.s_xy(), b.s_xy()) <= tol
            && vrel(a.s_xx().as_slice(), b.s_xx().as_slice()) <= tol
    }

    #[test]
    fn update_row_examples() {
        let mut s = LinRegStats::new(2);
        s.update_row(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!((s.n(), s.s_yy(), s.s_xy()), (1, 1.0, &[1.0, 0.0][..]));
        assert_eq!(s.s_xx().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        s.update_row(&[1.0, 1.0], 3.0).unwrap();
        let (syy, sxy, sxx) = dense_sums(&T1_X, &T1_Y, &[1.0; 2], 2);
        assert_eq!((s.n(), s.s_yy(), s.s_xy()), (2, syy, &sxy[..]));
        assert_eq!(s.s_xx().as_slice(), &sxx[..]);
        assert_eq!((syy, sxy, sxx), (10.0, vec![4.0, 3.0], vec![2.0, 1.0, 1.0, 1.0]));

        let mut z = LinRegStats::new(2);
        z.update_row(&[0.0, 0.0], 0.0).unwrap();
        assert_eq!(z.n(), 1);
        assert_eq!(z.s_yy(), 0.0);
        assert_eq!(z.s_xx(), SymMatrix::zeros(2));

        assert!(matches!(z.update_row(&[1.0], 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn update_batch_examples() {
        assert_eq!(lin(&T1_X, &T1_Y).s_xy(), &[4.0, 3.0]);
        let s = lin(&T2_X, &T2_Y);
        let (syy, sxy, sxx) = dense_sums(&T2_X, &T2_Y, &[1.0; 3], 2);
        assert_eq!((syy, sxy.as_slice(), sxx.as_slice()), (26.0, &[8.0, 11.0][..], &[3.0, 3.0, 3.0, 5.0][..]));
        assert_eq!((s.n(), s.s_yy(), s.s_xy()), (3, 26.0, &[8.0, 11.0][..]));
        assert_eq!(s.s_xx().as_slice(), &[3.0, 3.0, 3.0, 5.0]);

        let mut e = lin(&T1_X, &T1_Y);
        let before = e.clone();
        e.update_batch(&[], &[]).unwrap();
        assert_eq!(e, before);

        assert!(LinRegStats::<f64>::new(2).update_batch(&T2_X, &T1_Y).is_err());
    }

    #[test]
    fn weighted_examples() {
        let mut w = WeightedStats::new(2);
        w.update_batch(&T1_X, &T1_Y, &[1.0, 1.0]).unwrap();
        let l = lin(&T1_X, &T1_Y);
        assert_eq!((w.n(), w.s_wyy(), w.s_wxy()), (l.n(), l.s_yy(), l.s_xy()));
        assert_eq!(w.s_wxx(), l.s_xx());

        let mut w = WeightedStats::new(2);
        for (i, &wi) in [1.0, 1.0, 0.0].iter().enumerate() {
            w.update_row(&T2_X[i * 2..i * 2 + 2], T2_Y[i], wi).unwrap();
        }
        let (syy, sxy, sxx) = dense_sums(&T2_X, &T2_Y, &[1.0, 1.0, 0.0], 2);
        assert_eq!((w.n(), w.s_wyy(), w.s_wxy()), (3, syy, &sxy[..]));
        assert_eq!(w.s_wxx().as_slice(), &sxx[..]);
        assert_eq!(syy, 10.0);

        let mut wb = WeightedStats::new(2);
        wb.update_batch(&T2_X, &T2_Y, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!((wb.n(), wb.s_wyy(), wb.s_wxy()), (3, 10.0, &[4.0, 3.0][..]));
        assert_eq!(wb.s_wxx().as_slice(), &[2.0, 1.0, 1.0, 1.0]);

        let mut s = WeightedStats::new(2);
        s.update_row(&[1.0, 0.0], 1.0, 2.0).unwrap();
        assert_eq!((s.s_wyy(), s.s_wxy()), (2.0, &[2.0, 0.0][..]));
        assert_eq!(s.s_wxx().as_slice(), &[2.0, 0.0, 0.0, 0.0]);

        let mut z = WeightedStats::new(2);
        z.update_batch(&T2_X, &T2_Y, &[0.0; 3]).unwrap();
        assert_eq!((z.n(), z.s_wyy(), z.s_wxy()), (3, 0.0, &[0.0, 0.0][..]));
        assert_eq!(z.s_wxx(), SymMatrix::zeros(2));

        assert!(matches!(s.update_row(&[1.0, 0.0], 1.0, -0.5), Err(Error::NegativeWeight(_))));
        assert!(matches!(s.update_batch(&T1_X, &T1_Y, &[1.0, -1.0]), Err(Error::NegativeWeight(_))));
    }

    #[test]
    fn boxcox_transform_examples() {
        for c in [-1.5, 0.0, 0.3, 2.0] {
            assert_eq!(boxcox_transform(1.0, c).unwrap(), 0.0);
        }
        assert!((boxcox_transform(2.0f64, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((boxcox_transform(std::f64::consts::E, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(boxcox_transform(0.0f64, 1.0), Err(Error::NonPositiveResponse(_))));
        assert!(matches!(boxcox_transform(-2.0f64, 0.5), Err(Error::NonPositiveResponse(_))));
        // (y^c − 1)/c by powf agrees away from c = 0
        for &(y, c) in &[(3.5, 0.7), (0.2, -1.3), (10.0, 1.5)] {
            let direct = (f64::powf(y, c) - 1.0) / c;
            assert!(rel(boxcox_transform(y, c).unwrap(), direct) < 1e-13);
        }
    }

    #[test]
    fn boxcox_batch_examples() {
        let e = std::f64::consts::E;
        let t3_y = [1.0, e, e * e];
        let mut s = BoxCoxStats::new(2, vec![0.0]).unwrap();
        s.update_batch(&T2_X, &t3_y).unwrap();
        // y^(0) = [0, 1, 2]
        let (s0yy, s0xy, sxx) = dense_sums(&T2_X, &[0.0, 1.0, 2.0], &[1.0; 3], 2);
        assert!(rel(s.s_logy(), 3.0) < 1e-15);
        assert!(rel(s.s_cyy(0), s0yy) < 1e-15 && rel(s0yy, 5.0) == 0.0);
        assert!(vrel(s.s_cxy(0), &s0xy) < 1e-15 && s0xy == vec![3.0, 5.0]);
        assert_eq!(s.s_xx().as_slice(), &sxx[..]);

        let mut s = BoxCoxStats::new(2, vec![1.0]).unwrap();
        s.update_batch(&T2_X, &T2_Y).unwrap();
        assert_eq!(s.s_cxy(0), &[5.0, 8.0]);
        assert_eq!(s.s_cyy(0), 13.0);
        assert!((s.s_logy() - (3.0f64.ln() + 4.0f64.ln())).abs() < 1e-15);
        assert!((s.s_logy() - 2.4849).abs() < 1e-4);
        assert_eq!(s.s_xx(), lin(&T2_X, &T2_Y).s_xx());

        assert!(matches!(s.update_batch(&T1_X, &[1.0, 0.0]), Err(Error::NonPositiveResponse(_))));
        assert!(matches!(BoxCoxStats::<f64>::new(2, vec![]), Err(Error::EmptyGrid)));
        assert!(matches!(BoxCoxStats::<f64>::new(2, vec![0.5, 0.5]), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn merge_and_subtract_examples() {
        let mut r1 = LinRegStats::new(2);
        r1.update_row(&T1_X[..2], 1.0).unwrap();
        let mut r2 = LinRegStats::new(2);
        r2.update_row(&T1_X[2..], 3.0).unwrap();
        let t1 = lin(&T1_X, &T1_Y);
        assert_eq!(r1.merge(&r2).unwrap(), t1);
        assert_eq!(t1.merge(&LinRegStats::new(2)).unwrap(), t1);

        let mut r3 = LinRegStats::new(2);
        r3.update_row(&[1.0, 2.0], 4.0).unwrap();
        let t2 = lin(&T2_X, &T2_Y);
        assert_eq!(t1.merge(&r3).unwrap(), t2);
        assert_eq!(t2.subtract(&r3).unwrap(), t1);
        assert_eq!(t2.subtract(&t2).unwrap(), LinRegStats::new(2));
        assert!(matches!(
            LinRegStats::new(2).subtract(&t1),
            Err(Error::NegativeCount { left: 0, right: 2 })
        ));
        assert!(LinRegStats::<f64>::new(3).merge(&t1).is_err());

        let a = BoxCoxStats::<f64>::new(2, vec![0.0]).unwrap();
        let b = BoxCoxStats::<f64>::new(2, vec![1.0]).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::GridMismatch)));
    }

    #[test]
    fn f32_accumulates() {
        let mut s = LinRegStats::<f32>::new(2);
        s.update_batch(&[1.0, 0.0, 1.0, 1.0, 1.0, 2.0], &[1.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.s_xy(), &[8.0, 11.0]);
    }

    fn rows_strategy() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6, 0usize..60).prop_flat_map(|(p, n)| {
            (
                Just(p),
                prop::collection::vec(-10.0f64..10.0, n * p),
                prop::collection::vec(0.01f64..20.0, n),
                prop::collection::vec(0.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn batch_partition_invariance((p, x, y, _w) in rows_strategy(), cut in 1usize..17) {
            let mut rowwise = LinRegStats::new(p);
            for (row, &yi) in x.chunks_exact(p).zip(&y) {
                rowwise.update_row(row, yi).unwrap();
            }
            let mut batched = LinRegStats::new(p);
            for (xc, yc) in x.chunks(cut * p).zip(y.chunks(cut)) {
                batched.update_batch(xc, yc).unwrap();
            }
            prop_assert!(lin_close(&rowwise, &batched, 1e-12));
        }

        #[test]
        fn merge_commutes_and_subtract_inverts((p, x, y, _w) in rows_strategy(), split in 0.0f64..1.0) {
            let n = y.len();
            let k = (split * n as f64) as usize;
            let k2 = (k + n) / 2;
            let mk = |lo: usize, hi: usize| {
                let mut s = LinRegStats::new(p);
                s.update_batch(&x[lo * p..hi * p], &y[lo..hi]).unwrap();
                s
            };
            let (a, b, c) = (mk(0, k), mk(k, k2), mk(k2, n));
            let ab = a.merge(&b).unwrap();
            prop_assert!(lin_close(&ab, &b.merge(&a).unwrap(), 1e-12));
            prop_assert!(lin_close(&ab.merge(&c).unwrap(), &a.merge(&b.merge(&c).unwrap()).unwrap(), 1e-12));
            prop_assert!(lin_close(&ab.merge(&c).unwrap(), &mk(0, n), 1e-12));
            let back = ab.subtract(&b).unwrap();
            prop_assert_eq!(back.n(), a.n());
            // subtraction error scales with the larger operand
            let scale = ab.s_yy().max(1e-300);
            prop_assert!((back.s_yy() - a.s_yy()).abs() <= 1e-12 * scale);
        }

        #[test]
        fn unit_weights_match_plain((p, x, y, _w) in rows_strategy()) {
            let mut lw = WeightedStats::new(p);
            lw.update_batch(&x, &y, &vec![1.0; y.len()]).unwrap();
            let mut l = LinRegStats::new(p);
            l.update_batch(&x, &y).unwrap();
            prop_assert_eq!(lw.n(), l.n());
            prop_assert!(rel(lw.s_wyy(), l.s_yy()) <= 1e-12);
            prop_assert!(vrel(lw.s_wxy(), l.s_xy()) <= 1e-12);
            prop_assert!(vrel(lw.s_wxx().as_slice(), l.s_xx().as_slice()) <= 1e-12);
        }

        #[test]
        fn weighted_batch_matches_rows((p, x, y, w) in rows_strategy(), cut in 1usize..9) {
            let mut rows = WeightedStats::new(p);
            for ((row, &yi), &wi) in x.chunks_exact(p).zip(&y).zip(&w) {
                rows.update_row(row, yi, wi).unwrap();
            }
            let mut b = WeightedStats::new(p);
            for ((xc, yc), wc) in x.chunks(cut * p).zip(y.chunks(cut)).zip(w.chunks(cut)) {
                b.update_batch(xc, yc, wc).unwrap();
            }
            let (syy, sxy, sxx) = dense_sums(&x, &y, &w, p);
            prop_assert!(rel(b.s_wyy(), rows.s_wyy()) <= 1e-12 && rel(b.s_wyy(), syy) <= 1e-12);
            let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            let ay: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            let (_, scale, _) = dense_sums(&ax, &ay, &w, p);
            for ((u, v), s) in b.s_wxy().iter().zip(&sxy).zip(&scale) {
                prop_assert!((u - v).abs() <= 1e-12 * s.max(1.0));
            }
            prop_assert!(vrel(b.s_wxx().as_slice(), &sxx) <= 1e-12);
            prop_assert!(vrel(rows.s_wxx().as_slice(), &sxx) <= 1e-12);
        }

        #[test]
        fn boxcox_unit_power_is_shifted_linear((p, x, y, _w) in rows_strategy(), cut in 1usize..9) {
            let mut bc = BoxCoxStats::new(p, vec![1.0, 0.0, -0.5]).unwrap();
            let mut l = LinRegStats::new(p);
            let mut colsum = vec![0.0; p];
            for (xc, yc) in x.chunks(cut * p).zip(y.chunks(cut)) {
                bc.update_batch(xc, yc).unwrap();
                l.update_batch(xc, yc).unwrap();
                for row in xc.chunks_exact(p) {
                    for (s, v) in colsum.iter_mut().zip(row) { *s += v; }
                }
            }
            let shifted: Vec<f64> = l.s_xy().iter().zip(&colsum).map(|(a, b)| a - b).collect();
            let scale = l.s_xy().iter().chain(&colsum).fold(1e-300f64, |m, v| m.max(v.abs()));
            for (u, v) in bc.s_cxy(0).iter().zip(&shifted) {
                prop_assert!((u - v).abs() <= 1e-12 * scale);
            }
            let (a, b) = (bc.s_xx(), l.s_xx());
            prop_assert_eq!(a.as_slice(), b.as_slice());
            // log slot equals Σ log y
            let sl: f64 = y.iter().map(|v| v.ln()).sum();
            prop_assert!((bc.s_logy() - sl).abs() <= 1e-12 * y.iter().map(|v| v.ln().abs()).sum::<f64>().max(1e-300));
        }

        #[test]
        fn gram_stays_psd((p, x, y, _w) in rows_strategy()) {
            let mut l = LinRegStats::new(p);
            l.update_batch(&x, &y).unwrap();
            let eig = crate::linalg::sym_eigen(&l.s_xx()).unwrap();
            let wmax = eig.values[0].max(0.0);
            prop_assert!(eig.values.iter().all(|&w| w >= -1e-9 * wmax));
        }
    }
}
