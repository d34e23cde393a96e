//! Dense symmetric linear algebra for normal-equation systems.
//!
//! Normal matrices are solved by Cholesky when they are numerically positive
//! definite. Otherwise the Moore-Penrose pseudo-inverse, built from a cyclic
//! Jacobi eigendecomposition, takes over.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Sweep cap for the cyclic Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Default relative rank cutoff for a `p×p` system.
///
/// `1e-12·p` in double precision. Single precision cannot resolve that
/// threshold, so the cutoff is floored at `16·ε·p`.
pub fn default_rank_tol<T: Scalar>(p: usize) -> T {
    let base = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    base * T::from_usize(p.max(1)).unwrap()
}

/// Dense `p×p` symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = T::one();
        }
        m
    }

    /// Builds a matrix from the upper triangle; `f` is only called for `j >= i`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Mirrors the upper triangle of a full row-major buffer. The strict lower
    /// triangle of `full` is ignored.
    pub fn from_upper_of(dim: usize, full: &[T]) -> Self {
        assert_eq!(full.len(), dim * dim);
        Self::from_upper_fn(dim, |i, j| full[i * dim + j])
    }

    /// Builds from a packed upper triangle (row-major, `p(p+1)/2` entries).
    pub fn from_packed_upper(dim: usize, packed: &[T]) -> Result<Self> {
        let want = dim * (dim + 1) / 2;
        if packed.len() != want {
            return Err(Error::DimensionMismatch { expected: want, found: packed.len() });
        }
        let mut it = packed.iter().copied();
        Ok(Self::from_upper_fn(dim, |_, _| it.next().unwrap()))
    }

    /// Builds from a full row-major buffer, rejecting anything not exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Packed upper triangle, row-major.
    pub fn packed_upper(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            out.extend_from_slice(&self.data[i * self.dim + i..(i + 1) * self.dim]);
        }
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x.len())?;
        Ok((0..self.dim).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ·A·x`
    pub fn quad_form(&self, x: &[T]) -> Result<T> {
        let ax = self.mul_vec(x)?;
        Ok(dot(x, &ax))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn add_diagonal(&self, lambda: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += lambda;
        }
        m
    }

    /// `A·B·A` for symmetric `A`, `B`; the result is symmetric and built from its upper triangle.
    pub fn sandwich(&self, middle: &Self) -> Result<Self> {
        self.check_len(middle.dim)?;
        let p = self.dim;
        let mut ab = vec![T::zero(); p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.data[i * p + k];
                if a == T::zero() {
                    continue;
                }
                let brow = middle.row(k);
                let out = &mut ab[i * p..(i + 1) * p];
                for (o, &b) in out.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        // (AB)A: entry (i,j) = row_i(AB) · col_j(A) = row_i(AB) · row_j(A)
        Ok(Self::from_upper_fn(p, |i, j| dot(&ab[i * p..(i + 1) * p], self.row(j))))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m + v * v).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: n });
        }
        Ok(())
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    /// Row-major `p×p`; column `k` is the eigenvector for `values[k]`.
    pub vectors: Vec<T>,
    pub sweeps: usize,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<T> {
        let p = self.dim();
        (0..p).map(|i| self.vectors[i * p + k]).collect()
    }

    /// `V·diag(f(w))·Vᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let p = self.dim();
        let mapped: Vec<T> = self.values.iter().map(|&w| f(w)).collect();
        SymMatrix::from_upper_fn(p, |i, j| {
            let vi = &self.vectors[i * p..(i + 1) * p];
            let vj = &self.vectors[j * p..(j + 1) * p];
            (0..p).fold(T::zero(), |acc, k| acc + vi[k] * mapped[k] * vj[k])
        })
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eigen<T: Scalar>(a: &SymMatrix<T>) -> Result<EigenDecomposition<T>> {
    let p = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut v = SymMatrix::<T>::identity(p).data;
    let scale = a.frobenius();
    let target = T::epsilon() * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, p);
        if off <= target || off == T::zero() {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps });
        }
        sweeps += 1;
        for r in 0..p {
            for s in r + 1..p {
                let ars = m[r * p + s];
                if ars == T::zero() {
                    continue;
                }
                let (arr, ass) = (m[r * p + r], m[s * p + s]);
                let theta = (ass - arr) / (ars + ars);
                let t = theta.signum() / (theta.abs() + theta.hypot(T::one()));
                let c = T::one() / t.hypot(T::one());
                let sn = t * c;
                for k in 0..p {
                    let (mkr, mks) = (m[k * p + r], m[k * p + s]);
                    m[k * p + r] = c * mkr - sn * mks;
                    m[k * p + s] = sn * mkr + c * mks;
                }
                for k in 0..p {
                    let (mrk, msk) = (m[r * p + k], m[s * p + k]);
                    m[r * p + k] = c * mrk - sn * msk;
                    m[s * p + k] = sn * mrk + c * msk;
                }
                m[r * p + s] = T::zero();
                m[s * p + r] = T::zero();
                for k in 0..p {
                    let (vkr, vks) = (v[k * p + r], v[k * p + s]);
                    v[k * p + r] = c * vkr - sn * vks;
                    v[k * p + s] = sn * vkr + c * vks;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[j * p + j].partial_cmp(&m[i * p + i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| m[k * p + k]).collect();
    let mut vectors = vec![T::zero(); p * p];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..p {
            vectors[i * p + dst] = v[i * p + src];
        }
    }
    Ok(EigenDecomposition { values, vectors, sweeps })
}

fn off_diagonal_norm<T: Scalar>(m: &[T], p: usize) -> T {
    let mut acc = T::zero();
    for i in 0..p {
        for j in i + 1..p {
            let x = m[i * p + j];
            acc += x * x;
        }
    }
    (acc + acc).sqrt()
}

/// Lower-triangular Cholesky factor `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Fails with [`Error::NotPositiveDefinite`] when a pivot falls to
    /// `rank_tol · max(diag A)` or below.
    pub fn factor(a: &SymMatrix<T>, rank_tol: T) -> Result<Self> {
        let p = a.dim();
        let max_diag = a.diagonal().into_iter().fold(T::zero(), T::max);
        let floor = rank_tol * max_diag;
        let mut l = vec![T::zero(); p * p];
        for j in 0..p {
            let d = a.get(j, j) - dot(&l[j * p..j * p + j], &l[j * p..j * p + j]);
            if !(d > floor) || max_diag <= T::zero() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = d.sqrt();
            l[j * p + j] = ljj;
            for i in j + 1..p {
                let s = a.get(i, j) - dot(&l[i * p..i * p + j], &l[j * p..j * p + j]);
                l[i * p + j] = s / ljj;
            }
        }
        Ok(Self { dim: p, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let p = self.dim;
        if b.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: b.len() });
        }
        let l = &self.lower;
        let mut z = b.to_vec();
        for i in 0..p {
            let s = z[i] - dot(&l[i * p..i * p + i], &z[..i]);
            z[i] = s / l[i * p + i];
        }
        for i in (0..p).rev() {
            let mut s = z[i];
            for k in i + 1..p {
                s -= l[k * p + i] * z[k];
            }
            z[i] = s / l[i * p + i];
        }
        Ok(z)
    }

    pub fn inverse(&self) -> SymMatrix<T> {
        let p = self.dim;
        let mut cols = Vec::with_capacity(p);
        for j in 0..p {
            let mut e = vec![T::zero(); p];
            e[j] = T::one();
            cols.push(self.solve(&e).expect("dimension fixed"));
        }
        SymMatrix::from_upper_fn(p, |i, j| cols[j][i])
    }
}

/// Solves `A·x = b` for symmetric positive definite `A`.
pub fn cholesky_solve<T: Scalar>(a: &SymMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    Cholesky::factor(a, default_rank_tol(a.dim()))?.solve(b)
}

/// Moore-Penrose pseudo-inverse. Eigenvalues with `|w| <= rank_tol·max|w|` are dropped.
pub fn pseudo_inverse<T: Scalar>(a: &SymMatrix<T>, rank_tol: T) -> Result<SymMatrix<T>> {
    let eig = sym_eigen(a)?;
    let wmax = eig.values.iter().fold(T::zero(), |m, w| m.max(w.abs()));
    let cutoff = rank_tol * wmax;
    Ok(eig.reconstruct_with(|w| if w.abs() > cutoff { T::one() / w } else { T::zero() }))
}

/// Factored normal matrix: Cholesky when positive definite, pseudo-inverse otherwise.
#[derive(Debug, Clone)]
pub enum NormalSolver<T> {
    Cholesky(Cholesky<T>),
    Generalized(SymMatrix<T>),
}

impl<T: Scalar> NormalSolver<T> {
    pub fn factor(a: &SymMatrix<T>) -> Result<Self> {
        Self::factor_with_tol(a, default_rank_tol(a.dim()))
    }

    pub fn factor_with_tol(a: &SymMatrix<T>, rank_tol: T) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("normal matrix".into()));
        }
        match Cholesky::factor(a, rank_tol) {
            Ok(c) => Ok(Self::Cholesky(c)),
            Err(Error::NotPositiveDefinite { .. }) => {
                Ok(Self::Generalized(pseudo_inverse(a, rank_tol)?))
            }
            Err(e) => Err(e),
        }
    }

    pub fn used_generalized(&self) -> bool {
        matches!(self, Self::Generalized(_))
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Cholesky(c) => c.solve(b),
            Self::Generalized(pinv) => pinv.mul_vec(b),
        }
    }

    pub fn inverse(&self) -> SymMatrix<T> {
        match self {
            Self::Cholesky(c) => c.inverse(),
            Self::Generalized(pinv) => pinv.clone(),
        }
    }
}

/// Solves the normal equations, returning the solution and whether the
/// generalized-inverse branch was taken.
pub fn solve_normal<T: Scalar>(a: &SymMatrix<T>, b: &[T]) -> Result<(Vec<T>, bool)> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.len() });
    }
    let solver = NormalSolver::factor(a)?;
    Ok((solver.solve(b)?, solver.used_generalized()))
}
