//! Dense complex matrices, tensor products and spectral routines.
//!
//! Everything downstream is built on [`Matrix`]: algebra elements, L^p
//! representatives and explicit superoperators all use the same row-major
//! carrier. Tensor factor 0 is always the leftmost (major) `kron` operand.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{re, Real};

/// Largest dimension `kron` will produce (2^16).
pub const MAX_KRON_DIM: usize = 1 << 16;

/// Hermiticity tolerance applied at unit scale.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Number of 2x2 tensor factors of an ambient algebra, `m` in `[1, 8]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorSpace(usize);

impl FactorSpace {
    pub const MAX: usize = 8;

    pub fn new(m: usize) -> Result<Self> {
        if (1..=Self::MAX).contains(&m) {
            Ok(Self(m))
        } else {
            Err(Error::LevelOutOfRange(m))
        }
    }

    /// Level of a power-of-two dimension.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        Self::new(dim.trailing_zeros() as usize)
    }

    #[inline]
    pub fn m(self) -> usize {
        self.0
    }

    /// Matrix dimension `2^m`.
    #[inline]
    pub fn dim(self) -> usize {
        1 << self.0
    }

    /// Number of Walsh matrices at this level, `4^m`.
    #[inline]
    pub fn walsh_len(self) -> usize {
        1 << (2 * self.0)
    }
}

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![Complex::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + i] = Complex::one();
        }
        out
    }

    pub fn from_vec(dim: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::BadLength {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from real rows; panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |r, c| {
            assert_eq!(rows[r].len(), dim, "ragged rows");
            re(T::lit(rows[r][c]))
        })
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut out = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            out.data[i * diag.len() + i] = re(d);
        }
        out
    }

    pub fn from_complex_diag(diag: &[Complex<T>]) -> Self {
        let mut out = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            out.data[i * diag.len() + i] = d;
        }
        out
    }

    /// Matrix unit `e_{rc}`.
    pub fn unit(dim: usize, r: usize, c: usize) -> Self {
        let mut out = Self::zeros(dim);
        out.data[r * dim + c] = Complex::one();
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.dim + c] = v;
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(re(s))
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: Complex<T>, other: &Self) {
        assert_eq!(self.dim, other.dim, "axpy dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + s * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![Complex::zero(); n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                let other_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(other_row) {
                    *o = *o + a * b;
                }
            }
        }
        Self { dim: n, data: out }
    }

    /// Multiplies column `c` by `weights[c]` (right multiplication by a diagonal).
    pub fn scale_columns(&self, weights: &[T]) -> Self {
        assert_eq!(weights.len(), self.dim);
        Self::from_fn(self.dim, |r, c| self.get(r, c) * weights[c])
    }

    /// Multiplies row `r` by `weights[r]` (left multiplication by a diagonal).
    pub fn scale_rows(&self, weights: &[T]) -> Self {
        assert_eq!(weights.len(), self.dim);
        Self::from_fn(self.dim, |r, c| self.get(r, c) * weights[r])
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim, "comparison dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn off_diagonal_max(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    worst = worst.max(self.get(r, c).norm());
                }
            }
        }
        worst
    }

    /// Hilbert–Schmidt pairing `Tr(self† other)`.
    pub fn hs_inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * *b)
            .sum()
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| -*v).collect(),
        }
    }
}

/// Kronecker product; `a` indexes the major (slow) coordinate.
pub fn kron<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let dim = a
        .dim
        .checked_mul(b.dim)
        .filter(|&d| d <= MAX_KRON_DIM)
        .ok_or(Error::DimensionTooLarge(a.dim.saturating_mul(b.dim)))?;
    let (na, nb) = (a.dim, b.dim);
    let mut data = vec![Complex::zero(); dim * dim];
    for ar in 0..na {
        for ac in 0..na {
            let av = a.get(ar, ac);
            if av.is_zero() {
                continue;
            }
            for br in 0..nb {
                let row = (ar * nb + br) * dim + ac * nb;
                for bc in 0..nb {
                    data[row + bc] = av * b.get(br, bc);
                }
            }
        }
    }
    Ok(Matrix { dim, data })
}

/// Kronecker product of a list, factor 0 first.
pub fn kron_all<T: Real>(factors: &[Matrix<T>]) -> Result<Matrix<T>> {
    let mut iter = factors.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty tensor product".into()))?
        .clone();
    iter.try_fold(first, |acc, f| kron(&acc, f))
}

pub fn dagger<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.dagger()
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// `V f(Λ) V†` for a complex-valued spectral function.
    pub fn apply(&self, f: impl Fn(T) -> Complex<T>) -> Matrix<T> {
        let n = self.vectors.dim();
        let weights: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        Matrix::from_fn(n, |r, c| {
            (0..n)
                .map(|k| v.get(r, k) * weights[k] * v.get(c, k).conj())
                .sum()
        })
    }
}

/// Checked Hermitian eigensolver.
pub fn eigh<T: Real>(h: &Matrix<T>) -> Result<HermitianEigen<T>> {
    let scale = T::one().max(h.max_abs());
    let residual = h.hermiticity_residual();
    if residual > T::lit(HERMITIAN_TOL) * scale {
        return Err(Error::NotHermitian(residual.to_f64_lossy()));
    }
    Ok(jacobi_eigh(h))
}

/// Cyclic complex Jacobi. The caller guarantees Hermiticity; only the upper
/// triangle is trusted.
pub(crate) fn jacobi_eigh<T: Real>(h: &Matrix<T>) -> HermitianEigen<T> {
    let n = h.dim;
    let mut a = h.clone();
    // Symmetrize from the upper triangle so rounding asymmetry cannot accumulate.
    for r in 0..n {
        a.data[r * n + r] = re(a.data[r * n + r].re);
        for c in (r + 1)..n {
            let v = a.data[r * n + c];
            a.data[c * n + r] = v.conj();
        }
    }
    let mut v = Matrix::<T>::identity(n);
    let eps = T::epsilon();
    let two = T::lit(2.0);

    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for r in 0..n {
            diag = diag + a.data[r * n + r].norm_sqr();
            for c in (r + 1)..n {
                off = off + a.data[r * n + c].norm_sqr();
            }
        }
        if off <= eps * eps * (diag + off) * T::lit(1e-2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.data[p * n + q];
                let mag = apq.norm();
                if mag == T::zero() {
                    continue;
                }
                let app = a.data[p * n + p].re;
                let aqq = a.data[q * n + q].re;
                if mag <= eps * T::lit(1e-3) * (app.abs() + aqq.abs()) {
                    a.data[p * n + q] = Complex::zero();
                    a.data[q * n + p] = Complex::zero();
                    continue;
                }
                let phase = apq / mag;
                let theta = (aqq - app) / (two * mag);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = t * cs;
                // U_pp = U_qq = c, U_pq = s e^{iφ}, U_qp = -s e^{-iφ}; A <- U† A U.
                let s_ph = phase * sn;
                let s_ph_conj = s_ph.conj();
                for k in 0..n {
                    let akp = a.data[k * n + p];
                    let akq = a.data[k * n + q];
                    a.data[k * n + p] = akp * cs - akq * s_ph_conj;
                    a.data[k * n + q] = akp * s_ph + akq * cs;
                }
                for k in 0..n {
                    let apk = a.data[p * n + k];
                    let aqk = a.data[q * n + k];
                    a.data[p * n + k] = apk * cs - aqk * s_ph;
                    a.data[q * n + k] = apk * s_ph_conj + aqk * cs;
                }
                a.data[p * n + q] = Complex::zero();
                a.data[q * n + p] = Complex::zero();
                a.data[p * n + p] = re(a.data[p * n + p].re);
                a.data[q * n + q] = re(a.data[q * n + q].re);
                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = vkp * cs - vkq * s_ph_conj;
                    v.data[k * n + q] = vkp * s_ph + vkq * cs;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<T> = (0..n).map(|i| a.data[i * n + i].re).collect();
    order.sort_by(|&i, &j| raw[i].partial_cmp(&raw[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = Matrix::from_fn(n, |r, c| v.get(r, order[c]));
    HermitianEigen { values, vectors }
}

fn validate_p<T: Real>(p: T) -> Result<()> {
    if p.is_nan() || p < T::one() {
        Err(Error::InvalidExponent(p.to_f64_lossy()))
    } else {
        Ok(())
    }
}

/// Singular values in descending order, from the spectrum of `x†x`.
pub fn singular_values<T: Real>(x: &Matrix<T>) -> Vec<T> {
    let gram = x.dagger().matmul(x);
    let eig = jacobi_eigh(&gram);
    eig.values
        .iter()
        .rev()
        .map(|&l| l.max(T::zero()).sqrt())
        .collect()
}

/// `(Σ σ^p)^{1/p}` of already computed singular values; `p = inf` gives the maximum.
pub fn schatten_from_singular<T: Real>(sigma: &[T], p: T) -> T {
    if p.is_infinite() {
        return sigma.iter().copied().fold(T::zero(), T::max);
    }
    let top = sigma.iter().copied().fold(T::zero(), T::max);
    if top == T::zero() {
        return T::zero();
    }
    // Scale by the top singular value to keep powers in range.
    let sum: T = sigma.iter().map(|&s| (s / top).powf(p)).sum();
    top * sum.powf(T::one() / p)
}

pub fn schatten_norm<T: Real>(x: &Matrix<T>, p: T) -> Result<T> {
    validate_p(p)?;
    Ok(schatten_from_singular(&singular_values(x), p))
}

/// Spectral power `h^t` of a Hermitian positive semidefinite matrix for a
/// complex exponent `t` (typically real or purely imaginary).
pub fn psd_power<T: Real>(h: &Matrix<T>, t: Complex<T>) -> Result<Matrix<T>> {
    let eig = eigh(h)?;
    let scale = T::one().max(eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs())));
    let tol = T::lit(HERMITIAN_TOL) * scale;
    let min = eig.values.first().copied().unwrap_or(T::zero());
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite(min.to_f64_lossy()));
    }
    let needs_inverse = t.re < T::zero() || t.im != T::zero();
    if needs_inverse && min <= tol {
        return Err(Error::Singular);
    }
    let t_is_zero = t.is_zero();
    Ok(eig.apply(|l| {
        if l <= T::zero() || (!needs_inverse && l <= tol) {
            if t_is_zero {
                Complex::one()
            } else {
                Complex::zero()
            }
        } else {
            (t * l.ln()).exp()
        }
    }))
}

/// GNS-type pairing `Tr(x† y a)`.
pub fn gns_inner<T: Real>(x: &Matrix<T>, y: &Matrix<T>, a: &Matrix<T>) -> Result<Complex<T>> {
    for m in [y, a] {
        if m.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: m.dim(),
            });
        }
    }
    Ok(x.hs_inner(&y.matmul(a)))
}
