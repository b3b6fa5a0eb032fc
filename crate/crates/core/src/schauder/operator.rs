//! Linear maps on the matrix space `M_{2^m}`.
//!
//! A handle is either a closure or an explicit `d² × d²` matrix acting on
//! row-major vectorizations (the matrix-unit basis `e_{rc} ↦ r·d + c`).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Explicit superoperators are only built for `d² ≤ 256`.
pub const MAX_EXPLICIT_SIDE: usize = 256;

type MatrixFn<T> = dyn Fn(&Matrix<T>) -> Matrix<T> + Send + Sync;

#[derive(Clone)]
enum Repr<T> {
    Functional(Arc<MatrixFn<T>>),
    Explicit(Arc<Matrix<T>>),
}

#[derive(Clone)]
pub struct OperatorHandle<T> {
    dim: usize,
    repr: Repr<T>,
}

impl<T> fmt::Debug for OperatorHandle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Functional(_) => "functional",
            Repr::Explicit(_) => "explicit",
        };
        f.debug_struct("OperatorHandle")
            .field("dim", &self.dim)
            .field("repr", &kind)
            .finish()
    }
}

impl<T: Real> OperatorHandle<T> {
    pub fn from_fn(dim: usize, f: impl Fn(&Matrix<T>) -> Matrix<T> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            repr: Repr::Functional(Arc::new(f)),
        }
    }

    /// Wraps an explicit `d² × d²` matrix.
    pub fn from_explicit(dim: usize, matrix: Matrix<T>) -> Result<Self> {
        if matrix.dim() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: matrix.dim(),
            });
        }
        Ok(Self {
            dim,
            repr: Repr::Explicit(Arc::new(matrix)),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, Matrix::clone)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, move |_| Matrix::zeros(dim))
    }

    /// `x ↦ a x`.
    pub fn left_mul(a: Matrix<T>) -> Self {
        let dim = a.dim();
        Self::from_fn(dim, move |x| a.matmul(x))
    }

    /// `x ↦ x a`.
    pub fn right_mul(a: Matrix<T>) -> Self {
        let dim = a.dim();
        Self::from_fn(dim, move |x| x.matmul(&a))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.repr, Repr::Explicit(_))
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.dim(), self.dim, "operator applied to a matrix of the wrong size");
        match &self.repr {
            Repr::Functional(f) => f(x),
            Repr::Explicit(m) => {
                let v = apply_vec(m, x.data());
                Matrix::from_vec(self.dim, v).expect("square")
            }
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        assert_eq!(self.dim, inner.dim, "composition dimension mismatch");
        if let (Repr::Explicit(a), Repr::Explicit(b)) = (&self.repr, &inner.repr) {
            return Self {
                dim: self.dim,
                repr: Repr::Explicit(Arc::new(a.matmul(b))),
            };
        }
        let (outer, inner) = (self.clone(), inner.clone());
        Self::from_fn(self.dim, move |x| outer.apply(&inner.apply(x)))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        assert_eq!(self.dim, other.dim, "linear combination dimension mismatch");
        if let (Repr::Explicit(x), Repr::Explicit(y)) = (&self.repr, &other.repr) {
            let mut m = x.scale(a);
            m.axpy(b, y);
            return Self {
                dim: self.dim,
                repr: Repr::Explicit(Arc::new(m)),
            };
        }
        let (l, r) = (self.clone(), other.clone());
        Self::from_fn(self.dim, move |x| {
            let mut out = l.apply(x).scale(a);
            out.axpy(b, &r.apply(x));
            out
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(Complex::one(), other, Complex::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(Complex::one(), other, -Complex::<T>::one())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.combine(s, &Self::zero(self.dim), Complex::zero())
    }

    /// Sum of handles; the zero map for an empty list.
    pub fn sum(dim: usize, terms: &[Self]) -> Self {
        terms.iter().fold(Self::zero(dim), |acc, t| acc.add(t))
    }

    /// The explicit matrix, probing each matrix unit if necessary.
    pub fn explicit_matrix(&self) -> Result<Matrix<T>> {
        match &self.repr {
            Repr::Explicit(m) => Ok((**m).clone()),
            Repr::Functional(f) => {
                let n = self.dim * self.dim;
                if n > MAX_EXPLICIT_SIDE {
                    return Err(Error::DimensionTooLarge(n));
                }
                let mut out = Matrix::zeros(n);
                for k in 0..n {
                    let image = f(&Matrix::unit(self.dim, k / self.dim, k % self.dim));
                    for (row, &v) in image.data().iter().enumerate() {
                        out.set(row, k, v);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn materialize(&self) -> Result<Self> {
        Ok(Self {
            dim: self.dim,
            repr: Repr::Explicit(Arc::new(self.explicit_matrix()?)),
        })
    }

    /// Largest entrywise disagreement between this handle and its explicit
    /// form on the matrix-unit probe.
    pub fn representation_residual(&self) -> Result<T> {
        let explicit = self.materialize()?;
        let mut worst = T::zero();
        for k in 0..self.dim * self.dim {
            let probe = Matrix::unit(self.dim, k / self.dim, k % self.dim);
            worst = worst.max(self.apply(&probe).max_abs_diff(&explicit.apply(&probe)));
        }
        Ok(worst)
    }
}

pub(crate) fn apply_vec<T: Real>(m: &Matrix<T>, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = m.dim();
    assert_eq!(v.len(), n);
    let data = m.data();
    (0..n)
        .map(|r| {
            data[r * n..(r + 1) * n]
                .iter()
                .zip(v)
                .map(|(a, b)| *a * *b)
                .sum()
        })
        .collect()
}

/// `m† v`.
pub(crate) fn apply_adjoint_vec<T: Real>(m: &Matrix<T>, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = m.dim();
    assert_eq!(v.len(), n);
    let data = m.data();
    let mut out = vec![Complex::zero(); n];
    for (r, &vr) in v.iter().enumerate() {
        if vr.is_zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(&data[r * n..(r + 1) * n]) {
            *o = *o + a.conj() * vr;
        }
    }
    out
}
