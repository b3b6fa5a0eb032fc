//! The commutative picture: step functions on the dyadic grid of `[0, 1)`,
//! the biased product measure `μ_α` and the classical Walsh functions seen as
//! diagonals of the matrix Walsh system.
//!
//! The `k`-th interval `[k 2^{-L}, (k+1) 2^{-L})` corresponds to basis index
//! `k`; binary digit `i` of `k` is read most significant first and belongs to
//! tensor factor `i`.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{FactorSpace, Matrix};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::schauder::norms::{estimate_norm_with, exact_norm_with, weighted_lp, NormMethod, NormReport, WeightedSequenceGeometry};
use crate::walsh::check_alpha;

/// Off-diagonal magnitude tolerated by [`diag_to_step`].
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    level: usize,
    values: Vec<Complex<T>>,
}

impl<T: Real> StepFunction<T> {
    pub fn new(level: usize, values: Vec<Complex<T>>) -> Result<Self> {
        FactorSpace::new(level)?;
        if values.len() != 1 << level {
            return Err(Error::BadLength {
                expected: 1 << level,
                found: values.len(),
            });
        }
        Ok(Self { level, values })
    }

    pub fn from_real(level: usize, values: &[T]) -> Result<Self> {
        Self::new(level, values.iter().map(|&v| Complex::new(v, T::zero())).collect())
    }

    pub fn constant(level: usize, v: Complex<T>) -> Result<Self> {
        Self::new(level, vec![v; 1 << level])
    }

    #[inline]
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// The diagonal matrix carrying these values.
    pub fn to_diagonal(&self) -> Matrix<T> {
        Matrix::from_complex_diag(&self.values)
    }
}

fn check_cell(k: usize, level: usize) -> Result<()> {
    FactorSpace::new(level)?;
    if k >= 1 << level {
        return Err(Error::IndexOutOfLevel {
            index: k,
            level,
            limit: 1 << level,
        });
    }
    Ok(())
}

/// `μ_α(I_k)` at resolution `2^{-level}`.
pub fn mu_weight<T: Real>(k: usize, level: usize, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    check_cell(k, level)?;
    Ok((0..level)
        .map(|i| if k >> (level - 1 - i) & 1 == 0 { alpha } else { T::one() - alpha })
        .fold(T::one(), |acc, w| acc * w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicWeightTable<T> {
    level: usize,
    alpha: T,
    weights: Vec<T>,
}

impl<T: Real> DyadicWeightTable<T> {
    pub fn new(level: usize, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        FactorSpace::new(level)?;
        let weights = (0..1usize << level)
            .map(|k| mu_weight(k, level, alpha))
            .collect::<Result<_>>()?;
        Ok(Self { level, alpha, weights })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Splits every interval in two: the left half gets weight `α·w`, the right `(1-α)·w`.
    pub fn refine(&self) -> Result<Self> {
        FactorSpace::new(self.level + 1)?;
        let weights = self
            .weights
            .iter()
            .flat_map(|&w| [w * self.alpha, w * (T::one() - self.alpha)])
            .collect();
        Ok(Self {
            level: self.level + 1,
            alpha: self.alpha,
            weights,
        })
    }
}

/// The classical Walsh function `z_n` sampled on the level-`L` grid.
pub fn classical_walsh_values<T: Real>(n: usize, level: usize) -> Result<StepFunction<T>> {
    FactorSpace::new(level)?;
    if n >= 1 << level {
        return Err(Error::IndexOutOfLevel {
            index: n,
            level,
            limit: 1 << level,
        });
    }
    let values = (0..1usize << level)
        .map(|k| {
            let flips = (0..level)
                .filter(|&i| n >> i & 1 == 1 && k >> (level - 1 - i) & 1 == 1)
                .count();
            let v = if flips % 2 == 0 { T::one() } else { -T::one() };
            Complex::new(v, T::zero())
        })
        .collect();
    StepFunction::new(level, values)
}

/// Reads a diagonal matrix as a step function.
pub fn diag_to_step<T: Real>(x: &Matrix<T>) -> Result<StepFunction<T>> {
    let level = FactorSpace::from_dim(x.dim())?;
    let off = x.off_diagonal_max();
    if off > T::lit(DIAGONAL_TOL) {
        return Err(Error::NotDiagonal(off.to_f64_lossy()));
    }
    StepFunction::new(level.m(), x.diagonal())
}

/// `(Σ_k |f_k|^p μ_α(I_k))^{1/p}`, or `max |f_k|` for `p = ∞`.
pub fn step_lp_norm<T: Real>(f: &StepFunction<T>, p: T, alpha: T) -> Result<T> {
    if p.is_nan() || p < T::one() {
        return Err(Error::InvalidExponent(p.to_f64_lossy()));
    }
    let table = DyadicWeightTable::new(f.level(), alpha)?;
    Ok(weighted_lp(f.values(), table.weights(), p))
}

/// Walsh index of `z_n` in the full system: binary digit `i` of `n` moves to position `2i`.
pub fn diag_index_map(n: usize) -> usize {
    (0..usize::BITS as usize / 2)
        .filter(|&i| n >> i & 1 == 1)
        .fold(0, |acc, i| acc | 1 << (2 * i))
}

/// `f ↦ Σ_{k ≤ n} ⟨z_k, f⟩ z_k` (Lebesgue pairing) as a `2^L × 2^L` matrix.
pub fn classical_partial_sum_matrix<T: Real>(n: usize, level: usize) -> Result<Matrix<T>> {
    let dim = 1usize << level;
    if n >= dim {
        return Err(Error::IndexOutOfLevel {
            index: n,
            level,
            limit: dim,
        });
    }
    let funcs: Vec<StepFunction<T>> = (0..=n).map(|k| classical_walsh_values(k, level)).collect::<Result<_>>()?;
    let scale = T::one() / T::lit(dim as f64);
    Ok(Matrix::from_fn(dim, |r, c| {
        funcs
            .iter()
            .map(|f| f.values()[r] * f.values()[c])
            .fold(Complex::zero(), |a, b| a + b)
            * scale
    }))
}

/// Applies the classical `P_n` to a step function.
pub fn classical_partial_sum<T: Real>(f: &StepFunction<T>, n: usize) -> Result<StepFunction<T>> {
    let m: Matrix<T> = classical_partial_sum_matrix(n, f.level())?;
    let dim = m.dim();
    let values = (0..dim)
        .map(|r| (0..dim).map(|c| m.get(r, c) * f.values()[c]).fold(Complex::<T>::zero(), |a, b| a + b))
        .collect();
    StepFunction::new(f.level(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalRow<T> {
    pub n: usize,
    pub p: T,
    pub alpha: T,
    pub report: NormReport<T>,
}

/// `‖P_n‖` on `L^p([0,1], μ_α)` at resolution `2^{-level}`, `n = 0..=n_max`.
#[allow(clippy::too_many_arguments)]
pub fn classical_sweep<T: Real>(
    level: usize,
    alpha: T,
    p: T,
    n_max: usize,
    method: NormMethod,
    restarts: usize,
    seed: u64,
    tol: T,
) -> Result<Vec<ClassicalRow<T>>> {
    let table = DyadicWeightTable::new(level, alpha)?;
    let geometry = WeightedSequenceGeometry::new(p, table.weights().to_vec())?;
    if n_max >= 1 << level {
        return Err(Error::IndexOutOfLevel {
            index: n_max,
            level,
            limit: 1 << level,
        });
    }
    if method == NormMethod::Exact2 && p != T::lit(2.0) {
        return Err(Error::InvalidArgument("exact2 is only available at p = 2".into()));
    }
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let op = classical_partial_sum_matrix(n, level)?;
            let report = match method {
                NormMethod::Exact2 => exact_norm_with(&op, &geometry)?,
                NormMethod::Estimate => {
                    let r = estimate_norm_with(&op, &geometry, restarts, derive_seed(seed, n as u64), tol)?;
                    NormReport { seed, ..r }
                }
            };
            Ok(ClassicalRow { n, p, alpha, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walsh::{walsh_matrix, GeneratorMode};

    #[test]
    fn weight_examples() {
        assert!((mu_weight(0, 1, 0.3f64).unwrap() - 0.3).abs() < 1e-15);
        assert!((mu_weight(3, 2, 0.3f64).unwrap() - 0.49).abs() < 1e-15);
        for k in 0..8 {
            assert!((mu_weight(k, 3, 0.5f64).unwrap() - 0.125).abs() < 1e-15);
        }
        assert!(mu_weight(4, 2, 0.3).is_err());
        let t = DyadicWeightTable::new(3, 0.3f64).unwrap();
        let r = t.refine().unwrap();
        assert_eq!(r.weights().len(), 16);
        assert!((r.weights()[5] - t.weights()[2] * 0.7).abs() < 1e-16);
        assert!((r.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn walsh_value_examples() {
        let re = |f: StepFunction<f64>| f.values().iter().map(|z| z.re).collect::<Vec<_>>();
        assert_eq!(re(classical_walsh_values(0, 2).unwrap()), vec![1.0; 4]);
        assert_eq!(re(classical_walsh_values(1, 2).unwrap()), vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(re(classical_walsh_values(2, 2).unwrap()), vec![1.0, -1.0, 1.0, -1.0]);
        assert!(classical_walsh_values::<f64>(4, 2).is_err());
    }

    #[test]
    fn diagonal_examples() {
        let id = diag_to_step(&Matrix::<f64>::identity(4)).unwrap();
        assert!(id.values().iter().all(|z| *z == Complex::new(1.0, 0.0)));
        let z1 = walsh_matrix(1, FactorSpace::new(2).unwrap(), 0.5, GeneratorMode::Paper).unwrap();
        assert_eq!(diag_to_step(&z1).unwrap(), classical_walsh_values(1, 2).unwrap());
        let d = Matrix::<f64>::from_diag(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(diag_to_step(&d).unwrap(), StepFunction::from_real(2, &[1.0, 2.0, 3.0, 4.0]).unwrap());
        let w2 = walsh_matrix(2, FactorSpace::new(1).unwrap(), 0.5, GeneratorMode::Paper).unwrap();
        assert!(matches!(diag_to_step(&w2), Err(Error::NotDiagonal(_))));
    }

    #[test]
    fn norm_examples() {
        let one = StepFunction::constant(3, Complex::new(1.0f64, 0.0)).unwrap();
        assert!((step_lp_norm(&one, 3.0, 0.3).unwrap() - 1.0).abs() < 1e-14);
        let z1 = classical_walsh_values(1, 3).unwrap();
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((step_lp_norm(&z1, p, 0.1).unwrap() - 1.0).abs() < 1e-14);
        }
        let ind = StepFunction::from_real(1, &[1.0, 0.0]).unwrap();
        assert!((step_lp_norm(&ind, 2.0, 0.3).unwrap() - 0.3f64.sqrt()).abs() < 1e-15);
        assert!(step_lp_norm(&ind, 0.5, 0.3).is_err());
    }

    #[test]
    fn index_map_examples() {
        assert_eq!(diag_index_map(0), 0);
        assert_eq!(diag_index_map(3), 5);
        assert_eq!(diag_index_map(5), 17);
    }

    #[test]
    fn tracial_partial_sums_are_contractions() {
        let rows = classical_sweep(3, 0.5f64, 2.0, 7, NormMethod::Exact2, 0, 0, 1e-6).unwrap();
        for r in rows {
            assert!((r.report.value - 1.0).abs() < 1e-10, "n = {}", r.n);
        }
        let f = classical_walsh_values::<f64>(5, 3).unwrap();
        assert_eq!(classical_partial_sum(&f, 4).unwrap().values().iter().map(|z| z.norm()).sum::<f64>(), 0.0);
    }
}
