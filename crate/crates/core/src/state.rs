//! Biased product states, weighted L^p norms and the conditional-expectation
//! filtration.
//!
//! The ambient algebra is `M_2^{⊗m}` with density `A_m = diag(α, 1-α)^{⊗m}`.
//! For `s ≥ 0` the subalgebra `N_s` keeps the first `⌊s/2⌋` factors in full; for
//! even `s` factor `s/2` is restricted to its diagonal, for odd `s` factor
//! `(s-1)/2` is kept in full. All remaining factors are traced out against the
//! state and replaced by the identity. `N_{-1}` is the scalars.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{psd_power, schatten_norm, FactorSpace, Matrix};
use crate::scalar::Real;
use crate::walsh::check_alpha;

/// Bias `α ∈ (0, 1/2]` at ambient level `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpec<T> {
    alpha: T,
    level: FactorSpace,
}

impl<T: Real> StateSpec<T> {
    pub fn new(alpha: T, m: usize) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            level: FactorSpace::new(m)?,
        })
    }

    #[inline]
    pub fn alpha(&self) -> T {
        self.alpha
    }

    #[inline]
    pub fn level(&self) -> FactorSpace {
        self.level
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.level.m()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.level.dim()
    }

    /// `λ = α / (1 - α)`.
    pub fn lambda(&self) -> T {
        self.alpha / (T::one() - self.alpha)
    }

    pub fn is_tracial(&self) -> bool {
        self.alpha == T::lit(0.5)
    }

    /// Single-factor weights `(α, 1-α)`.
    pub fn factor_weights(&self) -> [T; 2] {
        [self.alpha, T::one() - self.alpha]
    }

    /// Diagonal of `A_m`; basis index bit `m-1-f` belongs to factor `f`.
    pub fn density_diag(&self) -> Vec<T> {
        product_weights(&vec![self.factor_weights(); self.m()])
    }

    pub(crate) fn check_dim(&self, x: &Matrix<T>) -> Result<()> {
        if x.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            })
        }
    }
}

/// Diagonal of `⊗_f diag(w_f)` with factor 0 major.
pub(crate) fn product_weights<T: Real>(factors: &[[T; 2]]) -> Vec<T> {
    let m = factors.len();
    (0..1usize << m)
        .map(|k| {
            factors
                .iter()
                .enumerate()
                .map(|(f, w)| w[(k >> (m - 1 - f)) & 1])
                .fold(T::one(), |acc, v| acc * v)
        })
        .collect()
}

/// Which side the density multiplies in the L^p norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Side {
    /// `Tr(|x A^{1/p}|^p)^{1/p}`.
    #[default]
    Left,
    /// `Tr(|A^{1/p} x|^p)^{1/p}`.
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::InvalidArgument(format!("unknown side `{other}`"))),
        }
    }
}

/// Exponent, side and (diagonal) density fixing an L^p norm.
#[derive(Debug, Clone)]
pub struct LpContext<T> {
    p: T,
    side: Side,
    density: Arc<[T]>,
    powered: Arc<[T]>,
}

impl<T: Real> LpContext<T> {
    pub fn new(p: T, state: &StateSpec<T>, side: Side) -> Result<Self> {
        Self::with_density(p, state.density_diag(), side)
    }

    /// Context over an arbitrary positive diagonal density.
    pub fn with_density(p: T, density: Vec<T>, side: Side) -> Result<Self> {
        if p.is_nan() || p < T::one() {
            return Err(Error::InvalidExponent(p.to_f64_lossy()));
        }
        if density.iter().any(|&d| !(d > T::zero())) {
            return Err(Error::InvalidArgument("density must be positive definite".into()));
        }
        let powered: Vec<T> = if p.is_infinite() {
            vec![T::one(); density.len()]
        } else {
            density.iter().map(|&d| d.powf(T::one() / p)).collect()
        };
        Ok(Self {
            p,
            side,
            density: density.into(),
            powered: powered.into(),
        })
    }

    #[inline]
    pub fn p(&self) -> T {
        self.p
    }

    #[inline]
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.density.len()
    }

    /// Same density and side at another exponent.
    pub fn at_p(&self, p: T) -> Result<Self> {
        Self::with_density(p, self.density.to_vec(), self.side)
    }

    /// `x A^{1/p}` (left) or `A^{1/p} x` (right); `x` itself for `p = ∞`.
    pub fn weighted(&self, x: &Matrix<T>) -> Matrix<T> {
        if self.p.is_infinite() {
            return x.clone();
        }
        match self.side {
            Side::Left => x.scale_columns(&self.powered),
            Side::Right => x.scale_rows(&self.powered),
        }
    }

    /// Adjoint of [`Self::weighted`] under the Hilbert–Schmidt pairing.
    pub(crate) fn weighted_adjoint(&self, g: &Matrix<T>) -> Matrix<T> {
        // A^{1/p} is real diagonal, hence self-adjoint.
        self.weighted(g)
    }
}

/// `A_m` as a matrix.
pub fn state_density<T: Real>(spec: &StateSpec<T>) -> Matrix<T> {
    Matrix::from_diag(&spec.density_diag())
}

/// `ρ(x) = Tr(x A_m)`.
pub fn rho_value<T: Real>(x: &Matrix<T>, spec: &StateSpec<T>) -> Result<Complex<T>> {
    spec.check_dim(x)?;
    Ok(rho_with(x, &spec.density_diag()))
}

pub(crate) fn rho_with<T: Real>(x: &Matrix<T>, density: &[T]) -> Complex<T> {
    density
        .iter()
        .enumerate()
        .map(|(k, &a)| x.get(k, k) * a)
        .sum()
}

pub fn lp_norm<T: Real>(x: &Matrix<T>, ctx: &LpContext<T>) -> Result<T> {
    if x.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            found: x.dim(),
        });
    }
    schatten_norm(&ctx.weighted(x), ctx.p)
}

/// Modular flow `A^{it} x A^{-it}`.
pub fn modular_flow<T: Real>(x: &Matrix<T>, t: T, spec: &StateSpec<T>) -> Result<Matrix<T>> {
    spec.check_dim(x)?;
    let a = state_density(spec);
    let forward = psd_power(&a, Complex::new(T::zero(), t))?;
    let backward = psd_power(&a, Complex::new(T::zero(), -t))?;
    Ok(forward.matmul(x).matmul(&backward))
}

/// Per-factor action of a product conditional expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorAction<T> {
    Keep,
    /// Restrict the factor to its diagonal.
    Pinch,
    /// Trace the factor against `diag(w)` and replace it with the identity.
    Slice([T; 2]),
}

/// Applies one action per tensor factor (factor 0 major).
pub fn factorwise_expectation<T: Real>(x: &Matrix<T>, actions: &[FactorAction<T>]) -> Matrix<T> {
    let m = actions.len();
    let dim = 1usize << m;
    assert_eq!(x.dim(), dim, "action list does not match the dimension");
    let bit = |f: usize| 1usize << (m - 1 - f);
    let mut slice_mask = 0usize;
    let mut pinch_mask = 0usize;
    let mut sliced = Vec::new();
    for (f, a) in actions.iter().enumerate() {
        match a {
            FactorAction::Keep => {}
            FactorAction::Pinch => pinch_mask |= bit(f),
            FactorAction::Slice(w) => {
                slice_mask |= bit(f);
                sliced.push((bit(f), *w));
            }
        }
    }
    // All assignments of the sliced bits with their joint weight.
    let mut subs: Vec<(usize, T)> = vec![(0, T::one())];
    for &(b, w) in &sliced {
        subs = subs
            .iter()
            .flat_map(|&(s, ws)| [(s, ws * w[0]), (s | b, ws * w[1])])
            .collect();
    }
    let mut out = Matrix::zeros(dim);
    for r in (0..dim).filter(|r| r & slice_mask == 0) {
        for c in (0..dim).filter(|c| c & slice_mask == 0) {
            if (r ^ c) & pinch_mask != 0 {
                continue;
            }
            let v: Complex<T> = subs.iter().map(|&(b, w)| x.get(r | b, c | b) * w).sum();
            if v.is_zero() {
                continue;
            }
            for &(b, _) in &subs {
                out.set(r | b, c | b, v);
            }
        }
    }
    out
}

/// Factor actions realizing `E_s` at level `m`.
pub(crate) fn filtration_actions<T: Real>(m: usize, s: i64, weights: [T; 2]) -> Vec<FactorAction<T>> {
    let kept = ((s + 2) / 2) as usize;
    (0..m)
        .map(|f| {
            if f + 1 < kept {
                FactorAction::Keep
            } else if f + 1 == kept {
                if s % 2 == 0 {
                    FactorAction::Pinch
                } else {
                    FactorAction::Keep
                }
            } else {
                FactorAction::Slice(weights)
            }
        })
        .collect()
}

fn check_step(s: i64, min: i64, max: i64) -> Result<()> {
    if (min..=max).contains(&s) {
        Ok(())
    } else {
        Err(Error::StepOutOfRange { step: s, min, max })
    }
}

/// The state-preserving conditional expectation `E_s` onto `N_s`,
/// `s ∈ [-1, 2m-1]`, re-embedded at the ambient dimension.
pub fn cond_expect<T: Real>(x: &Matrix<T>, s: i64, spec: &StateSpec<T>) -> Result<Matrix<T>> {
    spec.check_dim(x)?;
    let top = 2 * spec.m() as i64 - 1;
    check_step(s, -1, top)?;
    if s == top {
        return Ok(x.clone());
    }
    if s == -1 {
        let rho = rho_value(x, spec)?;
        return Ok(Matrix::identity(spec.dim()).scale(rho));
    }
    Ok(factorwise_expectation(
        x,
        &filtration_actions(spec.m(), s, spec.factor_weights()),
    ))
}

/// Martingale difference `D_s = E_s - E_{s-1}`, `s ∈ [0, 2m-1]`.
pub fn mart_diff<T: Real>(x: &Matrix<T>, s: i64, spec: &StateSpec<T>) -> Result<Matrix<T>> {
    check_step(s, 0, 2 * spec.m() as i64 - 1)?;
    Ok(&cond_expect(x, s, spec)? - &cond_expect(x, s - 1, spec)?)
}

/// `ρ(x)·I` followed by every difference `D_0 x, …, D_{2m-1} x`.
pub fn martingale_components<T: Real>(x: &Matrix<T>, spec: &StateSpec<T>) -> Result<Vec<Matrix<T>>> {
    let top = 2 * spec.m() as i64 - 1;
    let levels: Vec<Matrix<T>> = (-1..=top)
        .map(|s| cond_expect(x, s, spec))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(levels.len());
    out.push(levels[0].clone());
    for w in levels.windows(2) {
        out.push(&w[1] - &w[0]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walsh::{walsh_matrix, GeneratorMode};
    use num_complex::Complex64;

    type M = Matrix<f64>;

    fn w(n: usize, m: usize) -> M {
        walsh_matrix(n, FactorSpace::new(m).unwrap(), 0.5, GeneratorMode::Paper).unwrap()
    }

    #[test]
    fn density_examples() {
        let d = state_density(&StateSpec::new(0.5, 2).unwrap());
        assert!(d.max_abs_diff(&M::identity(4).scale_real(0.25)) < 1e-15);
        let d = state_density(&StateSpec::new(0.3, 1).unwrap());
        assert!(d.max_abs_diff(&M::from_diag(&[0.3, 0.7])) < 1e-15);
        let d = state_density(&StateSpec::new(0.3, 2).unwrap());
        assert!(d.max_abs_diff(&M::from_diag(&[0.09, 0.21, 0.21, 0.49])) < 1e-15);
        assert!(matches!(StateSpec::new(0.7, 2), Err(Error::InvalidAlpha(_))));
        assert!(StateSpec::new(0.3, 0).is_err());
        let spec = StateSpec::new(0.2f64, 3).unwrap();
        assert!((spec.lambda() - 0.25).abs() < 1e-15);
        assert!((spec.density_diag().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_examples() {
        let spec = StateSpec::new(0.3, 1).unwrap();
        assert!((rho_value(&M::identity(2), &spec).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((rho_value(&w(1, 1), &spec).unwrap() - Complex64::new(-0.4, 0.0)).norm() < 1e-15);
        let spec2 = StateSpec::new(0.3, 2).unwrap();
        assert!((rho_value(&w(5, 2), &spec2).unwrap() - Complex64::new(0.16, 0.0)).norm() < 1e-15);
        assert!(matches!(rho_value(&M::identity(4), &spec), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lp_norm_examples() {
        let spec = StateSpec::new(0.3, 1).unwrap();
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            for side in [Side::Left, Side::Right] {
                let ctx = LpContext::new(p, &spec, side).unwrap();
                assert!((lp_norm(&M::identity(2), &ctx).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        let ctx = LpContext::new(2.0, &spec, Side::Left).unwrap();
        let v = lp_norm(&M::unit(2, 0, 1), &ctx).unwrap();
        assert!((v - 0.7f64.sqrt()).abs() < 1e-12);
        assert!((v - 0.836660).abs() < 1e-6);
        assert!(matches!(LpContext::new(0.9, &spec, Side::Left), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn modular_flow_examples() {
        let spec = StateSpec::new(0.3, 1).unwrap();
        let e12 = M::unit(2, 0, 1);
        assert!(modular_flow(&e12, 0.0, &spec).unwrap().max_abs_diff(&e12) < 1e-14);
        let t = 0.9;
        let phase = (Complex64::new(0.0, t) * (0.3f64 / 0.7).ln()).exp();
        assert!(modular_flow(&e12, t, &spec).unwrap().max_abs_diff(&e12.scale(phase)) < 1e-13);
        let d = M::from_diag(&[2.0, -5.0]);
        assert!(modular_flow(&d, 1.3, &spec).unwrap().max_abs_diff(&d) < 1e-13);
    }

    #[test]
    fn cond_expect_examples() {
        let x = M::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        for alpha in [0.5, 0.3, 0.1] {
            let spec = StateSpec::new(alpha, 1).unwrap();
            let e0 = cond_expect(&x, 0, &spec).unwrap();
            assert!(e0.max_abs_diff(&M::from_diag(&[1.0, 4.0])) < 1e-15);
            // Characterizing property against diagonal test elements.
            let a = state_density(&spec);
            for d in [M::from_diag(&[1.0, 0.0]), M::from_diag(&[0.0, 1.0])] {
                let lhs = e0.matmul(&d).matmul(&a).trace();
                let rhs = x.matmul(&d).matmul(&a).trace();
                assert!((lhs - rhs).norm() < 1e-15);
            }
            let full = cond_expect(&x, -1, &spec).unwrap();
            let rho = rho_value(&x, &spec).unwrap();
            assert!(full.max_abs_diff(&M::identity(2).scale(rho)) < 1e-15);
        }
        let spec = StateSpec::new(0.3, 2).unwrap();
        let e1 = cond_expect(&w(4, 2), 1, &spec).unwrap();
        assert!(e1.max_abs_diff(&M::identity(4).scale_real(-0.4)) < 1e-15);
        assert!(matches!(cond_expect(&w(4, 2), 4, &spec), Err(Error::StepOutOfRange { .. })));
        assert!(cond_expect(&w(4, 2), -2, &spec).is_err());
    }

    #[test]
    fn mart_diff_examples() {
        let w1 = w(1, 1);
        let tracial = StateSpec::new(0.5, 1).unwrap();
        assert!(mart_diff(&w1, 0, &tracial).unwrap().max_abs_diff(&w1) < 1e-15);
        let biased = StateSpec::new(0.3, 1).unwrap();
        let expect = &w1 + &M::identity(2).scale_real(0.4);
        assert!(mart_diff(&w1, 0, &biased).unwrap().max_abs_diff(&expect) < 1e-15);
        for alpha in [0.5, 0.3, 0.1] {
            let spec = StateSpec::new(alpha, 1).unwrap();
            assert!(mart_diff(&w(2, 1), 1, &spec).unwrap().max_abs_diff(&w(2, 1)) < 1e-15);
        }
        assert!(mart_diff(&w1, -1, &biased).is_err());
    }

    #[test]
    fn filtration_shape() {
        let acts = filtration_actions::<f64>(3, 2, [0.3, 0.7]);
        assert_eq!(acts[0], FactorAction::Keep);
        assert_eq!(acts[1], FactorAction::Pinch);
        assert_eq!(acts[2], FactorAction::Slice([0.3, 0.7]));
        let acts = filtration_actions::<f64>(3, 3, [0.3, 0.7]);
        assert_eq!(acts[1], FactorAction::Keep);
        assert_eq!(acts[2], FactorAction::Slice([0.3, 0.7]));
    }
}
