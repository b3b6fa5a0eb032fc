//! Two biased towers side by side: `M_2^{⊗m} ⊗ M_2^{⊗m'}` with density
//! `A_m(α) ⊗ A_{m'}(α')`, the doubly indexed Walsh system in shell order and
//! the factor projections.
//!
//! The left tower occupies factors `0..m` of the joint space, so joint Walsh
//! index `i + 4^m j` is `w_i ⊗ w'_j`.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{kron, FactorSpace, Matrix};
use crate::scalar::Real;
use crate::schauder::norms::{operator_norm, NormMethod, NormReport};
use crate::schauder::OperatorHandle;
use crate::rng::derive_seed;
use crate::state::{factorwise_expectation, filtration_actions, lp_norm, FactorAction, LpContext, Side, StateSpec};
use crate::walsh::{walsh_coefficients, walsh_matrix, synthesize_at, GeneratorMode, WalshIndex};

/// Note recorded with every tensor output: the ratio condition on
/// `log λ / log λ'` is a property of the infinite tower and is not checked.
pub const IRRATIONALITY_NOTE: &str =
    "log(lambda)/log(lambda2) irrationality is a hypothesis of the infinite construction and is not checked";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorContext<T> {
    left: StateSpec<T>,
    right: StateSpec<T>,
}

impl<T: Real> TensorContext<T> {
    pub fn new(left: StateSpec<T>, right: StateSpec<T>) -> Result<Self> {
        FactorSpace::new(left.m() + right.m())?;
        Ok(Self { left, right })
    }

    pub fn from_parts(alpha: T, m: usize, alpha2: T, m2: usize) -> Result<Self> {
        Self::new(StateSpec::new(alpha, m)?, StateSpec::new(alpha2, m2)?)
    }

    pub fn left(&self) -> &StateSpec<T> {
        &self.left
    }

    pub fn right(&self) -> &StateSpec<T> {
        &self.right
    }

    pub fn joint_level(&self) -> FactorSpace {
        FactorSpace::new(self.left.m() + self.right.m()).expect("validated at construction")
    }

    pub fn dim(&self) -> usize {
        self.left.dim() * self.right.dim()
    }

    pub fn density_diag(&self) -> Vec<T> {
        let a = self.left.density_diag();
        let b = self.right.density_diag();
        a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
    }

    pub fn lp_context(&self, p: T, side: Side) -> Result<LpContext<T>> {
        LpContext::with_density(p, self.density_diag(), side)
    }

    /// Largest shell index whose pair fits both levels.
    pub fn max_shell_index(&self) -> usize {
        max_shell_index(self.left.level().walsh_len(), self.right.level().walsh_len())
    }

    fn check_dim(&self, x: &Matrix<T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        WalshIndex(i).check_level(self.left.level())?;
        WalshIndex(j).check_level(self.right.level())
    }
}

/// `φ(i, j)`: `j² + i` for `i ≤ j`, `(i+1)² − j − 1` otherwise.
pub fn shell_index(i: usize, j: usize) -> usize {
    if i <= j {
        j * j + i
    } else {
        (i + 1) * (i + 1) - j - 1
    }
}

/// Inverse of [`shell_index`].
pub fn shell_pair(n: usize) -> (usize, usize) {
    let l = n.isqrt();
    let r = n - l * l;
    if r <= l {
        (r, l)
    } else {
        (l, (l + 1) * (l + 1) - 1 - n)
    }
}

/// Largest `φ(i, j)` over `i < a`, `j < b`.
pub fn max_shell_index(a: usize, b: usize) -> usize {
    // φ grows with max(i, j); within the last shell the largest values sit at
    // the far end of the longer side.
    if a >= b {
        shell_index(a - 1, 0)
    } else {
        shell_index(a - 1, b - 1)
    }
}

/// `z_n = w_i ⊗ w'_j` with `(i, j) = shell_pair(n)`.
pub fn double_walsh<T: Real>(n: usize, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    let (i, j) = shell_pair(n);
    ctx.check_pair(i, j)?;
    let a = walsh_matrix(i, ctx.left.level(), ctx.left.alpha(), GeneratorMode::Paper)?;
    let b = walsh_matrix(j, ctx.right.level(), ctx.right.alpha(), GeneratorMode::Paper)?;
    kron(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorSide {
    /// Image `N ⊗ 1`.
    First,
    /// Image `1 ⊗ M`.
    Second,
}

/// The product-state preserving expectation onto one tensor factor.
pub fn factor_expectation<T: Real>(x: &Matrix<T>, side: TensorSide, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    ctx.check_dim(x)?;
    let (m, m2) = (ctx.left.m(), ctx.right.m());
    let actions: Vec<FactorAction<T>> = match side {
        TensorSide::First => std::iter::repeat_n(FactorAction::Keep, m)
            .chain(std::iter::repeat_n(FactorAction::Slice(ctx.right.factor_weights()), m2))
            .collect(),
        TensorSide::Second => std::iter::repeat_n(FactorAction::Slice(ctx.left.factor_weights()), m)
            .chain(std::iter::repeat_n(FactorAction::Keep, m2))
            .collect(),
    };
    Ok(factorwise_expectation(x, &actions))
}

/// `F_{second,j}(x) = (1⊗w'_j) E_first((1⊗w'_j)† x)` and the mirrored
/// `F_{first,j}(x) = (w_j⊗1) E_second((w_j⊗1)† x)`.
pub fn factor_projection<T: Real>(
    x: &Matrix<T>,
    side: TensorSide,
    j: usize,
    ctx: &TensorContext<T>,
) -> Result<Matrix<T>> {
    ctx.check_dim(x)?;
    let v = match side {
        TensorSide::Second => {
            WalshIndex(j).check_level(ctx.right.level())?;
            let w = walsh_matrix(j, ctx.right.level(), ctx.right.alpha(), GeneratorMode::Paper)?;
            kron(&Matrix::identity(ctx.left.dim()), &w)?
        }
        TensorSide::First => {
            WalshIndex(j).check_level(ctx.left.level())?;
            let w = walsh_matrix(j, ctx.left.level(), ctx.left.alpha(), GeneratorMode::Paper)?;
            kron(&w, &Matrix::identity(ctx.right.dim()))?
        }
    };
    let inner = match side {
        TensorSide::Second => TensorSide::First,
        TensorSide::First => TensorSide::Second,
    };
    Ok(v.matmul(&factor_expectation(&v.dagger().matmul(x), inner, ctx)?))
}

fn masked<T: Real>(x: &Matrix<T>, ctx: &TensorContext<T>, keep: impl Fn(usize, usize) -> bool) -> Result<Matrix<T>> {
    ctx.check_dim(x)?;
    let mut c = walsh_coefficients(x)?;
    let a = ctx.left.level().walsh_len();
    for (k, v) in c.iter_mut().enumerate() {
        if !keep(k % a, k / a) {
            *v = Complex::zero();
        }
    }
    synthesize_at(&c, ctx.joint_level().m())
}

/// `Q_n x = Σ_{k ≤ n} c_k z_k` over the pairs that fit both levels.
pub fn tensor_partial_sum<T: Real>(x: &Matrix<T>, n: usize, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    check_shell(n, ctx)?;
    masked(x, ctx, |i, j| shell_index(i, j) <= n)
}

fn check_shell<T: Real>(n: usize, ctx: &TensorContext<T>) -> Result<()> {
    let limit = ctx.max_shell_index() + 1;
    if n >= limit {
        return Err(Error::IndexOutOfLevel {
            index: n,
            level: ctx.joint_level().m(),
            limit,
        });
    }
    Ok(())
}

/// Coefficient truncations on one factor (`bound < 0` keeps nothing).
fn truncate<T: Real>(x: &Matrix<T>, side: TensorSide, bound: i64, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    masked(x, ctx, |i, j| {
        let k = if side == TensorSide::First { i } else { j };
        (k as i64) <= bound
    })
}

fn select<T: Real>(x: &Matrix<T>, side: TensorSide, index: usize, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    masked(x, ctx, |i, j| (if side == TensorSide::First { i } else { j }) == index)
}

#[derive(Debug, Clone)]
pub struct ShellDecomposition<T> {
    pub square: Matrix<T>,
    pub remainder: Matrix<T>,
    /// `Q_n x − square − remainder`.
    pub residual: Matrix<T>,
    pub residual_max: T,
    /// `(‖square‖, ‖remainder‖)` per requested context.
    pub part_norms: Vec<(T, T)>,
}

/// Splits `Q_n x` into the full square `{0..l−1}²` and the partial shell `l`,
/// built from one-sided truncations, and reports the mismatch with `Q_n x`.
pub fn shell_decomposition_check<T: Real>(
    x: &Matrix<T>,
    n: usize,
    ctx: &TensorContext<T>,
    contexts: &[LpContext<T>],
) -> Result<ShellDecomposition<T>> {
    let target = tensor_partial_sum(x, n, ctx)?;
    let (first, second) = (TensorSide::First, TensorSide::Second);
    let full_side = (n + 1).isqrt();
    let (square, remainder) = if full_side * full_side == n + 1 {
        let l = full_side as i64 - 1;
        (truncate(&truncate(x, second, l, ctx)?, first, l, ctx)?, Matrix::zeros(x.dim()))
    } else {
        let l = n.isqrt();
        let li = l as i64;
        let square = truncate(&truncate(x, second, li - 1, ctx)?, first, li - 1, ctx)?;
        let remainder = if n <= l * l + l {
            // (i, l) for i ≤ n − l².
            select(&truncate(x, first, (n - l * l) as i64, ctx)?, second, l, ctx)?
        } else {
            // All of (·, l) up to i = l, then (l, j) for j ≥ (l+1)² − 1 − n.
            let column = select(&truncate(x, first, li, ctx)?, second, l, ctx)?;
            let low = (l + 1) * (l + 1) - 1 - n;
            let band = &truncate(x, second, li - 1, ctx)? - &truncate(x, second, low as i64 - 1, ctx)?;
            &column + &select(&band, first, l, ctx)?
        };
        (square, remainder)
    };
    let residual = &(&target - &square) - &remainder;
    let part_norms = contexts
        .iter()
        .map(|c| Ok((lp_norm(&square, c)?, lp_norm(&remainder, c)?)))
        .collect::<Result<_>>()?;
    Ok(ShellDecomposition {
        residual_max: residual.max_abs(),
        square,
        remainder,
        residual,
        part_norms,
    })
}

/// `x ↦ (id ⊗ E_s) x` on the second tower; `s = -1` slices it completely.
fn second_expectation<T: Real>(x: &Matrix<T>, s: i64, ctx: &TensorContext<T>) -> Matrix<T> {
    let actions: Vec<FactorAction<T>> = std::iter::repeat_n(FactorAction::Keep, ctx.left.m())
        .chain(filtration_actions(ctx.right.m(), s, ctx.right.factor_weights()))
        .collect();
    factorwise_expectation(x, &actions)
}

/// `Σ_{j ≤ n} F_{second,j}`.
pub fn second_fsum<T: Real>(x: &Matrix<T>, n: usize, ctx: &TensorContext<T>) -> Result<Matrix<T>> {
    WalshIndex(n).check_level(ctx.right.level())?;
    let mut out = Matrix::zeros(x.dim());
    for j in 0..=n {
        out.axpy(Complex::new(T::one(), T::zero()), &factor_projection(x, TensorSide::Second, j, ctx)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TensorIdentityResidual<T> {
    /// With `P^{2nd}_n = id ⊗ P_n` (coefficient truncation on the second tower).
    pub residual: Matrix<T>,
    pub norms: Vec<T>,
    /// With `P^{2nd}_n = Σ_{j≤n} F_{second,j}`.
    pub fsum_residual: Matrix<T>,
    pub fsum_norms: Vec<T>,
    /// `‖S∘S − S‖` entrywise on `x`, for `S = Σ_{j≤n} F_{second,j}`.
    pub fsum_idempotency: T,
}

/// Residual of `(1⊗w'_n) P^{2nd}_n(x) = (id⊗E_{-1} + Σ_{γ_i(n)=1} id⊗D_i)((1⊗w'_n) x)`.
pub fn tensor_identity_residual<T: Real>(
    x: &Matrix<T>,
    n: usize,
    ctx: &TensorContext<T>,
    contexts: &[LpContext<T>],
) -> Result<TensorIdentityResidual<T>> {
    ctx.check_dim(x)?;
    WalshIndex(n).check_level(ctx.right.level())?;
    let w = kron(
        &Matrix::identity(ctx.left.dim()),
        &walsh_matrix(n, ctx.right.level(), ctx.right.alpha(), GeneratorMode::Paper)?,
    )?;
    let shifted = w.matmul(x);
    let mut rhs = second_expectation(&shifted, -1, ctx);
    for s in WalshIndex(n).set_bits() {
        let s = s as i64;
        let d = &second_expectation(&shifted, s, ctx) - &second_expectation(&shifted, s - 1, ctx);
        rhs.axpy(Complex::new(T::one(), T::zero()), &d);
    }
    let truncated = masked(x, ctx, |_, j| j <= n)?;
    let residual = &w.matmul(&truncated) - &rhs;
    let fsum = second_fsum(x, n, ctx)?;
    let fsum_residual = &w.matmul(&fsum) - &rhs;
    let fsum_idempotency = second_fsum(&fsum, n, ctx)?.max_abs_diff(&fsum);
    let norms_of = |r: &Matrix<T>| contexts.iter().map(|c| lp_norm(r, c)).collect::<Result<Vec<_>>>();
    Ok(TensorIdentityResidual {
        norms: norms_of(&residual)?,
        fsum_norms: norms_of(&fsum_residual)?,
        residual,
        fsum_residual,
        fsum_idempotency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSweepRow<T> {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub alpha: T,
    pub alpha2: T,
    pub p: T,
    pub report: NormReport<T>,
}

/// `‖Q_n‖` on the joint `L^p` space for `n = 0..=n_max`.
pub fn tensor_sweep<T: Real>(
    ctx: &TensorContext<T>,
    lp: &LpContext<T>,
    n_max: usize,
    method: NormMethod,
    restarts: usize,
    seed: u64,
    tol: T,
) -> Result<Vec<TensorSweepRow<T>>> {
    check_shell(n_max, ctx)?;
    if lp.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            found: lp.dim(),
        });
    }
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let c = *ctx;
            let op = OperatorHandle::from_fn(ctx.dim(), move |x| {
                tensor_partial_sum(x, n, &c).expect("validated shell index")
            });
            let report = operator_norm(&op, lp, method, restarts, derive_seed(seed, n as u64), tol)?;
            let (i, j) = shell_pair(n);
            Ok(TensorSweepRow {
                n,
                i,
                j,
                alpha: ctx.left.alpha(),
                alpha2: ctx.right.alpha(),
                p: lp.p(),
                report: NormReport { seed, ..report },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Matrix<f64>;

    fn ctx(a: f64, m: usize, b: f64, m2: usize) -> TensorContext<f64> {
        TensorContext::from_parts(a, m, b, m2).unwrap()
    }

    fn w(n: usize, m: usize) -> M {
        walsh_matrix(n, FactorSpace::new(m).unwrap(), 0.5, GeneratorMode::Paper).unwrap()
    }

    #[test]
    fn shell_examples() {
        assert_eq!(shell_index(0, 0), 0);
        assert_eq!(shell_index(1, 1), 2);
        assert_eq!(shell_index(1, 0), 3);
        assert_eq!(shell_index(2, 0), 8);
        assert_eq!(shell_pair(0), (0, 0));
        assert_eq!(shell_pair(5), (1, 2));
        assert_eq!(shell_pair(7), (2, 1));
        for (a, b) in [(4, 4), (4, 16), (16, 4), (1, 5), (5, 1)] {
            let brute = (0..a).flat_map(|i| (0..b).map(move |j| shell_index(i, j))).max().unwrap();
            assert_eq!(max_shell_index(a, b), brute, "{a}x{b}");
        }
    }

    #[test]
    fn double_walsh_examples() {
        let c = ctx(0.3, 1, 0.3, 1);
        assert!(double_walsh(0, &c).unwrap().max_abs_diff(&M::identity(4)) < 1e-15);
        let z3 = kron(&w(1, 1), &M::identity(2)).unwrap();
        assert!(double_walsh(3, &c).unwrap().max_abs_diff(&z3) < 1e-15);
        let z1 = kron(&M::identity(2), &w(1, 1)).unwrap();
        assert!(double_walsh(1, &c).unwrap().max_abs_diff(&z1) < 1e-15);
        assert!(double_walsh(16, &c).is_err());
    }

    #[test]
    fn expectation_examples() {
        let c = ctx(0.3, 1, 0.3, 1);
        let x = kron(&w(1, 1), &M::identity(2)).unwrap();
        assert!(factor_expectation(&x, TensorSide::First, &c).unwrap().max_abs_diff(&x) < 1e-15);
        let y = kron(&w(1, 1), &w(2, 1)).unwrap();
        assert!(factor_expectation(&y, TensorSide::First, &c).unwrap().max_abs() < 1e-15);
        let z = kron(&w(1, 1), &w(1, 1)).unwrap();
        let e = factor_expectation(&z, TensorSide::First, &c).unwrap();
        assert!(e.max_abs_diff(&x.scale_real(-0.4)) < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let c = ctx(0.3, 1, 0.3, 1);
        let x = kron(&w(1, 1), &w(2, 1)).unwrap();
        assert!(factor_projection(&x, TensorSide::Second, 2, &c).unwrap().max_abs_diff(&x) < 1e-15);
        assert!(factor_projection(&x, TensorSide::Second, 1, &c).unwrap().max_abs() < 1e-15);
        let c2 = ctx(0.3, 1, 0.3, 2);
        let x = kron(&w(1, 1), &w(5, 2)).unwrap();
        let expect = kron(&w(1, 1), &w(4, 2)).unwrap().scale_real(-0.4);
        assert!(factor_projection(&x, TensorSide::Second, 4, &c2).unwrap().max_abs_diff(&expect) < 1e-14);
        assert!(factor_projection(&x, TensorSide::Second, 16, &c2).is_err());
    }

    #[test]
    fn partial_sum_examples() {
        let c = ctx(0.3, 1, 0.3, 1);
        let z = |n| double_walsh(n, &c).unwrap();
        let x = &z(0) + &z(3).scale_real(5.0);
        assert!(tensor_partial_sum(&x, 2, &c).unwrap().max_abs_diff(&z(0)) < 1e-14);
        assert!(tensor_partial_sum(&z(2), 2, &c).unwrap().max_abs_diff(&z(2)) < 1e-14);
        assert!(tensor_partial_sum(&x, 15, &c).unwrap().max_abs_diff(&x) < 1e-14);
        assert!(tensor_partial_sum(&x, 16, &c).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let c = ctx(0.3, 1, 0.3, 1);
        let z4 = double_walsh(4, &c).unwrap();
        let d = shell_decomposition_check(&z4, 4, &c, &[]).unwrap();
        assert!(d.square.max_abs() < 1e-14);
        assert!(d.remainder.max_abs_diff(&z4) < 1e-14);
        let x = M::from_fn(4, |r, col| Complex::new((r * 4 + col) as f64, r as f64 - col as f64));
        for n in [0, 3, 8, 15] {
            let d = shell_decomposition_check(&x, n, &c, &[]).unwrap();
            assert!(d.remainder.max_abs() == 0.0, "n = {n}");
            assert!(d.residual_max < 1e-12);
        }
    }

    #[test]
    fn identity_residual_examples() {
        let c = ctx(0.5, 1, 0.3, 1);
        let lp = c.lp_context(2.0, Side::Left).unwrap();
        let x = kron(&M::identity(2), &w(1, 1)).unwrap();
        let r = tensor_identity_residual(&x, 0, &c, &[lp]).unwrap();
        assert!((r.norms[0] - 0.4).abs() < 1e-12);
        assert!(r.fsum_norms[0] < 1e-12);
        let f0 = second_fsum(&x, 0, &c).unwrap();
        assert!(f0.max_abs_diff(&M::identity(4).scale_real(-0.4)) < 1e-14);
    }
}
