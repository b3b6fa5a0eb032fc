//! Partial-sum projections, block projections and the residual of the
//! partial-sum identity, together with norm engines and sweeps built on them.

pub mod norms;
pub mod operator;
pub mod sweep;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{FactorSpace, Matrix};
use crate::scalar::Real;
use crate::state::{cond_expect, lp_norm, mart_diff, rho_value, LpContext, Side, StateSpec};
use crate::walsh::{coefficients_in, synthesize_in, walsh_matrix, GeneratorMode, WalshIndex};

pub use norms::{
    estimate_norm_lp, estimate_norm_with, exact_norm_ctx, exact_norm_p2, exact_norm_with, operator_norm, Geometry,
    MatrixGeometry, NormMethod, NormReport, WeightedSequenceGeometry, DEFAULT_RESTARTS, DEFAULT_TOL,
};
pub use operator::{OperatorHandle, MAX_EXPLICIT_SIDE};
pub use sweep::{
    basis_constant_sweep, unconditionality_constant, BasisConstantRow, SignMode, SignSweepReport, SweepSettings,
};

fn check_index(n: usize, level: FactorSpace) -> Result<()> {
    WalshIndex(n).check_level(level)
}

/// `P_n x = Σ_{i ≤ n} c_i w_i` in the `Paper` generator system.
pub fn partial_sum<T: Real>(x: &Matrix<T>, n: usize) -> Result<Matrix<T>> {
    partial_sum_in(x, n, T::lit(0.5), GeneratorMode::Paper)
}

/// `P_n` for the system generated in `mode` (`alpha` only matters for `meanzero`).
pub fn partial_sum_in<T: Real>(x: &Matrix<T>, n: usize, alpha: T, mode: GeneratorMode) -> Result<Matrix<T>> {
    let level = FactorSpace::from_dim(x.dim())?;
    check_index(n, level)?;
    let mut c = coefficients_in(x, alpha, mode)?;
    c[n + 1..].iter_mut().for_each(|v| *v = Complex::zero());
    synthesize_in(&c, level, alpha, mode)
}

fn check_subset(set: &[i64], m: usize) -> Result<()> {
    let max = 2 * m as i64 - 1;
    match set.iter().find(|&&s| !(-1..=max).contains(&s)) {
        Some(&s) => Err(Error::StepOutOfRange { step: s, min: -1, max }),
        None => Ok(()),
    }
}

/// `Σ_{s∈S, s≥0} D_s x`, plus `ρ(x)·I` when `-1 ∈ S`. Repeated members count once.
pub fn subset_projection<T: Real>(x: &Matrix<T>, set: &[i64], spec: &StateSpec<T>) -> Result<Matrix<T>> {
    spec.check_dim(x)?;
    check_subset(set, spec.m())?;
    let mut members = set.to_vec();
    members.sort_unstable();
    members.dedup();
    let mut out = Matrix::zeros(x.dim());
    for s in members {
        let term = if s < 0 {
            cond_expect(x, -1, spec)?
        } else {
            mart_diff(x, s, spec)?
        };
        out.axpy(Complex::new(T::one(), T::zero()), &term);
    }
    Ok(out)
}

/// `{-1} ∪ {s : γ_s(n) = 1}`.
pub fn digit_set(n: usize) -> Vec<i64> {
    std::iter::once(-1)
        .chain(WalshIndex(n).set_bits().map(|s| s as i64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct IdentityResidual<T> {
    pub residual: Matrix<T>,
    /// One entry per requested context, in order.
    pub norms: Vec<T>,
}

/// Residual of `w_n P_n(x) = (E_{-1} + Σ_{γ_i(n)=1} D_i)(w_n x)`; the right
/// side multiplies by `w_n` on the right throughout.
pub fn identity_residual<T: Real>(
    x: &Matrix<T>,
    n: usize,
    spec: &StateSpec<T>,
    side: Side,
    mode: GeneratorMode,
    contexts: &[LpContext<T>],
) -> Result<IdentityResidual<T>> {
    spec.check_dim(x)?;
    check_index(n, spec.level())?;
    let alpha = spec.alpha();
    let w = walsh_matrix(n, spec.level(), alpha, mode)?;
    let truncated = partial_sum_in(x, n, alpha, mode)?;
    let (lhs, shifted) = match side {
        Side::Left => (w.matmul(&truncated), w.matmul(x)),
        Side::Right => (truncated.matmul(&w), x.matmul(&w)),
    };
    let rhs = subset_projection(&shifted, &digit_set(n), spec)?;
    let residual = &lhs - &rhs;
    let norms = contexts
        .iter()
        .map(|ctx| lp_norm(&residual, ctx))
        .collect::<Result<_>>()?;
    Ok(IdentityResidual { residual, norms })
}

/// `E_s` as a handle.
pub fn cond_expect_handle<T: Real>(spec: &StateSpec<T>, s: i64) -> Result<OperatorHandle<T>> {
    check_subset(&[s], spec.m())?;
    let spec = *spec;
    Ok(OperatorHandle::from_fn(spec.dim(), move |x| {
        cond_expect(x, s, &spec).expect("validated step")
    }))
}

/// `D_s` as a handle.
pub fn mart_diff_handle<T: Real>(spec: &StateSpec<T>, s: i64) -> Result<OperatorHandle<T>> {
    if s < 0 {
        return Err(Error::StepOutOfRange {
            step: s,
            min: 0,
            max: 2 * spec.m() as i64 - 1,
        });
    }
    check_subset(&[s], spec.m())?;
    let spec = *spec;
    Ok(OperatorHandle::from_fn(spec.dim(), move |x| {
        mart_diff(x, s, &spec).expect("validated step")
    }))
}

/// `P_n` as a handle in the `Paper` generator system.
pub fn partial_sum_handle<T: Real>(level: FactorSpace, n: usize) -> Result<OperatorHandle<T>> {
    partial_sum_handle_in(level, n, T::lit(0.5), GeneratorMode::Paper)
}

pub fn partial_sum_handle_in<T: Real>(
    level: FactorSpace,
    n: usize,
    alpha: T,
    mode: GeneratorMode,
) -> Result<OperatorHandle<T>> {
    check_index(n, level)?;
    crate::walsh::check_alpha(alpha)?;
    Ok(OperatorHandle::from_fn(level.dim(), move |x| {
        partial_sum_in(x, n, alpha, mode).expect("validated index")
    }))
}

/// `x ↦ subset_projection(x, S)` as a handle.
pub fn subset_handle<T: Real>(spec: &StateSpec<T>, set: &[i64]) -> Result<OperatorHandle<T>> {
    check_subset(set, spec.m())?;
    let spec = *spec;
    let set = set.to_vec();
    Ok(OperatorHandle::from_fn(spec.dim(), move |x| {
        subset_projection(x, &set, &spec).expect("validated subset")
    }))
}

/// `E_{-1} + Σ_{γ_s(n)=1} D_s`, the block sum bounding `‖P_n‖`.
pub fn decomposition_handle<T: Real>(spec: &StateSpec<T>, n: usize) -> Result<OperatorHandle<T>> {
    check_index(n, spec.level())?;
    subset_handle(spec, &digit_set(n))
}

/// `ρ(x)·I` as a handle.
pub fn state_handle<T: Real>(spec: &StateSpec<T>) -> OperatorHandle<T> {
    let spec = *spec;
    OperatorHandle::from_fn(spec.dim(), move |x| {
        Matrix::identity(spec.dim()).scale(rho_value(x, &spec).expect("matching dimension"))
    })
}
