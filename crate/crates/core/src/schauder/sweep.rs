//! Basis-constant and sign-change sweeps.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, gaussian_matrix, task_rng};
use crate::scalar::Real;
use crate::state::{lp_norm, martingale_components, LpContext, Side, StateSpec};
use crate::walsh::{walsh_matrix, GeneratorMode};

use super::norms::{operator_norm, refine_ratio, NormMethod, NormReport};
use super::operator::{OperatorHandle, MAX_EXPLICIT_SIDE};
use super::{decomposition_handle, partial_sum_handle};

/// Largest level accepted by the exhaustive sign sweep (`2m ≤ 12`).
pub const MAX_EXHAUSTIVE_LEVEL: usize = 6;
/// Random sign patterns drawn per probe in sampled mode, besides the all-plus one.
pub const SAMPLED_PATTERNS: usize = 8;
/// Best probes refined by local ascent per pattern (sampled mode: overall).
pub const REFINE_STARTS: usize = 4;
const REFINE_TOL: f64 = 1e-10;

const SIGN_TAG: u64 = 0x5349_474e;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings<T> {
    pub method: NormMethod,
    pub restarts: usize,
    pub seed: u64,
    pub tol: T,
}

impl<T: Real> SweepSettings<T> {
    pub fn exact() -> Self {
        Self {
            method: NormMethod::Exact2,
            restarts: 0,
            seed: 0,
            tol: T::lit(super::DEFAULT_TOL),
        }
    }

    pub fn estimate(restarts: usize, seed: u64) -> Self {
        Self {
            method: NormMethod::Estimate,
            restarts,
            seed,
            tol: T::lit(super::DEFAULT_TOL),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConstantRow<T> {
    pub n: usize,
    pub p: T,
    pub alpha: T,
    pub side: Side,
    /// `‖P_n‖`.
    pub norm: NormReport<T>,
    /// `‖E_{-1} + Σ_{γ_s(n)=1} D_s‖`.
    pub bound: NormReport<T>,
    /// `bound - norm`.
    pub gap: T,
}

/// `‖P_n‖` and its block-sum bound for `n = 0..=n_max`, rows in order of `n`.
/// Estimates for row `n` use the streams of `derive_seed(seed, 2n)` and
/// `derive_seed(seed, 2n + 1)`.
pub fn basis_constant_sweep<T: Real>(
    spec: &StateSpec<T>,
    ctx: &LpContext<T>,
    n_max: usize,
    settings: &SweepSettings<T>,
) -> Result<Vec<BasisConstantRow<T>>> {
    if n_max >= spec.level().walsh_len() {
        return Err(Error::IndexOutOfLevel {
            index: n_max,
            level: spec.m(),
            limit: spec.level().walsh_len(),
        });
    }
    if ctx.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: ctx.dim(),
        });
    }
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let norm_of = |op, tag: u64| {
                operator_norm(
                    &op,
                    ctx,
                    settings.method,
                    settings.restarts,
                    derive_seed(settings.seed, tag),
                    settings.tol,
                )
            };
            let norm = norm_of(partial_sum_handle(spec.level(), n)?, 2 * n as u64)?;
            let bound = norm_of(decomposition_handle(spec, n)?, 2 * n as u64 + 1)?;
            Ok(BasisConstantRow {
                n,
                p: ctx.p(),
                alpha: spec.alpha(),
                side: ctx.side(),
                norm: NormReport { seed: settings.seed, ..norm },
                bound: NormReport { seed: settings.seed, ..bound },
                gap: bound.value - norm.value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Exhaustive,
    Sampled,
}

impl std::str::FromStr for SignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "sampled" => Ok(Self::Sampled),
            other => Err(Error::InvalidArgument(format!("unknown sign mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignSweepReport<T> {
    pub p: T,
    pub alpha: T,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_ratio: T,
    /// Exhaustive mode only: the maximum for each pattern, where bit `s` of
    /// the pattern index set means `D_s` enters with a minus sign.
    pub per_pattern: Option<Vec<T>>,
}

/// Probe `k` of the sweep: every `w_n`, then every matrix unit, then
/// `trials` Gaussian matrices drawn from stream `(seed, k)`.
fn probe<T: Real>(k: usize, spec: &StateSpec<T>, seed: u64) -> Matrix<T> {
    let d = spec.dim();
    let walsh = spec.level().walsh_len();
    if k < walsh {
        walsh_matrix(k, spec.level(), spec.alpha(), GeneratorMode::Paper).expect("index in level")
    } else if k < walsh + d * d {
        let u = k - walsh;
        Matrix::unit(d, u / d, u % d)
    } else {
        gaussian_matrix(&mut task_rng(seed, k as u64), d)
    }
}

/// Explicit superoperator of `x ↦ ρ(x)I + Σ_s ε_s D_s x`.
fn signed_operator<T: Real>(spec: &StateSpec<T>, bits: u64) -> Result<Matrix<T>> {
    let spec = *spec;
    OperatorHandle::from_fn(spec.dim(), move |x| {
        signed_sum(&martingale_components(x, &spec).expect("dimension checked"), bits)
    })
    .explicit_matrix()
}

/// `ρ(x)I + Σ_s ε_s D_s x` for the sign pattern `bits` (bit set = minus).
fn signed_sum<T: Real>(components: &[Matrix<T>], bits: u64) -> Matrix<T> {
    let mut y = components[0].clone();
    for (s, d) in components[1..].iter().enumerate() {
        let sign = if bits >> s & 1 == 1 { -T::one() } else { T::one() };
        y.axpy(Complex::new(sign, T::zero()), d);
    }
    y
}

/// Empirical unconditionality constant of the martingale decomposition.
///
/// Every probe is tried against every pattern (exhaustive) or against the
/// all-plus pattern and [`SAMPLED_PATTERNS`] random ones (sampled). When the
/// superoperator fits in memory, the [`REFINE_STARTS`] best probes are then
/// pushed uphill by local norm ascent, so each reported ratio is still
/// attained by an explicit input.
pub fn unconditionality_constant<T: Real>(
    spec: &StateSpec<T>,
    ctx: &LpContext<T>,
    mode: SignMode,
    trials: usize,
    seed: u64,
) -> Result<SignSweepReport<T>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if ctx.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: ctx.dim(),
        });
    }
    let m = spec.m();
    if mode == SignMode::Exhaustive && m > MAX_EXHAUSTIVE_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "exhaustive sign sweeps need m <= {MAX_EXHAUSTIVE_LEVEL}, got {m}"
        )));
    }
    let steps = 2 * m;
    let probes = spec.level().walsh_len() + spec.dim() * spec.dim() + trials;
    let pattern_seed = derive_seed(seed, SIGN_TAG);

    let per_probe: Vec<Vec<(T, u64)>> = (0..probes)
        .into_par_iter()
        .map(|k| -> Result<Vec<(T, u64)>> {
            let x = probe(k, spec, seed);
            let denom = lp_norm(&x, ctx)?;
            let components = martingale_components(&x, spec)?;
            let ratio = |bits: u64| lp_norm(&signed_sum(&components, bits), ctx).map(|v| (v / denom, bits));
            match mode {
                SignMode::Exhaustive => (0..1u64 << steps).map(ratio).collect(),
                SignMode::Sampled => {
                    let mut rng = task_rng(pattern_seed, k as u64);
                    let mut best = ratio(0)?;
                    for _ in 0..SAMPLED_PATTERNS {
                        let cand = ratio(rng.random::<u64>() & ((1u64 << steps) - 1))?;
                        if cand.0 > best.0 {
                            best = cand;
                        }
                    }
                    Ok(vec![best])
                }
            }
        })
        .collect::<Result<_>>()?;

    let refine = spec.dim() * spec.dim() <= MAX_EXPLICIT_SIDE;
    let tol = T::lit(REFINE_TOL);
    // Top probes for column `j` as (probe, pattern), best first; ties keep probe order.
    let leaders = |j: usize| {
        let mut order: Vec<usize> = (0..probes).collect();
        order.sort_by(|&a, &b| per_probe[b][j].0.partial_cmp(&per_probe[a][j].0).unwrap_or(std::cmp::Ordering::Equal));
        order.truncate(REFINE_STARTS);
        order.into_iter().map(|k| (k, per_probe[k][j].1)).collect::<Vec<_>>()
    };
    let maxima: Vec<T> = match mode {
        SignMode::Exhaustive => (0..1usize << steps)
            .into_par_iter()
            .map(|j| -> Result<T> {
                let best = per_probe.iter().map(|r| r[j].0).fold(T::zero(), T::max);
                if !refine {
                    return Ok(best);
                }
                let op = signed_operator(spec, j as u64)?;
                Ok(leaders(j)
                    .into_iter()
                    .map(|(k, _)| refine_ratio(&op, ctx, &probe(k, spec, seed), tol))
                    .fold(best, T::max))
            })
            .collect::<Result<_>>()?,
        SignMode::Sampled => {
            let best = per_probe.iter().map(|r| r[0].0).fold(T::zero(), T::max);
            let refined = if refine {
                leaders(0)
                    .into_par_iter()
                    .map(|(k, bits)| Ok(refine_ratio(&signed_operator(spec, bits)?, ctx, &probe(k, spec, seed), tol)))
                    .collect::<Result<Vec<T>>>()?
            } else {
                Vec::new()
            };
            vec![refined.into_iter().fold(best, T::max)]
        }
    };
    let max_ratio = maxima.iter().copied().fold(T::zero(), T::max);
    Ok(SignSweepReport {
        p: ctx.p(),
        alpha: spec.alpha(),
        m,
        trials,
        seed,
        max_ratio,
        per_pattern: (mode == SignMode::Exhaustive).then_some(maxima),
    })
}
