//! Operator norms of explicit maps on weighted L^p geometries.
//!
//! `exact2` evaluates the p = 2 norm as the top singular value after
//! whitening by the Gram weights. `estimate` runs a multi-start normalized
//! gradient ascent of `‖T x‖ / ‖x‖`; every value it reports is attained by an
//! explicit `x` and is therefore a lower bound.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, schatten_from_singular, Matrix};
use crate::rng::{gaussian_vector, task_rng};
use crate::scalar::Real;
use crate::state::{LpContext, StateSpec, Side};

use super::operator::{apply_adjoint_vec, apply_vec, OperatorHandle};

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_TOL: f64 = 1e-6;
const BACKTRACK: f64 = 0.5;
const MAX_ITERS: usize = 5000;
const STALL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormMethod {
    Exact2,
    Estimate,
}

impl NormMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMethod::Exact2 => "exact2",
            NormMethod::Estimate => "estimate",
        }
    }
}

impl std::str::FromStr for NormMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact2" => Ok(Self::Exact2),
            "estimate" => Ok(Self::Estimate),
            other => Err(Error::InvalidArgument(format!("unknown norm method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport<T> {
    pub value: T,
    pub method: NormMethod,
    pub restarts: usize,
    pub converged: bool,
    pub seed: u64,
}

/// A norm on `C^N` with a (sub)gradient.
pub trait Geometry<T: Real>: Sync {
    fn len(&self) -> usize;

    fn norm(&self, v: &[Complex<T>]) -> T;

    /// Gradient of the norm under the real pairing `Re <g, dv>`.
    fn gradient(&self, v: &[Complex<T>]) -> Vec<Complex<T>>;

    /// Weights `w` with `‖v‖² = Σ w_k |v_k|²`, when the norm is of that form.
    fn gram_weights(&self) -> Option<Vec<T>>;
}

/// Weighted Schatten geometry on row-major vectorized `d × d` matrices.
#[derive(Debug, Clone)]
pub struct MatrixGeometry<T> {
    ctx: LpContext<T>,
}

impl<T: Real> MatrixGeometry<T> {
    pub fn new(ctx: LpContext<T>) -> Self {
        Self { ctx }
    }

    pub fn context(&self) -> &LpContext<T> {
        &self.ctx
    }

    fn as_matrix(&self, v: &[Complex<T>]) -> Matrix<T> {
        Matrix::from_vec(self.ctx.dim(), v.to_vec()).expect("vector length matches geometry")
    }
}

impl<T: Real> Geometry<T> for MatrixGeometry<T> {
    fn len(&self) -> usize {
        self.ctx.dim() * self.ctx.dim()
    }

    fn norm(&self, v: &[Complex<T>]) -> T {
        let y = self.ctx.weighted(&self.as_matrix(v));
        schatten_from_singular(&crate::linalg::singular_values(&y), self.ctx.p())
    }

    fn gradient(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let y = self.ctx.weighted(&self.as_matrix(v));
        let p = self.ctx.p();
        let eig = jacobi_eigh(&y.dagger().matmul(&y));
        let sigma: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
        let top = sigma.iter().copied().fold(T::zero(), T::max);
        if top == T::zero() {
            return vec![Complex::zero(); self.len()];
        }
        let cutoff = top * T::lit(1e-12);
        let total = schatten_from_singular(&sigma, p);
        // G = Σ_{σ_k > 0} σ_k^{p-1} u_k v_k† / ‖Y‖^{p-1} = Y V diag(w) V†.
        let weights: Vec<T> = if p.is_infinite() {
            let k = sigma.len() - 1;
            (0..sigma.len()).map(|i| if i == k { T::one() / sigma[k] } else { T::zero() }).collect()
        } else {
            sigma
                .iter()
                .map(|&s| {
                    if s <= cutoff {
                        T::zero()
                    } else {
                        (s / total).powf(p - T::one()) / s
                    }
                })
                .collect()
        };
        let n = y.dim();
        let vmat = &eig.vectors;
        let proj = Matrix::from_fn(n, |r, c| {
            (0..n)
                .map(|k| vmat.get(r, k) * weights[k] * vmat.get(c, k).conj())
                .sum()
        });
        let g = self.ctx.weighted_adjoint(&y.matmul(&proj));
        g.into_data()
    }

    fn gram_weights(&self) -> Option<Vec<T>> {
        if self.ctx.p() != T::lit(2.0) {
            return None;
        }
        let d = self.ctx.dim();
        let a = self.ctx.density();
        Some(
            (0..d * d)
                .map(|k| match self.ctx.side() {
                    Side::Left => a[k % d],
                    Side::Right => a[k / d],
                })
                .collect(),
        )
    }
}

/// Weighted `ℓ^p` on `C^N`: `(Σ μ_k |v_k|^p)^{1/p}`, the maximum for `p = ∞`.
#[derive(Debug, Clone)]
pub struct WeightedSequenceGeometry<T> {
    p: T,
    weights: Vec<T>,
}

impl<T: Real> WeightedSequenceGeometry<T> {
    pub fn new(p: T, weights: Vec<T>) -> Result<Self> {
        if p.is_nan() || p < T::one() {
            return Err(Error::InvalidExponent(p.to_f64_lossy()));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        Ok(Self { p, weights })
    }
}

impl<T: Real> Geometry<T> for WeightedSequenceGeometry<T> {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn norm(&self, v: &[Complex<T>]) -> T {
        weighted_lp(v, &self.weights, self.p)
    }

    fn gradient(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let total = self.norm(v);
        if total == T::zero() {
            return vec![Complex::zero(); v.len()];
        }
        if self.p.is_infinite() {
            let (k, _) = v
                .iter()
                .enumerate()
                .fold((0, T::zero()), |(bk, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bk, bv) });
            let mut g = vec![Complex::zero(); v.len()];
            g[k] = v[k] / v[k].norm();
            return g;
        }
        let p = self.p;
        v.iter()
            .zip(&self.weights)
            .map(|(&z, &w)| {
                let a = z.norm();
                if a == T::zero() {
                    Complex::zero()
                } else {
                    z * (w * (a / total).powf(p - T::one()) / a)
                }
            })
            .collect()
    }

    fn gram_weights(&self) -> Option<Vec<T>> {
        (self.p == T::lit(2.0)).then(|| self.weights.clone())
    }
}

pub(crate) fn weighted_lp<T: Real>(v: &[Complex<T>], weights: &[T], p: T) -> T {
    if p.is_infinite() {
        return v.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    }
    let top = v.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if top == T::zero() {
        return T::zero();
    }
    let s: T = v.iter().zip(weights).map(|(z, &w)| w * (z.norm() / top).powf(p)).sum();
    top * s.powf(T::one() / p)
}

/// Exact p = 2 norm of an explicit map under a Gram-weighted geometry.
pub fn exact_norm_with<T: Real>(op: &Matrix<T>, geometry: &impl Geometry<T>) -> Result<NormReport<T>> {
    let w = geometry
        .gram_weights()
        .ok_or_else(|| Error::InvalidArgument("exact evaluation needs the p = 2 geometry".into()))?;
    if w.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: op.dim(),
        });
    }
    if w.iter().any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidArgument("density must be positive definite".into()));
    }
    let root: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
    let n = op.dim();
    let whitened = Matrix::from_fn(n, |r, c| op.get(r, c) * (root[r] / root[c]));
    let gram = whitened.dagger().matmul(&whitened);
    let top = jacobi_eigh(&gram).values.last().copied().unwrap_or(T::zero());
    Ok(NormReport {
        value: top.max(T::zero()).sqrt(),
        method: NormMethod::Exact2,
        restarts: 0,
        converged: true,
        seed: 0,
    })
}

/// Exact p = 2 operator norm in the GNS geometry of `spec` on the given side.
pub fn exact_norm_p2<T: Real>(op: &OperatorHandle<T>, spec: &StateSpec<T>, side: Side) -> Result<NormReport<T>> {
    let ctx = LpContext::new(T::lit(2.0), spec, side)?;
    exact_norm_ctx(op, &ctx)
}

/// Exact p = 2 norm for an arbitrary density carried by `ctx` (whose `p` must be 2).
pub fn exact_norm_ctx<T: Real>(op: &OperatorHandle<T>, ctx: &LpContext<T>) -> Result<NormReport<T>> {
    if op.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            found: op.dim(),
        });
    }
    exact_norm_with(&op.explicit_matrix()?, &MatrixGeometry::new(ctx.clone()))
}

#[derive(Debug, Clone, Copy)]
struct Ascent<T> {
    value: T,
    converged: bool,
}

fn ascend<T: Real>(op: &Matrix<T>, geometry: &impl Geometry<T>, start: Vec<Complex<T>>, tol: T) -> Ascent<T> {
    let normalize = |v: Vec<Complex<T>>| -> Option<Vec<Complex<T>>> {
        let n = geometry.norm(&v);
        (n > T::zero() && n.is_finite()).then(|| v.into_iter().map(|z| z / n).collect())
    };
    let ratio = |v: &[Complex<T>]| geometry.norm(&apply_vec(op, v));
    let euclid = |v: &[Complex<T>]| v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();

    let Some(mut x) = normalize(start) else {
        return Ascent { value: T::zero(), converged: false };
    };
    let mut value = ratio(&x);
    let mut step = T::one();
    let mut stalled = 0usize;
    let half = T::lit(BACKTRACK);
    let dot = |a: &[Complex<T>], b: &[Complex<T>]| a.iter().zip(b).map(|(u, v)| (u.conj() * v).re).sum::<T>();
    let mut previous: Option<(Vec<Complex<T>>, Vec<Complex<T>>)> = None;

    for _ in 0..MAX_ITERS {
        let image = apply_vec(op, &x);
        let outer = apply_adjoint_vec(op, &geometry.gradient(&image));
        let inner = geometry.gradient(&x);
        let grad: Vec<Complex<T>> = outer.iter().zip(&inner).map(|(a, b)| *a - *b * value).collect();
        let gnorm = euclid(&grad);
        if !(gnorm > T::epsilon() * T::lit(1e-2)) {
            return Ascent { value, converged: true };
        }
        // Polak-Ribière direction, reset whenever it stops pointing uphill.
        let mut dir = grad.clone();
        if let Some((g0, d0)) = &previous {
            let beta = (dot(&grad, &grad) - dot(&grad, g0)) / dot(g0, g0);
            if beta > T::zero() {
                dir = grad.iter().zip(d0).map(|(g, d)| *g + *d * beta).collect();
                if !(dot(&dir, &grad) > T::zero()) {
                    dir = grad.clone();
                }
            }
        }
        let scale = euclid(&x) / euclid(&dir);
        let mut improved = None;
        let mut trial_step = step;
        for _ in 0..60 {
            let cand: Vec<Complex<T>> = x
                .iter()
                .zip(&dir)
                .map(|(a, g)| *a + *g * (trial_step * scale))
                .collect();
            if let Some(cand) = normalize(cand) {
                let v = ratio(&cand);
                if v > value {
                    improved = Some((cand, v));
                    break;
                }
            }
            trial_step = trial_step * half;
        }
        let Some((cand, v)) = improved else {
            return Ascent { value, converged: true };
        };
        let rel = (v - value) / value.max(T::min_positive_value());
        previous = Some((grad, dir));
        x = cand;
        value = v;
        step = (trial_step / half).min(T::lit(4.0));
        if rel < tol {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                return Ascent { value, converged: true };
            }
        } else {
            stalled = 0;
        }
    }
    Ascent { value, converged: false }
}

/// Local ascent of `‖T x‖ / ‖x‖` on `L^p` of `ctx` started at `start`; never
/// below the starting ratio.
pub(crate) fn refine_ratio<T: Real>(op: &Matrix<T>, ctx: &LpContext<T>, start: &Matrix<T>, tol: T) -> T {
    ascend(op, &MatrixGeometry::new(ctx.clone()), start.data().to_vec(), tol).value
}

/// Multi-start ascent on an explicit map; restarts run in parallel with
/// streams `(seed, restart)`.
pub fn estimate_norm_with<T: Real>(
    op: &Matrix<T>,
    geometry: &impl Geometry<T>,
    restarts: usize,
    seed: u64,
    tol: T,
) -> Result<NormReport<T>> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if op.dim() != geometry.len() {
        return Err(Error::DimensionMismatch {
            expected: geometry.len(),
            found: op.dim(),
        });
    }
    let runs: Vec<Ascent<T>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            ascend(op, geometry, gaussian_vector(&mut rng, geometry.len()), tol)
        })
        .collect();
    let best = runs
        .iter()
        .fold(None::<Ascent<T>>, |acc, r| match acc {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(*r),
        })
        .expect("at least one restart");
    Ok(NormReport {
        value: best.value,
        method: NormMethod::Estimate,
        restarts,
        converged: best.converged,
        seed,
    })
}

/// Estimated `‖T‖` on `L^p` of `ctx`.
pub fn estimate_norm_lp<T: Real>(
    op: &OperatorHandle<T>,
    ctx: &LpContext<T>,
    restarts: usize,
    seed: u64,
    tol: T,
) -> Result<NormReport<T>> {
    if op.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            found: op.dim(),
        });
    }
    estimate_norm_with(&op.explicit_matrix()?, &MatrixGeometry::new(ctx.clone()), restarts, seed, tol)
}

/// Dispatches on `method`; `exact2` requires `p = 2`.
pub fn operator_norm<T: Real>(
    op: &OperatorHandle<T>,
    ctx: &LpContext<T>,
    method: NormMethod,
    restarts: usize,
    seed: u64,
    tol: T,
) -> Result<NormReport<T>> {
    match method {
        NormMethod::Exact2 => {
            if ctx.p() != T::lit(2.0) {
                return Err(Error::InvalidArgument("exact2 is only available at p = 2".into()));
            }
            exact_norm_ctx(op, ctx)
        }
        NormMethod::Estimate => estimate_norm_lp(op, ctx, restarts, seed, tol),
    }
}
