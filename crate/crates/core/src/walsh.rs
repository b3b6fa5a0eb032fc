//! Walsh and Rademacher matrices and the fast Walsh coefficient transform.
//!
//! A Walsh index `n = Σ γ_i 2^i` is read two digits at a time: factor `i`
//! carries the code `q_i = γ_{2i} + 2 γ_{2i+1}`, selecting one of the four
//! generators `I`, `diag(1,-1)`, `[[0,1],[1,0]]`, `[[0,1],[-1,0]]`.

use std::ops::Range;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{kron_all, FactorSpace, Matrix};
use crate::scalar::{re, Real};

/// Non-negative Walsh index with binary and per-factor digit access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WalshIndex(pub usize);

impl WalshIndex {
    /// Binary digit `γ_i`.
    #[inline]
    pub fn bit(self, i: usize) -> bool {
        i < usize::BITS as usize && (self.0 >> i) & 1 == 1
    }

    /// Generator code of tensor factor `i`.
    #[inline]
    pub fn code(self, factor: usize) -> usize {
        if 2 * factor >= usize::BITS as usize {
            0
        } else {
            (self.0 >> (2 * factor)) & 3
        }
    }

    pub fn digits(self) -> Vec<u8> {
        binary_digits(self.0)
    }

    /// Positions `s` with `γ_s = 1`.
    pub fn set_bits(self) -> impl Iterator<Item = usize> {
        let n = self.0;
        (0..usize::BITS as usize).filter(move |&i| (n >> i) & 1 == 1)
    }

    pub fn check_level(self, level: FactorSpace) -> Result<()> {
        if self.0 < level.walsh_len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfLevel {
                index: self.0,
                level: level.m(),
                limit: level.walsh_len(),
            })
        }
    }
}

impl From<usize> for WalshIndex {
    fn from(n: usize) -> Self {
        Self(n)
    }
}

/// Choice of the diagonal generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorMode {
    /// The four generators verbatim.
    #[default]
    Paper,
    /// `diag(1,-1)` replaced by the state-centred `diag(√((1-α)/α), -√(α/(1-α)))`.
    MeanZero,
}

impl std::str::FromStr for GeneratorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "meanzero" => Ok(Self::MeanZero),
            other => Err(Error::InvalidArgument(format!("unknown generator mode `{other}`"))),
        }
    }
}

/// Little-endian binary digits without trailing zeros.
pub fn binary_digits(n: usize) -> Vec<u8> {
    let mut out = Vec::new();
    let mut rest = n;
    while rest != 0 {
        out.push((rest & 1) as u8);
        rest >>= 1;
    }
    out
}

/// Half-open index range `[2^s, 2^{s+1})` of the `s`-th Walsh block.
pub fn block_support(s: usize) -> Range<usize> {
    (1 << s)..(1 << (s + 1))
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha <= T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha.to_f64_lossy()))
    }
}

/// Integer generator entries, indexed by code.
const GENERATORS: [[[i8; 2]; 2]; 4] = [
    [[1, 0], [0, 1]],
    [[1, 0], [0, -1]],
    [[0, 1], [1, 0]],
    [[0, 1], [-1, 0]],
];

const fn mul2(a: [[i8; 2]; 2], b: [[i8; 2]; 2]) -> [[i8; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

const fn build_sign_table() -> [[i8; 4]; 4] {
    let mut table = [[0i8; 4]; 4];
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let prod = mul2(GENERATORS[a], GENERATORS[b]);
            let target = GENERATORS[a ^ b];
            let mut sign = 0i8;
            let mut candidate = 1i8;
            while candidate >= -1 {
                let mut ok = true;
                let mut r = 0;
                while r < 2 {
                    let mut c = 0;
                    while c < 2 {
                        if prod[r][c] != candidate * target[r][c] {
                            ok = false;
                        }
                        c += 1;
                    }
                    r += 1;
                }
                if ok {
                    sign = candidate;
                }
                candidate -= 2;
            }
            assert!(sign != 0, "generator product left the signed generator set");
            table[a][b] = sign;
            b += 1;
        }
        a += 1;
    }
    table
}

/// `r_a r_b = SIGN_TABLE[a][b] · r_{a xor b}`, obtained by multiplying the generators.
pub const SIGN_TABLE: [[i8; 4]; 4] = build_sign_table();

/// One 2x2 generator.
pub fn rademacher_block<T: Real>(g0: u8, g1: u8, alpha: T, mode: GeneratorMode) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    if g0 > 1 || g1 > 1 {
        return Err(Error::InvalidArgument(format!("generator digits ({g0},{g1}) must be 0 or 1")));
    }
    Ok(generator(usize::from(g0) + 2 * usize::from(g1), alpha, mode))
}

fn generator<T: Real>(code: usize, alpha: T, mode: GeneratorMode) -> Matrix<T> {
    if code == 1 && mode == GeneratorMode::MeanZero {
        let (up, down) = meanzero_entries(alpha);
        return Matrix::from_diag(&[up, -down]);
    }
    let g = GENERATORS[code];
    Matrix::from_fn(2, |r, c| re(T::lit(f64::from(g[r][c]))))
}

/// Diagonal of the centred generator: `(√((1-α)/α), √(α/(1-α)))`.
fn meanzero_entries<T: Real>(alpha: T) -> (T, T) {
    let one_minus = T::one() - alpha;
    ((one_minus / alpha).sqrt(), (alpha / one_minus).sqrt())
}

/// Walsh matrix `⊗_i r^{(γ_{2i}, γ_{2i+1})}` at level `m`.
pub fn walsh_matrix<T: Real>(n: usize, level: FactorSpace, alpha: T, mode: GeneratorMode) -> Result<Matrix<T>> {
    WalshIndex(n).check_level(level)?;
    check_alpha(alpha)?;
    let idx = WalshIndex(n);
    if mode == GeneratorMode::Paper {
        return Ok(paper_walsh(n, level));
    }
    let factors: Vec<Matrix<T>> = (0..level.m()).map(|f| generator(idx.code(f), alpha, mode)).collect();
    kron_all(&factors)
}

/// `Paper`-mode Walsh matrix built directly as a signed permutation.
pub(crate) fn paper_walsh<T: Real>(n: usize, level: FactorSpace) -> Matrix<T> {
    let m = level.m();
    let dim = level.dim();
    let mut out = Matrix::zeros(dim);
    let idx = WalshIndex(n);
    for r in 0..dim {
        let mut c = 0usize;
        let mut sign = 1i8;
        for f in 0..m {
            let rb = (r >> (m - 1 - f)) & 1;
            let g = GENERATORS[idx.code(f)];
            let cb = if g[rb][0] != 0 { 0 } else { 1 };
            sign *= g[rb][cb];
            c |= cb << (m - 1 - f);
        }
        out.set(r, c, re(T::lit(f64::from(sign))));
    }
    out
}

/// Rademacher matrix `r_s = w_{2^s}`.
pub fn rademacher_matrix<T: Real>(s: usize, level: FactorSpace) -> Result<Matrix<T>> {
    if s >= 2 * level.m() {
        return Err(Error::IndexOutOfLevel {
            index: s,
            level: level.m(),
            limit: 2 * level.m(),
        });
    }
    Ok(paper_walsh(1 << s, level))
}

/// `w_n w_i = sign · w_{n xor i}` with the sign taken factor by factor from [`SIGN_TABLE`].
pub fn walsh_product_index(n: usize, i: usize) -> (usize, i8) {
    let mut sign = 1i8;
    let (mut a, mut b) = (n, i);
    while a != 0 || b != 0 {
        sign *= SIGN_TABLE[a & 3][b & 3];
        a >>= 2;
        b >>= 2;
    }
    (n ^ i, sign)
}

/// Sign in `r_k w_n = ε w_{n - 2^k}` for `2^k ≤ n < 2^{k+1}`: negative exactly
/// when `k` is odd and `n ≥ 2^k + 2^{k-1}`.
pub fn rademacher_sign_rule(k: usize, n: usize) -> i8 {
    if k % 2 == 1 && n >= (1 << k) + (1 << (k - 1)) && n < (1 << (k + 1)) {
        -1
    } else {
        1
    }
}

fn level_of_dim(dim: usize) -> Result<usize> {
    if !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Maps (row, column) of a `2^m` matrix to the interleaved slot buffer where
/// base-4 digit `f` holds `2·row_bit_f + col_bit_f`.
fn slot_tables(m: usize) -> (Vec<usize>, Vec<usize>) {
    let dim = 1usize << m;
    let spread = |v: usize, offset: usize| {
        (0..m).fold(0usize, |acc, f| acc | (((v >> (m - 1 - f)) & 1) << (2 * f + offset)))
    };
    (
        (0..dim).map(|r| spread(r, 1)).collect(),
        (0..dim).map(|c| spread(c, 0)).collect(),
    )
}

/// Applies `kernel` to every 4-tuple along base-4 digit `f`.
fn for_each_quad<T: Real>(buf: &mut [Complex<T>], m: usize, mut kernel: impl FnMut(&mut [Complex<T>; 4])) {
    let len = buf.len();
    for f in 0..m {
        let stride = 1usize << (2 * f);
        let block = stride * 4;
        for base in (0..len).step_by(block) {
            for off in 0..stride {
                let i = base + off;
                let mut q = [buf[i], buf[i + stride], buf[i + 2 * stride], buf[i + 3 * stride]];
                kernel(&mut q);
                buf[i] = q[0];
                buf[i + stride] = q[1];
                buf[i + 2 * stride] = q[2];
                buf[i + 3 * stride] = q[3];
            }
        }
    }
}

/// Walsh coefficients `c_n = 2^{-m} Tr(w_n† x)` by `m` per-factor 4x4 basis
/// changes, `O(m 4^m)`.
pub fn walsh_coefficients<T: Real>(x: &Matrix<T>) -> Result<Vec<Complex<T>>> {
    let m = level_of_dim(x.dim())?;
    let (rows, cols) = slot_tables(m);
    let dim = x.dim();
    let mut buf = vec![Complex::zero(); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            buf[rows[r] | cols[c]] = x.get(r, c);
        }
    }
    let half = T::lit(0.5);
    for_each_quad(&mut buf, m, |q| {
        let [y00, y01, y10, y11] = *q;
        *q = [
            (y00 + y11) * half,
            (y00 - y11) * half,
            (y01 + y10) * half,
            (y01 - y10) * half,
        ];
    });
    Ok(buf)
}

/// `Σ_n c_n w_n`; exact inverse of [`walsh_coefficients`].
pub fn walsh_synthesize<T: Real>(coeffs: &[Complex<T>], level: FactorSpace) -> Result<Matrix<T>> {
    synthesize_at(coeffs, level.m())
}

/// Synthesis without the `m ≤ 8` level cap (used for joint tensor spaces).
pub(crate) fn synthesize_at<T: Real>(coeffs: &[Complex<T>], m: usize) -> Result<Matrix<T>> {
    let expected = 1usize << (2 * m);
    if coeffs.len() != expected {
        return Err(Error::BadLength {
            expected,
            found: coeffs.len(),
        });
    }
    let mut buf = coeffs.to_vec();
    for_each_quad(&mut buf, m, |q| {
        let [c0, c1, c2, c3] = *q;
        *q = [c0 + c1, c2 + c3, c2 - c3, c0 - c1];
    });
    let dim = 1usize << m;
    let (rows, cols) = slot_tables(m);
    Ok(Matrix::from_fn(dim, |r, c| buf[rows[r] | cols[c]]))
}

/// Naive Gram projection `2^{-m} Tr(w_n† x)` against materialized Walsh matrices.
pub fn walsh_coefficients_naive<T: Real>(x: &Matrix<T>) -> Result<Vec<Complex<T>>> {
    let level = FactorSpace::from_dim(x.dim())?;
    let norm = T::one() / T::lit(level.dim() as f64);
    Ok((0..level.walsh_len())
        .map(|n| {
            let w: Matrix<T> = kron_all(
                &(0..level.m())
                    .map(|f| generator(WalshIndex(n).code(f), T::lit(0.5), GeneratorMode::Paper))
                    .collect::<Vec<_>>(),
            )
            .expect("level bounded");
            w.hs_inner(x) * norm
        })
        .collect())
}

/// Centred-system coefficients: `x = Σ d_n w^{mz}_n`, obtained from the
/// `Paper`-mode coefficients by a per-factor change of basis.
pub fn meanzero_coefficients<T: Real>(x: &Matrix<T>, alpha: T) -> Result<Vec<Complex<T>>> {
    check_alpha(alpha)?;
    let m = level_of_dim(x.dim())?;
    let mut c = walsh_coefficients(x)?;
    let (up, down) = meanzero_entries(alpha);
    let half = T::lit(0.5);
    let (shift, gain) = ((up - down) * half, (up + down) * half);
    for_each_quad(&mut c, m, |q| {
        let d1 = q[1] / gain;
        q[0] = q[0] - d1 * shift;
        q[1] = d1;
    });
    Ok(c)
}

/// Inverse of [`meanzero_coefficients`].
pub fn meanzero_synthesize<T: Real>(d: &[Complex<T>], level: FactorSpace, alpha: T) -> Result<Matrix<T>> {
    check_alpha(alpha)?;
    let expected = level.walsh_len();
    if d.len() != expected {
        return Err(Error::BadLength {
            expected,
            found: d.len(),
        });
    }
    let (up, down) = meanzero_entries(alpha);
    let half = T::lit(0.5);
    let (shift, gain) = ((up - down) * half, (up + down) * half);
    let mut c = d.to_vec();
    for_each_quad(&mut c, level.m(), |q| {
        let d1 = q[1];
        q[0] = q[0] + d1 * shift;
        q[1] = d1 * gain;
    });
    walsh_synthesize(&c, level)
}

/// Coefficients in the requested generator system.
pub fn coefficients_in<T: Real>(x: &Matrix<T>, alpha: T, mode: GeneratorMode) -> Result<Vec<Complex<T>>> {
    match mode {
        GeneratorMode::Paper => walsh_coefficients(x),
        GeneratorMode::MeanZero => meanzero_coefficients(x, alpha),
    }
}

/// Synthesis in the requested generator system.
pub fn synthesize_in<T: Real>(c: &[Complex<T>], level: FactorSpace, alpha: T, mode: GeneratorMode) -> Result<Matrix<T>> {
    match mode {
        GeneratorMode::Paper => walsh_synthesize(c, level),
        GeneratorMode::MeanZero => meanzero_synthesize(c, level, alpha),
    }
}

/// `δ_n` coefficient vector of length `4^m`.
pub fn delta<T: Real>(n: usize, level: FactorSpace) -> Vec<Complex<T>> {
    let mut c = vec![Complex::zero(); level.walsh_len()];
    c[n] = Complex::one();
    c
}
