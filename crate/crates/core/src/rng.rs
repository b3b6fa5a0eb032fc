//! Counter-based random streams: every task draws from a stream keyed by
//! `(seed, task id)`, so results never depend on scheduling or worker count.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::scalar::Real;

pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// Mixes a tag into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian<T: Real>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex::new(T::lit(a), T::lit(b))
}

pub fn gaussian_vector<T: Real>(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex<T>> {
    (0..len).map(|_| gaussian(rng)).collect()
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix<T: Real>(rng: &mut ChaCha8Rng, dim: usize) -> Matrix<T> {
    Matrix::from_vec(dim, gaussian_vector(rng, dim * dim)).expect("square by construction")
}
