//! Finite-level laboratory for the non-commutative Walsh system on the
//! tower `M_2^{⊗m}` with the biased product state `diag(α, 1-α)^{⊗m}`.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the command-line tool uses.

pub mod classical;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod schauder;
pub mod state;
pub mod tensor;
pub mod verify;
pub mod walsh;

pub use error::{Error, Result};
pub use linalg::FactorSpace;
pub use scalar::Real;
pub use state::Side;
pub use walsh::{GeneratorMode, WalshIndex};

pub type ComplexMatrix = linalg::Matrix<f64>;
pub type StateSpec = state::StateSpec<f64>;
pub type LpContext = state::LpContext<f64>;
pub type OperatorHandle = schauder::OperatorHandle<f64>;
pub type NormReport = schauder::NormReport<f64>;
pub type SignSweepReport = schauder::SignSweepReport<f64>;
pub type TensorContext = tensor::TensorContext<f64>;
pub type StepFunction = classical::StepFunction<f64>;
pub type DyadicWeightTable = classical::DyadicWeightTable<f64>;
